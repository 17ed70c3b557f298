//! Run configuration shared by the command-line tool and the Python bindings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bps::{EventTimeMethod, Horizon, RefreshPolicy};
use crate::diagnostics::DriftGrid;
use crate::error::{Error, Result};
use crate::estimators::{Monomial, TestFunction};
use crate::targets::{BuiltinTarget, Capabilities, Gradient, Target, TargetConfig};
use crate::transform::{IsotropicTransform, TransformConfig, TransformedTarget};
use crate::{Matrix, Vector};

/// A named polynomial test function, e.g. `{"name": "x0^2", "terms": [{"indices": [0, 0]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub name: String,
    pub terms: Vec<Monomial>,
}

impl EstimatorSpec {
    pub fn function(&self) -> Result<TestFunction> {
        TestFunction::polynomial(self.terms.clone())
    }

    /// First and second moments of every coordinate.
    pub fn default_moments(d: usize) -> Vec<Self> {
        let mut out = Vec::with_capacity(2 * d);
        for i in 0..d {
            out.push(Self {
                name: format!("x{i}"),
                terms: vec![Monomial {
                    coefficient: 1.0,
                    indices: vec![i],
                }],
            });
        }
        for i in 0..d {
            out.push(Self {
                name: format!("x{i}^2"),
                terms: vec![Monomial {
                    coefficient: 1.0,
                    indices: vec![i, i],
                }],
            });
        }
        out
    }
}

/// Starting state; omitted parts default to the origin and a uniform velocity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
}

fn one() -> usize {
    1
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_auto(m: &EventTimeMethod) -> bool {
    *m == EventTimeMethod::Auto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub target: TargetConfig,
    pub policy: RefreshPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Horizon>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
    #[serde(default, skip_serializing_if = "is_auto")]
    pub method: EventTimeMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftGrid>,
    /// Allows a transform on a target that is not thick-tailed.
    #[serde(default, skip_serializing_if = "is_false")]
    pub force: bool,
}

impl RunConfig {
    pub fn new(target: TargetConfig, policy: RefreshPolicy) -> Self {
        Self {
            target,
            policy,
            transform: None,
            horizon: None,
            seed: 0,
            chains: 1,
            estimators: Vec::new(),
            init: None,
            method: EventTimeMethod::Auto,
            drift: None,
            force: false,
        }
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Schema check only; callers that patch fields afterwards run `validate` themselves.
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config is always serializable")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let base = self.target.build()?;
        self.policy.validate()?;
        if let Some(t) = &self.transform {
            t.resolve(&self.target)?;
            if !base.is_thick_tailed() && !self.force {
                return Err(Error::Config(
                    "a transform is meant for thick-tailed targets; set \"force\": true to override".into(),
                ));
            }
        }
        if self.chains == 0 {
            return Err(Error::Config("chains must be >= 1".into()));
        }
        match self.horizon {
            Some(Horizon::Duration(t)) if !(t > 0.0 && t.is_finite()) => {
                return Err(Error::Config(format!("duration must be positive, got {t}")))
            }
            Some(Horizon::Events(0)) => return Err(Error::Config("event count must be >= 1".into())),
            _ => {}
        }
        let d = self.target.dimension;
        for e in &self.estimators {
            e.function()?;
            if e.terms.iter().flat_map(|m| &m.indices).any(|&i| i >= d) {
                return Err(Error::Config(format!("estimator {:?} uses a coordinate beyond dimension {d}", e.name)));
            }
        }
        if let Some(init) = &self.init {
            for part in [&init.x, &init.v].into_iter().flatten() {
                if part.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: part.len(),
                    });
                }
            }
            if let Some(v) = &init.v {
                let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if (n - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("initial velocity must have unit norm, got {n}")));
                }
            }
        }
        Ok(())
    }

    pub fn resolved_transform(&self) -> Result<Option<IsotropicTransform>> {
        self.transform.as_ref().map(|t| t.resolve(&self.target)).transpose()
    }

    /// The potential the sampler actually runs on.
    pub fn sampling_target(&self) -> Result<SamplingTarget> {
        let base = self.target.build()?;
        Ok(match self.resolved_transform()? {
            Some(t) => SamplingTarget::Transformed(TransformedTarget::new(base, t)),
            None => SamplingTarget::Plain(base),
        })
    }

    pub fn estimator_specs(&self) -> Vec<EstimatorSpec> {
        if self.estimators.is_empty() {
            EstimatorSpec::default_moments(self.target.dimension)
        } else {
            self.estimators.clone()
        }
    }
}

/// A built-in target, optionally seen through a tail transform.
#[derive(Debug, Clone)]
pub enum SamplingTarget {
    Plain(BuiltinTarget),
    Transformed(TransformedTarget<BuiltinTarget>),
}

impl SamplingTarget {
    pub fn transform(&self) -> Option<&IsotropicTransform> {
        match self {
            SamplingTarget::Plain(_) => None,
            SamplingTarget::Transformed(t) => Some(t.transform()),
        }
    }

    fn inner(&self) -> &dyn Target {
        match self {
            SamplingTarget::Plain(t) => t,
            SamplingTarget::Transformed(t) => t,
        }
    }
}

impl Target for SamplingTarget {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn capabilities(&self) -> Capabilities {
        self.inner().capabilities()
    }

    fn nonsmooth_radii(&self) -> Vec<f64> {
        self.inner().nonsmooth_radii()
    }

    fn potential(&self, x: &Vector) -> Result<f64> {
        self.inner().potential(x)
    }

    fn grad(&self, x: &Vector) -> Result<Gradient> {
        self.inner().grad(x)
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        self.inner().hessian(x)
    }

    fn affine_rate(&self, x: &Vector, v: &Vector) -> Option<(f64, f64)> {
        self.inner().affine_rate(x, v)
    }

    fn is_isotropic(&self) -> bool {
        self.inner().is_isotropic()
    }

    fn radial_elasticity(&self, s: f64) -> Option<f64> {
        self.inner().radial_elasticity(s)
    }
}
