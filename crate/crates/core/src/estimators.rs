//! Expectations along BPS paths: continuous-time averages with batch-means
//! error bars, and the reweighted average over event states.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bps::{RefreshPolicy, Trajectory};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::targets::Target;
use crate::transform::IsotropicTransform;
use crate::Vector;

/// `coefficient * prod_{i in indices} x_i`, with at most two factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    #[serde(default = "one")]
    pub coefficient: f64,
    #[serde(default)]
    pub indices: Vec<usize>,
}

fn one() -> f64 {
    1.0
}

impl Monomial {
    pub fn new(coefficient: f64, indices: Vec<usize>) -> Result<Self> {
        if indices.len() > 2 {
            return Err(Error::Unsupported(format!(
                "closed-form integration covers degree <= 2, got degree {}",
                indices.len()
            )));
        }
        Ok(Self { coefficient, indices })
    }

    pub fn degree(&self) -> usize {
        self.indices.len()
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.indices.iter().fold(self.coefficient, |acc, &i| acc * x[i])
    }
}

pub type GenericFn = Arc<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;

/// A function `g(x, v)` to average along the path.
#[derive(Clone)]
pub enum TestFunction {
    /// Sum of monomials in the position, integrated exactly on each segment.
    Polynomial(Vec<Monomial>),
    /// Anything else, integrated by Gauss-Legendre on each segment.
    Generic(GenericFn),
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Polynomial(terms) => f.debug_tuple("Polynomial").field(terms).finish(),
            TestFunction::Generic(_) => f.write_str("Generic(..)"),
        }
    }
}

impl TestFunction {
    pub fn constant(c: f64) -> Self {
        TestFunction::Polynomial(vec![Monomial {
            coefficient: c,
            indices: vec![],
        }])
    }

    pub fn coordinate(i: usize) -> Self {
        TestFunction::Polynomial(vec![Monomial {
            coefficient: 1.0,
            indices: vec![i],
        }])
    }

    pub fn product(i: usize, j: usize) -> Self {
        TestFunction::Polynomial(vec![Monomial {
            coefficient: 1.0,
            indices: vec![i, j],
        }])
    }

    pub fn polynomial(terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            Monomial::new(t.coefficient, t.indices.clone())?;
        }
        Ok(TestFunction::Polynomial(terms))
    }

    pub fn generic<F: Fn(&Vector, &Vector) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        TestFunction::Generic(Arc::new(f))
    }

    pub fn eval(&self, x: &Vector, v: &Vector) -> f64 {
        match self {
            TestFunction::Polynomial(terms) => terms.iter().map(|m| m.eval(x)).sum(),
            TestFunction::Generic(f) => f(x, v),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if let TestFunction::Polynomial(terms) = self {
            if let Some(&bad) = terms.iter().flat_map(|m| m.indices.iter()).find(|&&i| i >= d) {
                return Err(Error::DimensionMismatch { expected: d, got: bad + 1 });
            }
        }
        Ok(())
    }
}

/// `int_0^tau g(x + s v) ds` for a single monomial, in closed form.
pub fn segment_integral(x: &Vector, v: &Vector, tau: f64, monomial: &Monomial) -> Result<f64> {
    let c = monomial.coefficient;
    let (t2, t3) = (tau * tau / 2.0, tau * tau * tau / 3.0);
    Ok(match monomial.indices.as_slice() {
        [] => c * tau,
        &[i] => c * (x[i] * tau + v[i] * t2),
        &[i, j] => c * (x[i] * x[j] * tau + (x[i] * v[j] + x[j] * v[i]) * t2 + v[i] * v[j] * t3),
        other => {
            return Err(Error::Unsupported(format!(
                "closed-form integration covers degree <= 2, got degree {}",
                other.len()
            )))
        }
    })
}

pub const DEFAULT_QUADRATURE_ORDER: usize = 16;

/// Batch-means variance `B * sum (m_i - mean)^2 / (n - 1)`.
pub fn batch_means_variance(batch_means: &[f64], batch_length: f64) -> Result<f64> {
    let n = batch_means.len();
    if n < 2 {
        return Err(Error::TooFew {
            what: "batches",
            needed: 2,
            got: n,
        });
    }
    let mean = batch_means.iter().sum::<f64>() / n as f64;
    let ss: f64 = batch_means.iter().map(|m| (m - mean) * (m - mean)).sum();
    Ok(batch_length * ss / (n - 1) as f64)
}

/// Square-root batching, never fewer than two batches.
pub fn batch_count(duration: f64) -> usize {
    (duration.sqrt().floor() as usize).max(2)
}

/// Per-chain raw sums from which pooled reports are assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSums {
    pub duration: f64,
    pub integral: f64,
    pub square_integral: f64,
    pub batch_length: f64,
    pub batch_integrals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    /// Batch-means estimate of the asymptotic variance.
    pub variance: f64,
    pub std_error: f64,
    pub batches: usize,
    pub batch_length: f64,
    /// `T * Var_path(g) / variance`; undefined when the variance estimate is zero.
    pub ess: Option<f64>,
}

impl EstimateReport {
    /// Pools chains: the estimate is the total integral over total time, and
    /// every chain's batch means enter one variance estimate.
    pub fn pool(sums: &[PathSums]) -> Result<Self> {
        let duration: f64 = sums.iter().map(|s| s.duration).sum();
        if sums.is_empty() || duration <= 0.0 {
            return Err(Error::EmptyTrajectory);
        }
        let estimate = sums.iter().map(|s| s.integral).sum::<f64>() / duration;
        let second = sums.iter().map(|s| s.square_integral).sum::<f64>() / duration;
        let means: Vec<(f64, f64)> = sums
            .iter()
            .flat_map(|s| s.batch_integrals.iter().map(move |b| (b / s.batch_length, s.batch_length)))
            .collect();
        let n = means.len();
        if n < 2 {
            return Err(Error::TooFew {
                what: "batches",
                needed: 2,
                got: n,
            });
        }
        let grand = means.iter().map(|(m, _)| m).sum::<f64>() / n as f64;
        let variance = means.iter().map(|(m, b)| b * (m - grand) * (m - grand)).sum::<f64>() / (n - 1) as f64;
        let path_var = (second - estimate * estimate).max(0.0);
        Ok(Self {
            estimate,
            variance,
            std_error: (variance / duration).sqrt(),
            batches: n,
            batch_length: means.iter().map(|(_, b)| b).sum::<f64>() / n as f64,
            ess: (variance > 0.0).then(|| duration * path_var / variance),
        })
    }
}

/// Continuous-time averaging with a configurable per-segment quadrature rule.
#[derive(Debug, Clone)]
pub struct PathAverager {
    rule: GaussLegendre,
}

impl Default for PathAverager {
    fn default() -> Self {
        Self::new(DEFAULT_QUADRATURE_ORDER)
    }
}

impl PathAverager {
    pub fn new(quadrature_order: usize) -> Self {
        Self {
            rule: GaussLegendre::new(quadrature_order),
        }
    }

    fn quadrature<F: Fn(&Vector, &Vector) -> f64 + ?Sized>(&self, f: &F, x: &Vector, v: &Vector, len: f64) -> f64 {
        self.rule.integrate(0.0, len, |s| f(&(x + v * s), v))
    }

    /// Integral of `g` over a straight piece starting at `x` with velocity `v`.
    fn piece(&self, g: &TestFunction, x: &Vector, v: &Vector, len: f64) -> f64 {
        match g {
            TestFunction::Polynomial(terms) => terms
                .iter()
                .map(|m| segment_integral(x, v, len, m).expect("degree checked at construction"))
                .sum(),
            TestFunction::Generic(f) => self.quadrature(f.as_ref(), x, v, len),
        }
    }

    pub fn sums(&self, trajectory: &Trajectory, g: &TestFunction) -> Result<PathSums> {
        if trajectory.events.len() < 2 || trajectory.duration <= 0.0 {
            return Err(Error::EmptyTrajectory);
        }
        g.check_dim(trajectory.dim())?;
        let duration = trajectory.duration;
        let nb = batch_count(duration);
        let batch_length = duration / nb as f64;
        let mut batches = vec![0.0; nb];
        let mut square_integral = 0.0;
        let square = |x: &Vector, v: &Vector| {
            let y = g.eval(x, v);
            y * y
        };
        let mut b = 0usize;
        for (x, v, t0, t1) in trajectory.segments() {
            square_integral += self.quadrature(&square, x, v, t1 - t0);
            let mut t = t0;
            loop {
                let batch_end = if b + 1 == nb { duration } else { (b + 1) as f64 * batch_length };
                let end = t1.min(batch_end);
                if end > t {
                    batches[b] += self.piece(g, &(x + v * (t - t0)), v, end - t);
                }
                if t1 <= batch_end || b + 1 == nb {
                    break;
                }
                t = batch_end;
                b += 1;
            }
        }
        Ok(PathSums {
            duration,
            integral: batches.iter().sum(),
            square_integral,
            batch_length,
            batch_integrals: batches,
        })
    }

    pub fn path_average(&self, trajectory: &Trajectory, g: &TestFunction) -> Result<EstimateReport> {
        EstimateReport::pool(&[self.sums(trajectory, g)?])
    }
}

/// `S_T[g] / T` with batch-means error bars.
pub fn path_average(trajectory: &Trajectory, g: &TestFunction) -> Result<EstimateReport> {
    PathAverager::default().path_average(trajectory, g)
}

/// `g(h(y), v)` as a generic function on the transformed coordinates.
pub fn pull_back(transform: &IsotropicTransform, g: &TestFunction) -> TestFunction {
    let h = *transform;
    let g = g.clone();
    TestFunction::generic(move |y, v| g.eval(&h.apply(y), v))
}

/// Path average of `g` in the original coordinates, computed along a path run in `y = h^{-1}(x)`.
pub fn mapped_estimate(transform: &IsotropicTransform, trajectory: &Trajectory, g: &TestFunction) -> Result<EstimateReport> {
    g.check_dim(trajectory.dim())?;
    path_average(trajectory, &pull_back(transform, g))
}

/// Event-state weights `1 / lambda_bar(X_k, -V_k)` over bounce and refresh events.
pub fn jump_chain_weights<T: Target + ?Sized>(trajectory: &Trajectory, target: &T, policy: &RefreshPolicy) -> Result<Vec<f64>> {
    trajectory
        .jump_events()
        .map(|e| {
            let grad = target.grad(&e.x)?.value;
            let rate = policy.rate_with_grad_norm(&e.x, grad.norm()) + (-grad.dot(&e.v)).max(0.0);
            Ok(1.0 / rate)
        })
        .collect()
}

/// Self-normalized average of `g` over event states, with a delta-method batch-means error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpChainReport {
    pub estimate: f64,
    pub std_error: f64,
    pub events: usize,
}

pub fn jump_chain_report<T: Target + ?Sized>(
    trajectory: &Trajectory,
    g: &TestFunction,
    target: &T,
    policy: &RefreshPolicy,
) -> Result<JumpChainReport> {
    g.check_dim(trajectory.dim())?;
    let weights = jump_chain_weights(trajectory, target, policy)?;
    let values: Vec<f64> = trajectory.jump_events().map(|e| g.eval(&e.x, &e.v)).collect();
    weighted_ratio_report(&weights, &values)
}

/// `sum w_k y_k / sum w_k` with a delta-method error from contiguous batches
/// of `floor(sqrt(n))` events.
pub fn weighted_ratio_report(weights: &[f64], values: &[f64]) -> Result<JumpChainReport> {
    let n = weights.len();
    if n == 0 || values.len() != n {
        return Err(Error::TooFew {
            what: "post-initial events",
            needed: 1,
            got: n.min(values.len()),
        });
    }
    let total_w: f64 = weights.iter().sum();
    let estimate = weights.iter().zip(values).map(|(w, y)| w * y).sum::<f64>() / total_w;
    let nb = ((n as f64).sqrt().floor() as usize).max(2);
    let std_error = if n < nb {
        f64::NAN
    } else {
        let mut ss = 0.0;
        let mut mean_w = 0.0;
        for b in 0..nb {
            let (lo, hi) = (b * n / nb, (b + 1) * n / nb);
            let w: f64 = weights[lo..hi].iter().sum();
            let a: f64 = weights[lo..hi].iter().zip(&values[lo..hi]).map(|(w, y)| w * y).sum();
            let z = a - estimate * w;
            ss += z * z;
            mean_w += w / nb as f64;
        }
        (ss / ((nb - 1) * nb) as f64).sqrt() / mean_w
    };
    Ok(JumpChainReport {
        estimate,
        std_error,
        events: n,
    })
}

pub fn jump_chain_estimate<T: Target + ?Sized>(
    trajectory: &Trajectory,
    g: &TestFunction,
    target: &T,
    policy: &RefreshPolicy,
) -> Result<f64> {
    Ok(jump_chain_report(trajectory, g, target, policy)?.estimate)
}
