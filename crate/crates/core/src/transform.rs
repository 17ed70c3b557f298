//! Isotropic changes of variable `h(y) = f(|y|) y / |y|` that lighten heavy
//! tails, and the pulled-back target `U_h(y) = U(h(y)) - log det grad h(y)`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::bps::Trajectory;
use crate::error::{Error, Result};
use crate::targets::{Capabilities, Family, Gradient, Target, TargetConfig};
use crate::{Matrix, Vector};

/// A radial profile `f`, strictly increasing with `f(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IsotropicTransform {
    /// Cubic near the origin, `e^{b r} - e/3` beyond `r = 1/b`; the join is C³.
    Exponential { b: f64 },
    /// Identity on `[0, R]`, `r + (r - R)^p` beyond.
    Polynomial { radius: f64, p: i32 },
}

/// Value and first two derivatives of the radial profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radial {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

impl IsotropicTransform {
    pub fn exponential(b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::Config(format!("exponential transform needs b > 0, got {b}")));
        }
        Ok(Self::Exponential { b })
    }

    pub fn polynomial(radius: f64, p: i32) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("polynomial transform needs R > 0, got {radius}")));
        }
        if p < 3 {
            return Err(Error::Config(format!("polynomial transform needs integer p >= 3, got {p}")));
        }
        Ok(Self::Polynomial { radius, p })
    }

    /// Radius where the two branches meet.
    pub fn join(&self) -> f64 {
        match *self {
            Self::Exponential { b } => 1.0 / b,
            Self::Polynomial { radius, .. } => radius,
        }
    }

    pub fn radial(&self, r: f64) -> Radial {
        match *self {
            Self::Exponential { b } => {
                if r <= 1.0 / b {
                    let b3e = b * b * b * E;
                    Radial {
                        f: b3e * r * r * r / 6.0 + b * E * r / 2.0,
                        df: b3e * r * r / 2.0 + b * E / 2.0,
                        d2f: b3e * r,
                    }
                } else {
                    let g = (b * r).exp();
                    Radial {
                        f: g - E / 3.0,
                        df: b * g,
                        d2f: b * b * g,
                    }
                }
            }
            Self::Polynomial { radius, p } => {
                if r <= radius {
                    Radial { f: r, df: 1.0, d2f: 0.0 }
                } else {
                    let s = r - radius;
                    let pf = p as f64;
                    Radial {
                        f: r + s.powi(p),
                        df: 1.0 + pf * s.powi(p - 1),
                        d2f: pf * (pf - 1.0) * s.powi(p - 2),
                    }
                }
            }
        }
    }

    /// `(f(r)/r, f'(r)/f(r) - 1/r)` in forms that stay accurate as `r -> 0`.
    fn ratios(&self, r: f64) -> (f64, f64) {
        match *self {
            Self::Exponential { b } if r <= 1.0 / b => {
                let a = b * E / 2.0;
                let c = b * b * b * E / 6.0;
                let q = a + c * r * r;
                (q, 2.0 * c * r / q)
            }
            Self::Polynomial { radius, .. } if r <= radius => (1.0, 0.0),
            Self::Polynomial { radius, p } => {
                let s = r - radius;
                let f = r + s.powi(p);
                (f / r, s.powi(p - 1) * (p as f64 * r - s) / (r * f))
            }
            Self::Exponential { b } => {
                // f = g (1 - e/(3g)) with g = e^{br}; only f/r itself may overflow
                let shrink = 1.0 - E / 3.0 * (-b * r).exp();
                ((b * r).exp() * shrink / r, b / shrink - 1.0 / r)
            }
        }
    }

    /// `(ln f'(r), f''(r) / f'(r))`, finite even where `f'` overflows.
    fn log_slope_terms(&self, r: f64) -> (f64, f64) {
        match *self {
            Self::Exponential { b } if r > 1.0 / b => (b.ln() + b * r, b),
            _ => {
                let rad = self.radial(r);
                (rad.df.ln(), rad.d2f / rad.df)
            }
        }
    }

    /// `ln(f(r) / r)`, finite even where `f` overflows.
    fn log_ratio(&self, r: f64) -> f64 {
        match *self {
            Self::Exponential { b } if r > 1.0 / b => b * r + (-E / 3.0 * (-b * r).exp()).ln_1p() - r.ln(),
            _ => self.ratios(r).0.ln(),
        }
    }

    /// `h(y)`.
    pub fn apply(&self, y: &Vector) -> Vector {
        let r = y.norm();
        if r == 0.0 {
            return y.clone();
        }
        y * self.ratios(r).0
    }

    /// Inverse radial profile, `f^{-1}(s)`.
    pub fn radial_inverse(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let (lo, hi) = match *self {
            Self::Polynomial { radius, .. } => {
                if s <= radius {
                    return s;
                }
                // f(r) >= r brackets the root in [R, s]
                (radius, s)
            }
            Self::Exponential { b } => {
                if s >= 2.0 * E / 3.0 {
                    return (s + E / 3.0).ln() / b;
                }
                (0.0, 1.0 / b)
            }
        };
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.radial(mid).f < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut r = 0.5 * (lo + hi);
        for _ in 0..3 {
            let rad = self.radial(r);
            let next = r - (rad.f - s) / rad.df;
            if next.is_finite() && next >= 0.0 {
                r = next;
            }
        }
        r
    }

    /// `h^{-1}(x)`.
    pub fn invert(&self, x: &Vector) -> Vector {
        let s = x.norm();
        if s == 0.0 {
            return x.clone();
        }
        x * (self.radial_inverse(s) / s)
    }

    /// `grad h(y) = (f/r) I + (f' - f/r) yhat yhat^T`, and `f'(0) I` at the origin.
    pub fn jacobian(&self, y: &Vector) -> Matrix {
        let d = y.len();
        let r = y.norm();
        let (ratio, _) = self.ratios(r);
        if r == 0.0 {
            return Matrix::identity(d, d) * ratio;
        }
        let u = y / r;
        Matrix::identity(d, d) * ratio + (&u * u.transpose()) * (self.radial(r).df - ratio)
    }

    /// `log det grad h(y)` and its gradient.
    pub fn log_det_jacobian(&self, y: &Vector) -> (f64, Vector) {
        let d = y.len() as f64;
        let r = y.norm();
        let (log_df, curvature) = self.log_slope_terms(r);
        let value = log_df + (d - 1.0) * self.log_ratio(r);
        if r == 0.0 {
            return (value, Vector::zeros(y.len()));
        }
        let slope = curvature + (d - 1.0) * self.ratios(r).1;
        (value, y * (slope / r))
    }

    /// Samples `h(y(t))` at the given times. The image of a straight segment
    /// is curved, so this is a pointwise evaluation rather than a new path.
    pub fn map_trajectory(&self, trajectory: &Trajectory, times: &[f64]) -> Result<Vec<(f64, Vector)>> {
        times
            .iter()
            .map(|&t| Ok((t, self.apply(&trajectory.position_at(t)?))))
            .collect()
    }

    pub fn config(&self) -> TransformConfig {
        match *self {
            Self::Exponential { b } => TransformConfig::Exp { b: Some(b) },
            Self::Polynomial { radius, p } => TransformConfig::Poly {
                radius: Some(radius),
                p: Some(p as f64),
            },
        }
    }
}

/// Serialized transform record; absent fields take defaults that depend on the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum TransformConfig {
    #[serde(rename = "exp")]
    Exp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
    },
    #[serde(rename = "poly")]
    Poly {
        #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
    },
}

/// Smallest integer power making `beta p > 2`, and at least 3.
pub fn default_power(beta: f64) -> i32 {
    3.max((2.0 / beta).ceil() as i32 + 1)
}

impl TransformConfig {
    /// Fills defaults (`b = 1`, `R = 1`, `p` from the target's tail exponent).
    pub fn resolve(&self, target: &TargetConfig) -> Result<IsotropicTransform> {
        match *self {
            TransformConfig::Exp { b } => IsotropicTransform::exponential(b.unwrap_or(1.0)),
            TransformConfig::Poly { radius, p } => {
                let p = match p {
                    Some(p) if p.fract() != 0.0 || !p.is_finite() => {
                        return Err(Error::Unsupported(format!("non-integer power p = {p}")))
                    }
                    Some(p) => p as i32,
                    None => match (target.family, target.parameters.beta) {
                        (Family::GenGaussian, Some(beta)) => default_power(beta),
                        _ => 3,
                    },
                };
                IsotropicTransform::polynomial(radius.unwrap_or(1.0), p)
            }
        }
    }
}

/// The target seen in `y`-coordinates after the change of variable `x = h(y)`.
#[derive(Debug, Clone)]
pub struct TransformedTarget<T> {
    base: T,
    transform: IsotropicTransform,
}

impl<T: Target> TransformedTarget<T> {
    pub fn new(base: T, transform: IsotropicTransform) -> Self {
        Self { base, transform }
    }

    pub fn base(&self) -> &T {
        &self.base
    }

    pub fn transform(&self) -> &IsotropicTransform {
        &self.transform
    }
}

impl<T: Target> Target for TransformedTarget<T> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_hessian: false,
            convex: false,
            affine_directional_rate: false,
        }
    }

    fn nonsmooth_radii(&self) -> Vec<f64> {
        let mut radii = vec![self.transform.join()];
        radii.extend(self.base.nonsmooth_radii().into_iter().map(|s| self.transform.radial_inverse(s)));
        radii
    }

    fn potential(&self, y: &Vector) -> Result<f64> {
        self.check_dim(y)?;
        let (log_det, _) = self.transform.log_det_jacobian(y);
        Ok(self.base.potential(&self.transform.apply(y))? - log_det)
    }

    fn grad(&self, y: &Vector) -> Result<Gradient> {
        self.check_dim(y)?;
        let (_, log_det_grad) = self.transform.log_det_jacobian(y);
        let r = y.norm();
        let (ratio, rel) = self.transform.ratios(r);
        if r > 0.0 {
            // radial bases: grad U_h = s phi'(s) (f'/f) u - grad log det, with s = f(r) allowed to overflow
            if let Some(elasticity) = self.base.radial_elasticity(ratio * r) {
                return Ok(Gradient {
                    value: y * (elasticity * (rel + 1.0 / r) / r) - log_det_grad,
                    degenerate: false,
                });
            }
        }
        let inner = self.base.grad(&self.transform.apply(y))?;
        // grad h is symmetric: (f/r) g + (f' - f/r) <u, g> u
        let mut pulled = &inner.value * ratio;
        if r > 0.0 {
            let u = y / r;
            pulled += &u * ((self.transform.radial(r).df - ratio) * u.dot(&inner.value));
        }
        Ok(Gradient {
            value: pulled - log_det_grad,
            degenerate: inner.degenerate,
        })
    }

    fn is_isotropic(&self) -> bool {
        self.base.is_isotropic()
    }
}
