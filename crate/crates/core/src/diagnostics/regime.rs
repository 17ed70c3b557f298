//! Tail-regime classification from the growth of `|grad U|` along rays.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{c_d, sphere_directions};
use crate::bps::RefreshPolicy;
use crate::error::Result;
use crate::targets::{hessian_or_fd, Target};
use crate::transform::{default_power, TransformConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Gradient norm diverges, Hessian bounded.
    RegularA,
    /// Gradient norm tends to a positive constant.
    RegularB,
    /// `|grad U| / |x|` diverges.
    Thin,
    /// `|x| |grad U|` bounded with `<x, grad U>` eventually above `d`.
    ThickI,
    /// `|grad U| ~ |x|^{beta - 1}` with `0 < beta < 1`.
    ThickIi,
    Unclassified,
}

/// Probe values at one radius, maximized (or for `x_dot_grad`, minimized) over directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub radius: f64,
    pub grad_norm: f64,
    pub hessian_norm: f64,
    pub radius_times_grad: f64,
    pub x_dot_grad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeAdvice {
    pub regime: Regime,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<RefreshPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformConfig>,
    pub checks: BTreeMap<String, f64>,
    pub probes: Vec<Probe>,
}

const PROBE_RADII: [f64; 4] = [1e1, 1e2, 1e3, 1e4];
const SLOPE_TOLERANCE: f64 = 0.05;

/// Least-squares slope of `log y` against `log r`.
fn log_slope(r: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn spectral_norm(m: &crate::Matrix) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().fold(0.0f64, |acc, e| acc.max(e.abs()))
}

pub fn probe<T: Target + ?Sized>(target: &T) -> Result<Vec<Probe>> {
    let d = target.dim();
    let mut dirs = sphere_directions(d, 2 * d + 2);
    let mut ones = crate::Vector::from_element(d, 1.0);
    ones /= ones.norm();
    dirs.push(ones);
    PROBE_RADII
        .iter()
        .map(|&radius| {
            let mut p = Probe {
                radius,
                grad_norm: 0.0,
                hessian_norm: 0.0,
                radius_times_grad: 0.0,
                x_dot_grad: f64::INFINITY,
            };
            for u in &dirs {
                let x = u * radius;
                let g = target.grad(&x)?.value;
                p.grad_norm = p.grad_norm.max(g.norm());
                p.hessian_norm = p.hessian_norm.max(spectral_norm(&hessian_or_fd(target, &x)?));
                p.radius_times_grad = p.radius_times_grad.max(radius * g.norm());
                p.x_dot_grad = p.x_dot_grad.min(x.dot(&g));
            }
            Ok(p)
        })
        .collect()
}

/// Fits tail exponents and maps them to a sampler configuration.
///
/// These are finite-radius fits, not limits: the answer is evidence for a
/// regime, and targets whose behaviour changes beyond `1e4` can fool it.
pub fn classify_regime<T: Target + ?Sized>(target: &T) -> Result<RegimeAdvice> {
    let probes = probe(target)?;
    let radii: Vec<f64> = probes.iter().map(|p| p.radius).collect();
    let grad: Vec<f64> = probes.iter().map(|p| p.grad_norm).collect();
    let hess: Vec<f64> = probes.iter().map(|p| p.hessian_norm).collect();
    let slope = log_slope(&radii, &grad);
    let far = probes.last().expect("probe radii are nonempty");
    let d = target.dim() as f64;

    let mut checks = BTreeMap::new();
    checks.insert("grad_slope".to_string(), slope);
    checks.insert("hessian_slope".to_string(), log_slope(&radii, &hess));

    let (regime, policy, transform) = if slope > 1.0 + SLOPE_TOLERANCE {
        (Regime::Thin, Some(RefreshPolicy::position_dependent(1.0, 0.5)), None)
    } else if slope > SLOPE_TOLERANCE {
        // bounded Hessian: take the largest value over the two outer shells as alpha_1
        let alpha1 = hess[hess.len() - 2..].iter().fold(0.0f64, |a, b| a.max(*b));
        let lambda = (2.0 * alpha1 + 1.0).powi(2) + 1.0;
        checks.insert("alpha_1".to_string(), alpha1);
        checks.insert("lambda_ref_threshold".to_string(), (2.0 * alpha1 + 1.0).powi(2));
        (Regime::RegularA, Some(RefreshPolicy::constant(lambda)), None)
    } else if slope.abs() <= SLOPE_TOLERANCE {
        let alpha2 = far.grad_norm / 2.0;
        let cd = c_d(target.dim());
        checks.insert("alpha_2".to_string(), alpha2);
        checks.insert("c_d".to_string(), cd);
        checks.insert("lambda_ref_bound".to_string(), alpha2 / cd);
        (Regime::RegularB, Some(RefreshPolicy::constant(0.9 * alpha2 / cd)), None)
    } else if (slope + 1.0).abs() <= SLOPE_TOLERANCE && far.x_dot_grad > d {
        checks.insert("radius_times_grad".to_string(), far.radius_times_grad);
        checks.insert("x_dot_grad".to_string(), far.x_dot_grad);
        checks.insert("dimension".to_string(), d);
        (Regime::ThickI, Some(RefreshPolicy::constant(1.0)), Some(TransformConfig::Exp { b: Some(1.0) }))
    } else if slope < -SLOPE_TOLERANCE && slope > -1.0 + SLOPE_TOLERANCE {
        let beta = 1.0 + slope;
        let p = default_power(beta);
        checks.insert("beta".to_string(), beta);
        checks.insert("scaled_grad".to_string(), far.radius.powf(1.0 - beta) * far.grad_norm);
        checks.insert("beta_times_p".to_string(), beta * p as f64);
        (
            Regime::ThickIi,
            Some(RefreshPolicy::constant(1.0)),
            Some(TransformConfig::Poly {
                radius: Some(1.0),
                p: Some(p as f64),
            }),
        )
    } else {
        (Regime::Unclassified, None, None)
    };
    Ok(RegimeAdvice {
        regime,
        policy,
        transform,
        checks,
        probes,
    })
}
