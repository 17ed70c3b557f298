//! Numerical evidence for geometric ergodicity: angular constants, the
//! Lyapunov function `V = e^{U/2} / sqrt(lambda_bar(x, -v))`, its exact drift
//! ratio `2 L V / V`, and grid sweeps of that ratio over shells.

mod regime;

pub use regime::{classify_regime, Probe, Regime, RegimeAdvice};

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::bps::RefreshPolicy;
use crate::error::{Error, Result};
use crate::quadrature::adaptive;
use crate::targets::{hessian_or_fd, Target};
use crate::{Matrix, Vector};

/// Normalizer of the polar-angle density `kappa_d sin^{d-2}(theta)` on `[0, pi]`.
pub fn angle_norm(d: usize) -> f64 {
    let d = d as f64;
    (ln_gamma(d / 2.0) - ln_gamma((d - 1.0) / 2.0)).exp() / PI.sqrt()
}

/// `F(u, d) = kappa_d int_0^{pi/2} sin^{d-2}(theta) / sqrt(1 + u cos theta) dtheta`.
pub fn angular_integral(u: f64, d: usize) -> f64 {
    let k = angle_norm(d);
    let p = d as i32 - 2;
    let integrand = |t: f64| t.sin().powi(p) / (1.0 + u * t.cos()).sqrt();
    // the integrand turns over where cos(theta) ~ 1/u; split there so large u stays cheap
    let knee = if u > 1.0 { (1.0 / u).asin().max(1e-300) } else { 0.0 };
    let split = PI / 2.0 - knee;
    let mut total = 0.0;
    for (a, b) in [(0.0, split), (split, PI / 2.0)] {
        if b > a {
            total += adaptive(integrand, a, b, 1e-15, 1e-13).value;
        }
    }
    k * total
}

const C_D_UPPER: f64 = 1e6;

/// Smallest grid value `u` (to 1e-10) with `F(u, d) <= 1/4`.
pub fn c_d(d: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, C_D_UPPER);
    while hi - lo > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if angular_integral(mid, d) > 0.25 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `kappa_d int_0^{pi/2} sin^{d-2}(theta) cos^{-1/2}(theta) dtheta`, in closed form.
pub fn gamma_d(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    -3.0 * gamma(-0.75) / (8.0 * PI.sqrt()) * (ln_gamma(h) - ln_gamma(h - 0.25)).exp()
}

/// `lambda_ref(x)` and its gradient.
pub fn refresh_rate_and_gradient(policy: &RefreshPolicy, grad: &Vector, hessian: &Matrix, x: &Vector) -> (f64, Vector) {
    match *policy {
        RefreshPolicy::Constant { lambda_ref } => (lambda_ref, Vector::zeros(x.len())),
        RefreshPolicy::PositionDependent { lambda_ref, epsilon } => {
            let g = grad.norm();
            let r = x.norm();
            let m = r.powf(epsilon).max(1.0);
            let mut d_rate = if g > 0.0 { hessian * (grad / g) / m } else { Vector::zeros(x.len()) };
            if r > 1.0 {
                d_rate -= x * (g * epsilon * r.powf(-epsilon - 2.0));
            }
            (lambda_ref + g / m, d_rate)
        }
    }
}

/// `V(x, v) = exp(U(x)/2) / sqrt(lambda_ref(x) + <grad U(x), -v>_+)`.
pub fn lyapunov<T: Target + ?Sized>(target: &T, policy: &RefreshPolicy, x: &Vector, v: &Vector) -> Result<f64> {
    Ok(log_lyapunov(target, policy, x, v)?.exp())
}

pub fn log_lyapunov<T: Target + ?Sized>(target: &T, policy: &RefreshPolicy, x: &Vector, v: &Vector) -> Result<f64> {
    let g = target.grad(x)?.value;
    let denom = policy.rate_with_grad_norm(x, g.norm()) + (-g.dot(v)).max(0.0);
    Ok(0.5 * target.potential(x)? - 0.5 * denom.ln())
}

/// Everything about a position that the drift ratio needs, computed once per `x`.
#[derive(Debug, Clone)]
pub struct DriftPoint {
    pub x: Vector,
    pub grad: Vector,
    pub hessian: Matrix,
    pub rate: f64,
    pub rate_grad: Vector,
    /// `F(|grad U| / lambda_ref(x), d)`.
    pub angular: f64,
}

impl DriftPoint {
    pub fn new<T: Target + ?Sized>(target: &T, policy: &RefreshPolicy, x: &Vector) -> Result<Self> {
        let grad = target.grad(x)?.value;
        let hessian = hessian_or_fd(target, x)?;
        let (rate, rate_grad) = refresh_rate_and_gradient(policy, &grad, &hessian, x);
        let angular = angular_integral(grad.norm() / rate, x.len());
        Ok(Self {
            x: x.clone(),
            grad,
            hessian,
            rate,
            rate_grad,
            angular,
        })
    }

    /// `2 L V(x, v) / V(x, v)` for the extended generator, all three sign cases.
    pub fn ratio(&self, v: &Vector) -> f64 {
        let lam = self.rate;
        let r = self.grad.dot(v);
        let curvature = v.dot(&(&self.hessian * v));
        let slope = self.rate_grad.dot(v);
        if r.abs() <= 1e-12 * self.grad.norm().max(1.0) {
            // right derivative of the refresh-plus-reverse rate along the ray
            return -(slope + (-curvature).max(0.0)) / lam - lam + 2.0 * lam * self.angular;
        }
        let q = (-r).max(0.0);
        let rp = r.max(0.0);
        let back = lam + q;
        let transport = r - slope / back + if q > 0.0 { curvature / back } else { 0.0 };
        let refresh = lam * ((back / lam).sqrt() * (0.5 + self.angular) - 1.0);
        let bounce = rp * ((back / (lam + rp)).sqrt() - 1.0);
        transport + 2.0 * (refresh + bounce)
    }
}

pub fn drift_ratio<T: Target + ?Sized>(target: &T, policy: &RefreshPolicy, x: &Vector, v: &Vector) -> Result<f64> {
    target.check_dim(v)?;
    Ok(DriftPoint::new(target, policy, x)?.ratio(v))
}

pub fn drift_ratio_constant<T: Target + ?Sized>(target: &T, lambda_ref: f64, x: &Vector, v: &Vector) -> Result<f64> {
    drift_ratio(target, &RefreshPolicy::constant(lambda_ref), x, v)
}

pub fn drift_ratio_varying<T: Target + ?Sized>(target: &T, policy: &RefreshPolicy, x: &Vector, v: &Vector) -> Result<f64> {
    if policy.is_constant() {
        return Err(Error::Config("expected a position-dependent refresh policy".into()));
    }
    drift_ratio(target, policy, x, v)
}

/// Deterministic quasi-uniform points on `S^{d-1}`.
pub fn sphere_directions(d: usize, n: usize) -> Vec<Vector> {
    match d {
        2 => (0..n)
            .map(|i| {
                let a = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                Vector::from_vec(vec![a.cos(), a.sin()])
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let s = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    Vector::from_vec(vec![s * a.cos(), s * a.sin(), z])
                })
                .collect()
        }
        _ => {
            let primes = first_primes(d + d % 2);
            (1..)
                .map(|i| {
                    let u: Vec<f64> = primes.iter().map(|&p| radical_inverse(i, p)).collect();
                    let g: Vec<f64> = u
                        .chunks(2)
                        .flat_map(|c| {
                            let rad = (-2.0 * c[0].ln()).sqrt();
                            [rad * (2.0 * PI * c[1]).cos(), rad * (2.0 * PI * c[1]).sin()]
                        })
                        .take(d)
                        .collect();
                    Vector::from_vec(g)
                })
                .filter(|g| g.norm() > 1e-12)
                .map(|g| g.normalize())
                .take(n)
                .collect()
        }
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut f = inv;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

fn first_primes(n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2;
    while out.len() < n {
        if out.iter().all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// A unit vector orthogonal to `u`, built from the coordinate axis least aligned with it.
fn perpendicular(u: &Vector) -> Vector {
    let i = (0..u.len()).min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap_or(0);
    let mut e = Vector::zeros(u.len());
    e[i] = 1.0;
    (&e - u * u.dot(&e)).normalize()
}

/// Velocity and position resolution of a drift sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftGrid {
    pub radii: Vec<f64>,
    pub directions: usize,
    pub angles: usize,
    /// Extra angles at `pi/2 +- 10^{-k}`, `k = 1..=boundary_layer`, where sign changes of `<grad U, v>` hide.
    #[serde(default = "default_boundary_layer")]
    pub boundary_layer: u32,
}

fn default_boundary_layer() -> u32 {
    8
}

impl DriftGrid {
    pub fn new(radii: Vec<f64>, directions: usize, angles: usize) -> Self {
        Self {
            radii,
            directions,
            angles,
            boundary_layer: default_boundary_layer(),
        }
    }

    fn velocity_angles(&self) -> Vec<f64> {
        let m = self.angles.max(2);
        let mut out: Vec<f64> = (0..m).map(|j| j as f64 * PI / (m - 1) as f64).collect();
        for k in 1..=self.boundary_layer {
            let e = 10f64.powi(-(k as i32));
            out.push(PI / 2.0 - e);
            out.push(PI / 2.0 + e);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub ratio: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellReport {
    pub radius: f64,
    pub worst: Witness,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Confirmed,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub policy: RefreshPolicy,
    pub grid: DriftGrid,
    pub shells: Vec<ShellReport>,
    /// `(K, sup of the ratio over shells with radius >= K)` for each grid radius.
    pub sup_outside: Vec<(f64, f64)>,
    /// Smallest grid radius beyond which every evaluated ratio is negative.
    pub radius: Option<f64>,
    pub verdict: Verdict,
}

impl DriftReport {
    /// Plain-text table, one row per shell.
    pub fn table(&self) -> String {
        let mut s = format!("{:>12}  {:>14}  {:>14}\n", "radius", "worst ratio", "sup |x|>=K");
        for (shell, (_, sup)) in self.shells.iter().zip(&self.sup_outside) {
            s.push_str(&format!("{:>12.4e}  {:>14.6e}  {:>14.6e}\n", shell.radius, shell.worst.ratio, sup));
        }
        s.push_str(&match self.radius {
            Some(k) => format!("negative drift on every shell with radius >= {k}: confirmed\n"),
            None => "no grid radius beyond which the drift is negative: violated\n".to_string(),
        });
        s
    }
}

fn sweep_shell<T: Target + ?Sized>(
    target: &T,
    policy: &RefreshPolicy,
    radius: f64,
    directions: &[Vector],
    angles: &[f64],
) -> Result<ShellReport> {
    let mut worst = Witness {
        ratio: f64::NEG_INFINITY,
        x: vec![],
        v: vec![],
    };
    let mut evaluations = 0;
    for dir in directions {
        let x = dir * radius;
        let point = DriftPoint::new(target, policy, &x)?;
        let g = point.grad.norm();
        let axis = if g > 0.0 { &point.grad / g } else { dir.clone() };
        let side = perpendicular(&axis);
        for &theta in angles {
            let v = (&axis * theta.cos() + &side * theta.sin()).normalize();
            let ratio = point.ratio(&v);
            evaluations += 1;
            if ratio.is_nan() {
                return Err(Error::Numerical(format!("drift ratio is NaN at radius {radius}")));
            }
            if ratio > worst.ratio {
                worst = Witness {
                    ratio,
                    x: x.iter().copied().collect(),
                    v: v.iter().copied().collect(),
                };
            }
        }
    }
    Ok(ShellReport {
        radius,
        worst,
        evaluations,
    })
}

/// Evaluates the drift ratio over shells × directions × velocity angles.
/// Says nothing about radii beyond the grid.
pub fn verify_drift<T: Target + ?Sized>(target: &T, policy: &RefreshPolicy, grid: &DriftGrid) -> Result<DriftReport> {
    policy.validate()?;
    if grid.radii.is_empty() || grid.directions == 0 {
        return Err(Error::Config("drift grid needs at least one radius and one direction".into()));
    }
    if grid.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::Config("drift radii must be positive".into()));
    }
    let mut radii = grid.radii.clone();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let directions = sphere_directions(target.dim(), grid.directions);
    let angles = grid.velocity_angles();
    let shells: Vec<ShellReport> = radii
        .par_iter()
        .map(|&r| sweep_shell(target, policy, r, &directions, &angles))
        .collect::<Result<_>>()?;
    let mut sup_outside: Vec<(f64, f64)> = Vec::with_capacity(shells.len());
    let mut running = f64::NEG_INFINITY;
    for s in shells.iter().rev() {
        running = running.max(s.worst.ratio);
        sup_outside.push((s.radius, running));
    }
    sup_outside.reverse();
    let radius = sup_outside.iter().find(|(_, sup)| *sup < 0.0).map(|(k, _)| *k);
    Ok(DriftReport {
        policy: *policy,
        grid: DriftGrid {
            radii,
            ..grid.clone()
        },
        shells,
        sup_outside,
        radius,
        verdict: if radius.is_some() { Verdict::Confirmed } else { Verdict::Violated },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{Gaussian, GenGaussian, StudentT};
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn angle_norm_examples() {
        assert_relative_eq!(angle_norm(2), 1.0 / PI, epsilon = 1e-14);
        assert_relative_eq!(angle_norm(3), 0.5, epsilon = 1e-14);
        let direct = adaptive(|t: f64| t.sin().powi(8), 0.0, PI, 1e-15, 1e-14).value;
        assert!((angle_norm(10) * direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn angular_integral_examples() {
        for d in [2, 3, 7, 20] {
            assert!((angular_integral(0.0, d) - 0.5).abs() < 1e-10);
        }
        let exact = 2.0 * (1.0 + 2f64.sqrt()).ln() / (2f64.sqrt() * PI);
        assert!((angular_integral(1.0, 2) - exact).abs() < 1e-10);
        let mut prev = angular_integral(0.0, 3);
        for u in 1..=100 {
            let f = angular_integral(u as f64, 3);
            assert!(f < prev);
            prev = f;
        }
    }

    #[test]
    fn threshold_solves_its_equation() {
        let mut prev = 0.0;
        for d in 2..=10 {
            assert!(angular_integral(C_D_UPPER, d) < 0.25);
            let c = c_d(d);
            let f = angular_integral(c, d);
            assert!(f <= 0.25 && f > 0.25 - 1e-9, "d={d}: F={f}");
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn gamma_constant() {
        assert!((gamma_d(2) - 0.834627).abs() < 1e-6);
        for d in 2..=30 {
            assert!(gamma_d(d) > 0.0);
        }
    }

    #[test]
    fn lyapunov_examples() {
        let g = Gaussian::isotropic(2);
        assert_relative_eq!(lyapunov(&g, &RefreshPolicy::constant(4.0), &v(&[0.0, 0.0]), &v(&[0.6, 0.8])).unwrap(), 0.5);
        // U = 2 and <grad U, -v> = -2 is clipped, so V = e^{1}
        assert_relative_eq!(
            lyapunov(&g, &RefreshPolicy::constant(1.0), &v(&[2.0, 0.0]), &v(&[1.0, 0.0])).unwrap(),
            std::f64::consts::E,
            epsilon = 1e-14
        );
        // continuity across <grad U, v> = 0
        let x = v(&[1.5, -0.5]);
        let gdir = x.normalize();
        let side = perpendicular(&gdir);
        let at = |t: f64| lyapunov(&g, &RefreshPolicy::constant(1.0), &x, &(&side * t.cos() + &gdir * t.sin())).unwrap();
        assert!((at(1e-12) - at(-1e-12)).abs() < 1e-9);
    }

    /// Generator oracle for d = 2: one-sided difference quotient of `V` along
    /// the ray, plus the jump terms with the refresh average done by brute
    /// force over the circle.
    fn generator_oracle<T: Target + ?Sized>(target: &T, policy: &RefreshPolicy, x: &Vector, w: &Vector) -> f64 {
        let lv = |y: &Vector, u: &Vector| log_lyapunov(target, policy, y, u).unwrap();
        let base = lv(x, w);
        let h = 1e-6;
        let transport = ((lv(&(x + w * h), w) - base).exp() - 1.0) / h;
        let g = target.grad(x).unwrap().value;
        let lam = refresh_rate(policy, target, x);
        let bounce = g.dot(w).max(0.0) * ((lv(x, &crate::bps::reflect(&g, w).unwrap()) - base).exp() - 1.0);
        let avg = adaptive(
            |a: f64| (lv(x, &v(&[a.cos(), a.sin()])) - base).exp(),
            0.0,
            2.0 * PI,
            1e-13,
            1e-12,
        )
        .value
            / (2.0 * PI);
        2.0 * (transport + bounce + lam * (avg - 1.0))
    }

    fn refresh_rate<T: Target + ?Sized>(policy: &RefreshPolicy, target: &T, x: &Vector) -> f64 {
        crate::bps::refresh_rate(policy, target, x).unwrap()
    }

    #[test]
    fn drift_ratio_matches_generator_oracle() {
        let policies = [RefreshPolicy::constant(2.0), RefreshPolicy::position_dependent(1.0, 0.5)];
        let targets: Vec<Box<dyn Target>> = vec![
            Box::new(Gaussian::isotropic(2)),
            Box::new(GenGaussian::new(2, 4.0).unwrap()),
            Box::new(StudentT::new(2, 3.0).unwrap()),
        ];
        for target in &targets {
            for policy in &policies {
                for (x, ang) in [((1.3, 0.4), 0.3), ((2.0, -1.0), 2.0), ((0.4, 0.2), 1.2), ((3.0, 2.0), -2.5)] {
                    let x = v(&[x.0, x.1]);
                    let w = v(&[f64::cos(ang), f64::sin(ang)]);
                    let exact = drift_ratio(target.as_ref(), policy, &x, &w).unwrap();
                    let oracle = generator_oracle(target.as_ref(), policy, &x, &w);
                    assert!(
                        (exact - oracle).abs() < 1e-4 * (1.0 + exact.abs()),
                        "{target:?} {policy:?} x={x} v={w}: {exact} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_rate_case_matches_one_sided_oracle() {
        let target = GenGaussian::new(2, 4.0).unwrap();
        let x = v(&[1.2, 0.0]);
        let w = v(&[0.0, 1.0]);
        for policy in [RefreshPolicy::constant(3.0), RefreshPolicy::position_dependent(1.0, 0.5)] {
            let exact = drift_ratio(&target, &policy, &x, &w).unwrap();
            let oracle = generator_oracle(&target, &policy, &x, &w);
            assert!((exact - oracle).abs() < 1e-4 * (1.0 + exact.abs()), "{exact} vs {oracle}");
        }
    }

    #[test]
    fn gaussian_far_field_examples() {
        let g = Gaussian::isotropic(2);
        let x = v(&[100.0, 0.0]);
        let zero_rate = drift_ratio_constant(&g, 10.0, &x, &v(&[0.0, 1.0])).unwrap();
        let oracle = -(0.0 / 10.0 + 10.0 - 20.0 * angular_integral(10.0, 2));
        assert_relative_eq!(zero_rate, oracle, epsilon = 1e-12);
        assert!(zero_rate < 0.0);
        assert!(drift_ratio_constant(&g, 10.0, &x, &v(&[1.0, 0.0])).unwrap() < 0.0);
        // only <grad U, v> and v' H v matter
        let a = drift_ratio_constant(&g, 10.0, &v(&[3.0, 4.0]), &v(&[0.6, 0.8])).unwrap();
        let b = drift_ratio_constant(&g, 10.0, &v(&[5.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn varying_refresh_examples() {
        let t = GenGaussian::new(2, 4.0).unwrap();
        let policy = RefreshPolicy::position_dependent(1.0, 0.5);
        let x = v(&[50.0, 0.0]);
        for ang in [0.0, 0.5, PI / 2.0, 2.0, PI] {
            assert!(drift_ratio_varying(&t, &policy, &x, &v(&[f64::cos(ang), f64::sin(ang)])).unwrap() < 0.0);
        }
        // rate continuity across |x| = 1
        let below = refresh_rate(&policy, &t, &v(&[1.0 - 1e-12, 0.0]));
        let above = refresh_rate(&policy, &t, &v(&[1.0 + 1e-12, 0.0]));
        assert!((below - above).abs() < 1e-9);
        assert!(drift_ratio_varying(&t, &RefreshPolicy::constant(1.0), &x, &v(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn refresh_gradient_matches_finite_differences() {
        let t = GenGaussian::new(3, 3.0).unwrap();
        let policy = RefreshPolicy::position_dependent(1.0, 0.5);
        for x in [v(&[2.0, -1.0, 0.5]), v(&[0.3, 0.2, -0.1]), v(&[10.0, 3.0, 1.0])] {
            let grad = t.grad(&x).unwrap().value;
            let (_, analytic) = refresh_rate_and_gradient(&policy, &grad, &t.hessian(&x).unwrap(), &x);
            let h = 1e-6 * (1.0 + x.norm());
            let fd = Vector::from_iterator(3, (0..3).map(|i| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                (refresh_rate(&policy, &t, &xp) - refresh_rate(&policy, &t, &xm)) / (2.0 * h)
            }));
            assert!((&analytic - &fd).norm() < 1e-4 * analytic.norm(), "{analytic} vs {fd}");
        }
    }

    #[test]
    fn sphere_directions_are_unit_and_spread() {
        for d in [2, 3, 4, 7] {
            let dirs = sphere_directions(d, 64);
            assert_eq!(dirs.len(), 64);
            let mean = dirs.iter().fold(Vector::zeros(d), |acc, u| acc + u) / 64.0;
            for u in &dirs {
                assert!((u.norm() - 1.0).abs() < 1e-12);
            }
            assert!(mean.norm() < 0.25, "d={d}: {}", mean.norm());
        }
        assert_eq!(sphere_directions(5, 10), sphere_directions(5, 10));
    }

    #[test]
    fn sweep_verdicts() {
        let grid = DriftGrid::new(vec![20.0, 50.0, 100.0], 8, 33);
        let gauss = verify_drift(&Gaussian::isotropic(2), &RefreshPolicy::constant(10.0), &grid).unwrap();
        assert_eq!(gauss.verdict, Verdict::Confirmed);
        assert!(gauss.radius.unwrap() <= 50.0);
        let thin = GenGaussian::new(2, 4.0).unwrap();
        let bad = verify_drift(&thin, &RefreshPolicy::constant(10.0), &grid).unwrap();
        assert_eq!(bad.verdict, Verdict::Violated);
        assert!(bad.shells.last().unwrap().worst.ratio >= 0.0);
        let good = verify_drift(&thin, &RefreshPolicy::position_dependent(1.0, 0.5), &grid).unwrap();
        assert_eq!(good.verdict, Verdict::Confirmed);
        assert!(gauss.table().contains("confirmed"));
        assert!(verify_drift(&thin, &RefreshPolicy::constant(1.0), &DriftGrid::new(vec![], 4, 4)).is_err());
    }
}
