//! Potential functions `U` with `pi(x) ∝ exp(-U(x))` and the built-in target families.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// What a target can do beyond evaluating `U` and its gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub has_hessian: bool,
    /// `U` is convex, so `t -> <grad U(x + t v), v>` is nondecreasing.
    pub convex: bool,
    /// `<grad U(x + t v), v> = a + b t` along every ray.
    pub affine_directional_rate: bool,
}

/// Gradient value; `degenerate` marks a point where the gradient is undefined
/// and the zero vector was returned by convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub value: Vector,
    pub degenerate: bool,
}

impl Gradient {
    fn regular(value: Vector) -> Self {
        Self {
            value,
            degenerate: false,
        }
    }
}

/// A potential on `R^d`, `d >= 2`.
pub trait Target: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn capabilities(&self) -> Capabilities;

    /// Radii where second derivatives may jump.
    fn nonsmooth_radii(&self) -> Vec<f64> {
        Vec::new()
    }

    fn potential(&self, x: &Vector) -> Result<f64>;

    fn grad(&self, x: &Vector) -> Result<Gradient>;

    fn hessian(&self, _x: &Vector) -> Result<Matrix> {
        Err(Error::Unsupported("analytic Hessian".into()))
    }

    /// Coefficients `(a, b)` with `<grad U(x + t v), v> = a + b t`, when the rate is affine.
    fn affine_rate(&self, _x: &Vector, _v: &Vector) -> Option<(f64, f64)> {
        None
    }

    /// `<grad U(x + t v), v>`.
    fn directional_rate(&self, x: &Vector, v: &Vector, t: f64) -> Result<f64> {
        if let Some((a, b)) = self.affine_rate(x, v) {
            return Ok(a + b * t);
        }
        let y = x + v * t;
        Ok(self.grad(&y)?.value.dot(v))
    }

    /// Whether the potential is radially symmetric about the origin.
    fn is_isotropic(&self) -> bool {
        false
    }

    /// `s phi'(s)` for radial potentials `U(x) = phi(|x|)`. Unlike the
    /// gradient it can be evaluated at `s = inf` for thick-tailed families.
    fn radial_elasticity(&self, _s: f64) -> Option<f64> {
        None
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Central finite-difference Hessian of `grad` with step `1e-4 (1 + |x|)`, symmetrised.
pub fn finite_difference_hessian<T: Target + ?Sized>(target: &T, x: &Vector) -> Result<Matrix> {
    let d = target.dim();
    target.check_dim(x)?;
    let h = 1e-4 * (1.0 + x.norm());
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let gp = target.grad(&xp)?.value;
        let gm = target.grad(&xm)?.value;
        for j in 0..d {
            m[(i, j)] = (gp[j] - gm[j]) / (2.0 * h);
        }
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Analytic Hessian when available, finite differences otherwise.
pub fn hessian_or_fd<T: Target + ?Sized>(target: &T, x: &Vector) -> Result<Matrix> {
    if target.capabilities().has_hessian {
        match target.hessian(x) {
            Ok(h) => return Ok(h),
            Err(Error::Unsupported(_)) => {}
            Err(e) => return Err(e),
        }
    }
    finite_difference_hessian(target, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    GenGaussian,
    StudentT,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetParameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance_diagonal: Option<Vec<f64>>,
}

/// Structured description of a built-in target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub family: Family,
    pub dimension: usize,
    #[serde(default)]
    pub parameters: TargetParameters,
}

impl TargetConfig {
    pub fn gaussian(dimension: usize) -> Self {
        Self {
            family: Family::Gaussian,
            dimension,
            parameters: TargetParameters::default(),
        }
    }

    pub fn gen_gaussian(dimension: usize, beta: f64) -> Self {
        Self {
            family: Family::GenGaussian,
            dimension,
            parameters: TargetParameters {
                beta: Some(beta),
                ..Default::default()
            },
        }
    }

    pub fn student_t(dimension: usize, k: f64) -> Self {
        Self {
            family: Family::StudentT,
            dimension,
            parameters: TargetParameters {
                k: Some(k),
                ..Default::default()
            },
        }
    }

    pub fn build(&self) -> Result<BuiltinTarget> {
        let d = self.dimension;
        if d < 2 {
            return Err(Error::Config(format!("dimension must be >= 2, got {d}")));
        }
        let p = &self.parameters;
        let stray = |name: &str| Error::Config(format!("parameter `{name}` does not apply to {:?}", self.family));
        match self.family {
            Family::Gaussian => {
                if p.beta.is_some() {
                    return Err(stray("beta"));
                }
                if p.k.is_some() {
                    return Err(stray("k"));
                }
                let variances = match &p.covariance_diagonal {
                    Some(c) => {
                        if c.len() != d {
                            return Err(Error::Config(format!(
                                "covariance_diagonal has {} entries, dimension is {d}",
                                c.len()
                            )));
                        }
                        if c.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
                            return Err(Error::Config("covariance_diagonal entries must be positive".into()));
                        }
                        c.clone()
                    }
                    None => vec![1.0; d],
                };
                Ok(BuiltinTarget::Gaussian(Gaussian::with_variances(variances)))
            }
            Family::GenGaussian => {
                if p.k.is_some() {
                    return Err(stray("k"));
                }
                if p.covariance_diagonal.is_some() {
                    return Err(stray("covariance_diagonal"));
                }
                let beta = p
                    .beta
                    .ok_or_else(|| Error::Config("gen_gaussian requires `beta`".into()))?;
                Ok(BuiltinTarget::GenGaussian(GenGaussian::new(d, beta)?))
            }
            Family::StudentT => {
                if p.beta.is_some() {
                    return Err(stray("beta"));
                }
                if p.covariance_diagonal.is_some() {
                    return Err(stray("covariance_diagonal"));
                }
                let k = p.k.ok_or_else(|| Error::Config("student_t requires `k`".into()))?;
                Ok(BuiltinTarget::StudentT(StudentT::new(d, k)?))
            }
        }
    }
}

/// Axis-aligned Gaussian, `U(x) = sum_i x_i^2 / (2 s_i^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    precision: Vec<f64>,
    variances: Vec<f64>,
}

impl Gaussian {
    pub fn isotropic(d: usize) -> Self {
        Self::with_variances(vec![1.0; d])
    }

    pub fn with_variances(variances: Vec<f64>) -> Self {
        let precision = variances.iter().map(|s| 1.0 / s).collect();
        Self { precision, variances }
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
}

impl Target for Gaussian {
    fn dim(&self) -> usize {
        self.precision.len()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_hessian: true,
            convex: true,
            affine_directional_rate: true,
        }
    }

    fn potential(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(0.5 * x.iter().zip(&self.precision).map(|(xi, p)| p * xi * xi).sum::<f64>())
    }

    fn grad(&self, x: &Vector) -> Result<Gradient> {
        self.check_dim(x)?;
        Ok(Gradient::regular(Vector::from_iterator(
            x.len(),
            x.iter().zip(&self.precision).map(|(xi, p)| p * xi),
        )))
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        self.check_dim(x)?;
        Ok(Matrix::from_diagonal(&Vector::from_vec(self.precision.clone())))
    }

    fn affine_rate(&self, x: &Vector, v: &Vector) -> Option<(f64, f64)> {
        let mut a = 0.0;
        let mut b = 0.0;
        for ((xi, vi), p) in x.iter().zip(v.iter()).zip(&self.precision) {
            a += p * xi * vi;
            b += p * vi * vi;
        }
        Some((a, b))
    }

    fn is_isotropic(&self) -> bool {
        self.precision.iter().all(|&p| p == self.precision[0])
    }

    fn radial_elasticity(&self, s: f64) -> Option<f64> {
        self.is_isotropic().then(|| self.precision[0] * s * s)
    }
}

/// Generalised Gaussian, `U(x) = |x|^beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenGaussian {
    d: usize,
    beta: f64,
}

impl GenGaussian {
    pub fn new(d: usize, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { d, beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Target for GenGaussian {
    fn dim(&self) -> usize {
        self.d
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_hessian: true,
            convex: self.beta >= 1.0,
            affine_directional_rate: false,
        }
    }

    fn potential(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(x.norm().powf(self.beta))
    }

    fn grad(&self, x: &Vector) -> Result<Gradient> {
        self.check_dim(x)?;
        let r = x.norm();
        if r == 0.0 {
            return Ok(Gradient {
                value: Vector::zeros(self.d),
                degenerate: self.beta < 2.0,
            });
        }
        Ok(Gradient::regular(x * (self.beta * r.powf(self.beta - 2.0))))
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        self.check_dim(x)?;
        let b = self.beta;
        let r = x.norm();
        if r == 0.0 {
            return if b == 2.0 {
                Ok(Matrix::identity(self.d, self.d) * 2.0)
            } else if b > 2.0 {
                Ok(Matrix::zeros(self.d, self.d))
            } else {
                Err(Error::Singular("Hessian of |x|^beta"))
            };
        }
        let id = Matrix::identity(self.d, self.d) * (b * r.powf(b - 2.0));
        Ok(id + (x * x.transpose()) * (b * (b - 2.0) * r.powf(b - 4.0)))
    }

    fn is_isotropic(&self) -> bool {
        true
    }

    fn radial_elasticity(&self, s: f64) -> Option<f64> {
        Some(self.beta * s.powf(self.beta))
    }
}

/// Multivariate t with `k` degrees of freedom, `U(x) = (k+d)/2 ln(1 + |x|^2/k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentT {
    d: usize,
    k: f64,
}

impl StudentT {
    pub fn new(d: usize, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Config(format!("k must be positive, got {k}")));
        }
        Ok(Self { d, k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

impl Target for StudentT {
    fn dim(&self) -> usize {
        self.d
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_hessian: true,
            convex: false,
            affine_directional_rate: false,
        }
    }

    fn potential(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        let kd = self.k + self.d as f64;
        Ok(0.5 * kd * (x.norm_squared() / self.k).ln_1p())
    }

    fn grad(&self, x: &Vector) -> Result<Gradient> {
        self.check_dim(x)?;
        let kd = self.k + self.d as f64;
        Ok(Gradient::regular(x * (kd / (self.k + x.norm_squared()))))
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        self.check_dim(x)?;
        let kd = self.k + self.d as f64;
        let s = self.k + x.norm_squared();
        Ok(Matrix::identity(self.d, self.d) * (kd / s) - (x * x.transpose()) * (2.0 * kd / (s * s)))
    }

    fn is_isotropic(&self) -> bool {
        true
    }

    fn radial_elasticity(&self, s: f64) -> Option<f64> {
        Some((self.k + self.d as f64) / (1.0 + self.k / (s * s)))
    }
}

/// One of the built-in families.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinTarget {
    Gaussian(Gaussian),
    GenGaussian(GenGaussian),
    StudentT(StudentT),
}

impl BuiltinTarget {
    pub fn config(&self) -> TargetConfig {
        match self {
            BuiltinTarget::Gaussian(g) => {
                let mut c = TargetConfig::gaussian(g.dim());
                if g.variances.iter().any(|&s| s != 1.0) {
                    c.parameters.covariance_diagonal = Some(g.variances.clone());
                }
                c
            }
            BuiltinTarget::GenGaussian(g) => TargetConfig::gen_gaussian(g.d, g.beta),
            BuiltinTarget::StudentT(t) => TargetConfig::student_t(t.d, t.k),
        }
    }

    fn inner(&self) -> &dyn Target {
        match self {
            BuiltinTarget::Gaussian(t) => t,
            BuiltinTarget::GenGaussian(t) => t,
            BuiltinTarget::StudentT(t) => t,
        }
    }

    /// Student-t targets and generalised Gaussians with `beta < 1`.
    pub fn is_thick_tailed(&self) -> bool {
        match self {
            BuiltinTarget::StudentT(_) => true,
            BuiltinTarget::GenGaussian(g) => g.beta < 1.0,
            BuiltinTarget::Gaussian(_) => false,
        }
    }
}

impl Target for BuiltinTarget {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn capabilities(&self) -> Capabilities {
        self.inner().capabilities()
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
    fn directional_rate(&self, x: &Vector, v: &Vector, t: f64) -> Result<f64> {
        self.inner().directional_rate(x, v, t)
    }
    fn is_isotropic(&self) -> bool {
        self.inner().is_isotropic()
    }

    fn radial_elasticity(&self, s: f64) -> Option<f64> {
        self.inner().radial_elasticity(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn potential_examples() {
        let g = Gaussian::isotropic(2);
        assert_eq!(g.potential(&v(&[3.0, 4.0])).unwrap(), 12.5);
        let gg = GenGaussian::new(2, 1.0).unwrap();
        assert_eq!(gg.potential(&v(&[0.0, 0.0])).unwrap(), 0.0);
        let t = StudentT::new(2, 1.0).unwrap();
        assert_relative_eq!(t.potential(&v(&[1.0, 0.0])).unwrap(), 1.5 * 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn grad_examples() {
        let t = StudentT::new(2, 1.0).unwrap();
        assert_relative_eq!(t.grad(&v(&[1.0, 0.0])).unwrap().value, v(&[1.5, 0.0]));
        let g = Gaussian::isotropic(2);
        assert_eq!(g.grad(&v(&[2.0, -1.0])).unwrap().value, v(&[2.0, -1.0]));
        let gg = GenGaussian::new(2, 0.5).unwrap();
        let at0 = gg.grad(&v(&[0.0, 0.0])).unwrap();
        assert_eq!(at0.value, v(&[0.0, 0.0]));
        assert!(at0.degenerate);
    }

    #[test]
    fn hessian_examples() {
        let g = Gaussian::isotropic(3);
        assert_eq!(g.hessian(&v(&[1.0, 2.0, 3.0])).unwrap(), Matrix::identity(3, 3));
        let t = StudentT::new(2, 1.0).unwrap();
        let h = t.hessian(&v(&[1.0, 0.0])).unwrap();
        // radial entry: 3/2 - 2 * 3 * 1 / 4 = 0
        assert_relative_eq!(h, Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.5]), epsilon = 1e-15);
        assert_relative_eq!(finite_difference_hessian(&t, &v(&[1.0, 0.0])).unwrap(), h, epsilon = 1e-7);
        let gg = GenGaussian::new(2, 4.0).unwrap();
        let h = gg.hessian(&v(&[1.0, 0.0])).unwrap();
        assert_relative_eq!(h, Matrix::from_row_slice(2, 2, &[12.0, 0.0, 0.0, 4.0]), epsilon = 1e-14);
        // finite differences of the gradient agree
        let fd = finite_difference_hessian(&gg, &v(&[1.0, 0.0])).unwrap();
        assert_relative_eq!(fd, h, max_relative = 1e-6);
    }

    #[test]
    fn hessian_singular_at_origin_for_small_beta() {
        let gg = GenGaussian::new(2, 1.5).unwrap();
        assert!(matches!(gg.hessian(&v(&[0.0, 0.0])), Err(Error::Singular(_))));
    }

    #[test]
    fn radial_elasticity_is_x_dot_grad() {
        let x = Vector::from_vec(vec![1.5, -2.0, 0.5]);
        let radial: [Box<dyn Target>; 4] = [
            Box::new(Gaussian::isotropic(3)),
            Box::new(GenGaussian::new(3, 0.5).unwrap()),
            Box::new(GenGaussian::new(3, 3.0).unwrap()),
            Box::new(StudentT::new(3, 2.5).unwrap()),
        ];
        for t in &radial {
            let expected = x.dot(&t.grad(&x).unwrap().value);
            assert_relative_eq!(t.radial_elasticity(x.norm()).unwrap(), expected, max_relative = 1e-12);
        }
        assert_eq!(StudentT::new(2, 4.0).unwrap().radial_elasticity(f64::INFINITY), Some(6.0));
        assert!(Gaussian::with_variances(vec![1.0, 2.0]).radial_elasticity(1.0).is_none());
    }

    #[test]
    fn directional_rate_examples() {
        let g = Gaussian::isotropic(2);
        assert_eq!(g.directional_rate(&v(&[2.0, 0.0]), &v(&[1.0, 0.0]), 3.0).unwrap(), 5.0);
        assert_eq!(g.directional_rate(&v(&[2.0, 0.0]), &v(&[0.0, 1.0]), 0.0).unwrap(), 0.0);
        let gg = GenGaussian::new(2, 1.0).unwrap();
        assert_relative_eq!(gg.directional_rate(&v(&[1.0, 0.0]), &v(&[1.0, 0.0]), 1.0).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = Gaussian::isotropic(2);
        assert!(matches!(
            g.potential(&v(&[1.0, 2.0, 3.0])),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(TargetConfig::gaussian(1).build().is_err());
        assert!(TargetConfig::gen_gaussian(2, -1.0).build().is_err());
        let json = r#"{"family":"student_t","dimension":3,"parameters":{"k":4}}"#;
        let c: TargetConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c.build().unwrap().config(), c);
        let bad = r#"{"family":"cauchy","dimension":3}"#;
        assert!(serde_json::from_str::<TargetConfig>(bad).is_err());
        let mut g = TargetConfig::gaussian(2);
        g.parameters.covariance_diagonal = Some(vec![1.0, 4.0]);
        let built = g.build().unwrap();
        assert_eq!(built.potential(&v(&[2.0, 2.0])).unwrap(), 2.5);
        assert!(!built.is_isotropic());
    }

    fn builtins(d: usize) -> Vec<BuiltinTarget> {
        vec![
            TargetConfig::gaussian(d).build().unwrap(),
            {
                let mut c = TargetConfig::gaussian(d);
                c.parameters.covariance_diagonal = Some((1..=d).map(|i| i as f64).collect());
                c.build().unwrap()
            },
            TargetConfig::gen_gaussian(d, 0.5).build().unwrap(),
            TargetConfig::gen_gaussian(d, 1.0).build().unwrap(),
            TargetConfig::gen_gaussian(d, 4.0).build().unwrap(),
            TargetConfig::student_t(d, 4.0).build().unwrap(),
        ]
    }

    fn point(d: usize) -> impl Strategy<Value = Vector> {
        proptest::collection::vec(-5.0f64..5.0, d)
            .prop_filter("away from the origin", |xs| xs.iter().map(|x| x * x).sum::<f64>() > 0.01)
            .prop_map(Vector::from_vec)
    }

    fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
        (a - b).abs() / scale.max(1e-12)
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(x in point(3)) {
            for t in builtins(3) {
                let g = t.grad(&x).unwrap().value;
                let h = 1e-5 * (1.0 + x.norm());
                for i in 0..3 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (t.potential(&xp).unwrap() - t.potential(&xm).unwrap()) / (2.0 * h);
                    prop_assert!(rel_err(fd, g[i], g.norm()) < 1e-5, "{:?} coord {}: {} vs {}", t, i, fd, g[i]);
                }
            }
        }

        #[test]
        fn hessian_matches_finite_differences(x in point(3)) {
            for t in builtins(3) {
                let h = t.hessian(&x).unwrap();
                let step = 1e-5 * (1.0 + x.norm());
                for i in 0..3 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    let col = (t.grad(&xp).unwrap().value - t.grad(&xm).unwrap().value) / (2.0 * step);
                    for j in 0..3 {
                        prop_assert!(rel_err(col[j], h[(i, j)], h.norm()) < 1e-4);
                    }
                }
            }
        }

        #[test]
        fn convex_rates_are_nondecreasing(
            x in point(3),
            dir in proptest::collection::vec(-1.0f64..1.0, 3).prop_filter("nonzero", |d| d.iter().any(|c| c.abs() > 1e-3)),
        ) {
            let v = Vector::from_vec(dir).normalize();
            for t in builtins(3).into_iter().filter(|t| t.capabilities().convex) {
                let mut prev = f64::NEG_INFINITY;
                for k in 0..100 {
                    let s = -10.0 + 20.0 * k as f64 / 99.0;
                    let r = t.directional_rate(&x, &v, s).unwrap();
                    prop_assert!(r >= prev - 1e-12);
                    prev = r;
                }
            }
        }
    }
}
