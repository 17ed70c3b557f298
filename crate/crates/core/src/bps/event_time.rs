//! First-arrival times of the inhomogeneous Poisson process driving the sampler.
//!
//! Three strategies, picked from the target's capabilities unless overridden:
//! closed-form inversion for affine directional rates, thinning against the
//! right endpoint of a window for convex potentials, and thinning against a
//! piecewise-constant bound built from an inflated rate grid for everything else.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::RefreshPolicy;
use crate::error::{Error, Result};
use crate::targets::Target;
use crate::Vector;

/// Outcome of an event-time draw: the time and the rates at `x + tau v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventTime {
    pub tau: f64,
    pub total_rate: f64,
    pub bounce_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventTimeMethod {
    /// Choose the cheapest exact method the target supports.
    #[default]
    Auto,
    ExactAffine,
    MonotoneThinning,
    GridThinning,
}

/// Settings for the general-purpose thinning sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridThinning {
    pub points: usize,
    pub safety: f64,
    pub min_window: f64,
    pub max_window: f64,
}

impl Default for GridThinning {
    fn default() -> Self {
        Self {
            points: 32,
            safety: 1.5,
            min_window: 0.1,
            max_window: 1.0,
        }
    }
}

const MONOTONE_MIN_WINDOW: f64 = 0.1;

fn violation_threshold(bound: f64) -> f64 {
    bound * (1.0 + 1e-9) + 1e-12
}

/// Solves `Lambda(t) = e` for `Lambda(t) = lambda t + int_0^t (a + b s)_+ ds`.
pub fn invert_affine_rate(a: f64, b: f64, lambda: f64, e: f64) -> f64 {
    // time for a linear-plus-quadratic cumulative rate c t + b t^2 / 2 to reach e, with c + b t >= 0
    let quadratic = |c: f64, e: f64| -> f64 {
        if b == 0.0 {
            return if c > 0.0 { e / c } else { f64::INFINITY };
        }
        let disc = c * c + 2.0 * b * e;
        if disc < 0.0 {
            return f64::INFINITY;
        }
        2.0 * e / (c + disc.sqrt())
    };

    if b >= 0.0 {
        if a >= 0.0 {
            return quadratic(lambda + a, e);
        }
        if b == 0.0 {
            return e / lambda;
        }
        let t0 = -a / b;
        if lambda * t0 >= e {
            return e / lambda;
        }
        return t0 + quadratic(lambda, e - lambda * t0);
    }

    // decreasing rate: the bounce part switches off at t1 = a / |b|
    if a <= 0.0 {
        return e / lambda;
    }
    let t1 = a / -b;
    let c = lambda + a;
    let at_t1 = c * t1 + 0.5 * b * t1 * t1;
    if at_t1 >= e {
        quadratic(c, e)
    } else {
        t1 + (e - at_t1) / lambda
    }
}

struct Ray<'a, T: Target + ?Sized> {
    target: &'a T,
    policy: &'a RefreshPolicy,
    x: &'a Vector,
    v: &'a Vector,
}

impl<T: Target + ?Sized> Ray<'_, T> {
    /// `(total, bounce)` rates at `x + t v`.
    fn rates(&self, t: f64) -> Result<(f64, f64)> {
        let y = self.x + self.v * t;
        let g = self.target.grad(&y)?.value;
        let bounce = g.dot(self.v).max(0.0);
        Ok((self.policy.rate_with_grad_norm(&y, g.norm()) + bounce, bounce))
    }

    fn event(&self, tau: f64) -> Result<EventTime> {
        let (total_rate, bounce_rate) = self.rates(tau)?;
        Ok(EventTime {
            tau,
            total_rate,
            bounce_rate,
        })
    }

    /// Thinning on `[start, end]` against a constant `bound`. Returns `None`
    /// when no proposal is accepted before `end`.
    fn thin_window<R: Rng + ?Sized>(&self, start: f64, end: f64, bound: f64, rng: &mut R) -> Result<Option<EventTime>> {
        let limit = violation_threshold(bound);
        let mut t = start;
        loop {
            let e: f64 = rng.sample(Exp1);
            t += e / bound;
            if t > end {
                return Ok(None);
            }
            let (total, bounce) = self.rates(t)?;
            if total > limit {
                return Err(Error::BoundViolation {
                    window_start: start,
                    window_end: end,
                    at: t,
                    bound,
                    observed: total,
                });
            }
            let u: f64 = rng.random();
            if u * bound < total {
                return Ok(Some(EventTime {
                    tau: t,
                    total_rate: total,
                    bounce_rate: bounce,
                }));
            }
        }
    }

    /// Extra grid points around the closest approach of the line to the
    /// origin, where radial potentials with a cusp concentrate their rate.
    fn refinement_points(&self, start: f64, end: f64) -> impl Iterator<Item = f64> {
        let t_star = -self.x.dot(self.v);
        let gap = (self.x + self.v * t_star).norm().max(1e-12 * (1.0 + self.x.norm()));
        std::iter::once(t_star)
            .chain((-8..=24).flat_map(move |k| {
                let s = gap * 2f64.powf(0.5 * k as f64);
                [t_star - s, t_star + s]
            }))
            .filter(move |t| (start..=end).contains(t))
    }
}

pub(super) fn sample<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    policy: &RefreshPolicy,
    method: EventTimeMethod,
    grid: &GridThinning,
    x: &Vector,
    v: &Vector,
    rng: &mut R,
) -> Result<EventTime> {
    target.check_dim(x)?;
    target.check_dim(v)?;
    let caps = target.capabilities();
    let method = match method {
        EventTimeMethod::Auto if caps.affine_directional_rate && policy.is_constant() => EventTimeMethod::ExactAffine,
        EventTimeMethod::Auto if caps.convex && policy.is_constant() => EventTimeMethod::MonotoneThinning,
        EventTimeMethod::Auto => EventTimeMethod::GridThinning,
        m => m,
    };
    let ray = Ray { target, policy, x, v };
    match method {
        EventTimeMethod::ExactAffine => {
            let (a, b) = match (target.affine_rate(x, v), policy) {
                (Some(ab), RefreshPolicy::Constant { .. }) => ab,
                _ => {
                    return Err(Error::Unsupported(
                        "exact inversion needs an affine directional rate and constant refreshment".into(),
                    ))
                }
            };
            let e: f64 = rng.sample(Exp1);
            ray.event(invert_affine_rate(a, b, policy.lambda_ref(), e))
        }
        EventTimeMethod::MonotoneThinning => {
            if !(caps.convex && policy.is_constant()) {
                return Err(Error::Unsupported(
                    "monotone thinning needs a convex target and constant refreshment".into(),
                ));
            }
            let lambda = policy.lambda_ref();
            let mut start = 0.0;
            loop {
                let (here, _) = ray.rates(start)?;
                let end = start + (1.0 / here).max(MONOTONE_MIN_WINDOW);
                let bound = lambda + target.directional_rate(x, v, end)?.max(0.0);
                if let Some(et) = ray.thin_window(start, end, bound, rng)? {
                    return Ok(et);
                }
                start = end;
            }
        }
        EventTimeMethod::GridThinning => {
            let n = grid.points.max(2);
            let mut start = 0.0;
            loop {
                let (here, _) = ray.rates(start)?;
                let width = (1.0 / here).clamp(grid.min_window, grid.max_window);
                let end = start + width;
                let mut points: Vec<f64> = (0..n)
                    .map(|i| start + width * i as f64 / (n - 1) as f64)
                    .chain(ray.refinement_points(start, end))
                    .collect();
                points.sort_by(f64::total_cmp);
                points.dedup();
                let rates = points.iter().map(|&t| Ok(ray.rates(t)?.0)).collect::<Result<Vec<f64>>>()?;
                // each cell is bounded by its own endpoints and one neighbour on either side
                for i in 0..points.len() - 1 {
                    let lo = i.saturating_sub(1);
                    let hi = (i + 2).min(points.len() - 1);
                    let peak = rates[lo..=hi].iter().fold(0.0f64, |m, r| m.max(*r));
                    if let Some(et) = ray.thin_window(points[i], points[i + 1], grid.safety * peak, rng)? {
                        return Ok(et);
                    }
                }
                start = end;
            }
        }
        EventTimeMethod::Auto => unreachable!("resolved above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use crate::targets::{Gaussian, GenGaussian, StudentT};
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    /// Numerical cumulative rate by fine trapezoid, as an inversion oracle.
    fn cumulative(a: f64, b: f64, lambda: f64, t: f64) -> f64 {
        let n = 200_000;
        let h = t / n as f64;
        (0..n)
            .map(|i| {
                let s0 = i as f64 * h;
                let s1 = s0 + h;
                0.5 * h * ((a + b * s0).max(0.0) + (a + b * s1).max(0.0)) + lambda * h
            })
            .sum()
    }

    #[test]
    fn affine_inversion_examples() {
        // orthogonal start: t^2/2 + t = 1.5
        assert_relative_eq!(invert_affine_rate(0.0, 1.0, 1.0, 1.5), 1.0, epsilon = 1e-14);
        // moving inward: only refreshment is active before t = 10
        assert_relative_eq!(invert_affine_rate(-10.0, 1.0, 1.0, 0.5), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn affine_inversion_matches_numerical_cumulative_rate() {
        for &(a, b, lambda, e) in &[
            (1.3, 0.7, 0.5, 2.0),
            (-2.0, 0.5, 0.2, 1.7),
            (-0.1, 3.0, 1.0, 0.01),
            (2.0, -1.0, 0.5, 1.0),
            (2.0, -1.0, 0.5, 5.0),
            (0.4, 0.0, 1.0, 3.0),
        ] {
            let t = invert_affine_rate(a, b, lambda, e);
            assert!((cumulative(a, b, lambda, t) - e).abs() < 1e-6, "{a} {b} {lambda} {e}: {t}");
        }
    }

    #[test]
    fn methods_refuse_unsupported_configurations() {
        let target = StudentT::new(2, 3.0).unwrap();
        let policy = RefreshPolicy::constant(1.0);
        let mut rng = chain_rng(0, 0);
        let grid = GridThinning::default();
        for m in [EventTimeMethod::ExactAffine, EventTimeMethod::MonotoneThinning] {
            let r = sample(&target, &policy, m, &grid, &v(&[1.0, 0.0]), &v(&[1.0, 0.0]), &mut rng);
            assert!(matches!(r, Err(Error::Unsupported(_))));
        }
    }

    #[test]
    fn undersized_bound_is_reported() {
        let target = GenGaussian::new(2, 4.0).unwrap();
        let policy = RefreshPolicy::constant(1.0);
        let grid = GridThinning {
            safety: 0.01,
            ..GridThinning::default()
        };
        let mut rng = chain_rng(0, 0);
        let r = sample(&target, &policy, EventTimeMethod::GridThinning, &grid, &v(&[3.0, 0.0]), &v(&[1.0, 0.0]), &mut rng);
        assert!(matches!(r, Err(Error::BoundViolation { .. })), "{r:?}");
    }

    #[test]
    fn returned_rates_are_evaluated_at_the_event() {
        let target = Gaussian::isotropic(2);
        let policy = RefreshPolicy::constant(0.5);
        let mut rng = chain_rng(4, 0);
        let x = v(&[1.0, 2.0]);
        let w = v(&[0.6, 0.8]);
        for method in [EventTimeMethod::ExactAffine, EventTimeMethod::MonotoneThinning, EventTimeMethod::GridThinning] {
            let et = sample(&target, &policy, method, &GridThinning::default(), &x, &w, &mut rng).unwrap();
            let y = &x + &w * et.tau;
            assert_relative_eq!(et.bounce_rate, y.dot(&w).max(0.0), epsilon = 1e-12);
            assert_relative_eq!(et.total_rate, 0.5 + et.bounce_rate, epsilon = 1e-12);
        }
    }

    #[test]
    fn mean_event_time_agrees_across_methods() {
        let target = Gaussian::isotropic(2);
        let policy = RefreshPolicy::constant(1.0);
        let x = v(&[0.5, -1.0]);
        let w = v(&[0.0, 1.0]);
        let n = 20_000;
        let mean = |m: EventTimeMethod, seed: u64| {
            let mut rng = chain_rng(seed, 0);
            (0..n)
                .map(|_| sample(&target, &policy, m, &GridThinning::default(), &x, &w, &mut rng).unwrap().tau)
                .sum::<f64>()
                / n as f64
        };
        let exact = mean(EventTimeMethod::ExactAffine, 1);
        for m in [EventTimeMethod::MonotoneThinning, EventTimeMethod::GridThinning] {
            assert!((mean(m, 2) - exact).abs() < 0.03, "{m:?}");
        }
    }

    #[test]
    fn cusp_crossing_does_not_trip_the_bound() {
        let target = GenGaussian::new(2, 0.5).unwrap();
        let policy = RefreshPolicy::constant(1.0);
        let mut rng = chain_rng(8, 0);
        for k in 0..200 {
            let off = 10f64.powi(-(k % 10)) * 0.3;
            let x = v(&[-1.0, off]);
            let w = v(&[1.0, 0.0]);
            sample(&target, &policy, EventTimeMethod::Auto, &GridThinning::default(), &x, &w, &mut rng).unwrap();
        }
    }
}
