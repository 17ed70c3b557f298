//! Gauss-Legendre rules on arbitrary intervals and a globally adaptive
//! bisection driver built on them.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre as LegendreRule;

/// A fixed-order Gauss-Legendre rule, stored as node/weight pairs on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pairs: Vec<(f64, f64)>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(2)).expect("order >= 2");
        let rule = LegendreRule::new(order);
        Self {
            pairs: rule.as_node_weight_pairs().to_vec(),
        }
    }

    pub fn order(&self) -> usize {
        self.pairs.len()
    }

    /// Nodes mapped onto [a, b] together with their scaled weights.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.pairs.iter().map(move |&(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

const ADAPTIVE_ORDER: usize = 20;
const MAX_DEPTH: usize = 60;

/// Adaptive Gauss-Legendre on [a, b]: each panel is compared against the sum
/// over its two halves and split until `|coarse - fine| <= max(abs_tol, rel_tol |I|)`
/// scaled to the panel width.
pub fn adaptive<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    let rule = GaussLegendre::new(ADAPTIVE_ORDER);
    adaptive_with(&rule, f, a, b, abs_tol, rel_tol)
}

pub fn adaptive_with<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Integral {
    if a == b {
        return Integral {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let width = b - a;
    let whole = rule.integrate(a, b, &mut f);
    // explicit stack keeps evaluation order deterministic
    let mut stack = vec![(a, b, whole, 0usize)];
    let mut value = 0.0;
    let mut error = 0.0;
    let mut converged = true;
    let scale = whole.abs();
    while let Some((lo, hi, coarse, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(lo, mid, &mut f);
        let right = rule.integrate(mid, hi, &mut f);
        let fine = left + right;
        let diff = (fine - coarse).abs();
        let share = (hi - lo) / width;
        let tol = abs_tol.max(rel_tol * scale.max(fine.abs())) * share;
        if diff <= tol || depth >= MAX_DEPTH || (hi - lo) <= f64::EPSILON * width {
            if diff > tol {
                converged = false;
            }
            value += fine;
            error += diff;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    Integral {
        value,
        error,
        converged,
    }
}
