//! Gauss-Legendre rules on `[-1, 1]` and their tensor products over
//! rectangular apertures.
//!
//! Every aperture integral in the crate goes through a [`QuadGrid`]. Grid
//! points are flattened row-major: node `(m, n)` (x index `m`, y index `n`)
//! lives at index `m * order + n`. Sampled matrices downstream inherit this
//! ordering.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::Point3;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITERS: usize = 100;

/// One-dimensional Gauss-Legendre rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule1D {
    pub order: usize,
    /// Strictly increasing, symmetric about zero.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule1D {
    /// Integrates `f` over `[-1, 1]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Evaluates `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
        p_prev = p;
        p = next;
    }
    let n = n as f64;
    let dp = n * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Gauss-Legendre nodes and weights of the given order.
///
/// Roots are found by Newton iteration from the Tricomi initial guess; only
/// the non-negative half is computed and mirrored so that the rule is
/// exactly symmetric.
pub fn legendre_rule(order: usize) -> Result<QuadRule1D> {
    if order == 0 {
        return Err(invalid("quadrature order must be at least 1"));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // i-th largest root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..NEWTON_MAX_ITERS {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        let hi = n - 1 - i;
        if hi == i {
            // middle node of an odd rule
            nodes[i] = 0.0;
            weights[i] = w;
        } else {
            nodes[hi] = x;
            nodes[i] = -x;
            weights[hi] = w;
            weights[i] = w;
        }
    }
    Ok(QuadRule1D {
        order,
        nodes,
        weights,
    })
}

/// Tensor-product Gauss-Legendre grid over an axis-aligned rectangle lying in
/// a plane of constant z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadGrid {
    pub points: Vec<Point3>,
    pub combined_weights: Vec<f64>,
    pub aperture_area: f64,
}

impl QuadGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weighted sum of `samples` over the grid.
    pub fn integrate(&self, samples: &[Complex64]) -> Result<Complex64> {
        integrate(self, samples)
    }
}

/// `order x order` grid centred at `center`, spanning `lx` by `ly`.
pub fn tensor_grid(center: Point3, lx: f64, ly: f64, order: usize) -> Result<QuadGrid> {
    if !(lx > 0.0 && ly > 0.0) {
        return Err(invalid(format!(
            "aperture side lengths must be positive (got {lx} x {ly})"
        )));
    }
    let rule = legendre_rule(order)?;
    Ok(tensor_grid_from_rule(center, lx, ly, &rule))
}

pub(crate) fn tensor_grid_from_rule(center: Point3, lx: f64, ly: f64, rule: &QuadRule1D) -> QuadGrid {
    let area = lx * ly;
    let n = rule.order;
    let mut points = Vec::with_capacity(n * n);
    let mut combined_weights = Vec::with_capacity(n * n);
    for m in 0..n {
        for k in 0..n {
            points.push([
                center[0] + rule.nodes[m] * lx / 2.0,
                center[1] + rule.nodes[k] * ly / 2.0,
                center[2],
            ]);
            combined_weights.push(rule.weights[m] * rule.weights[k] * area / 4.0);
        }
    }
    QuadGrid {
        points,
        combined_weights,
        aperture_area: area,
    }
}

/// `sum_i w_i * samples[i]`.
pub fn integrate(grid: &QuadGrid, samples: &[Complex64]) -> Result<Complex64> {
    if samples.len() != grid.len() {
        return Err(invalid(format!(
            "expected {} samples, got {}",
            grid.len(),
            samples.len()
        )));
    }
    Ok(grid
        .combined_weights
        .iter()
        .zip(samples)
        .map(|(&w, &s)| s * w)
        .sum())
}
