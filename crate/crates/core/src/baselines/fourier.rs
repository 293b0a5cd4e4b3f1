//! Beamforming restricted to a truncated 2-D Fourier series on the base
//! station aperture.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::{build_channel_set_with_orders, ChannelSet, SampledLink};
use crate::error::{invalid, CapaError, Result};
use crate::linalg::{scale_rows, CMatrix};
use crate::quadrature::{legendre_rule, QuadGrid};
use crate::scenario::{Aperture, Scenario};
use crate::solver::{evaluate_se, initial_beamformers, transmit_power, SolverConfig, Wmmse};

use super::BaselineRun;

/// Largest quadrature order tried when looking for an exact-enough rule.
const MAX_ORDER: usize = 256;
/// Accepted deviation of the sampled 1-D basis Gram from the identity.
const GRAM_TOL: f64 = 1e-7;

/// `phi_{nx,ny}(s) = exp(j 2 pi (nx x / Lx + ny y / Ly)) / sqrt(A)` in
/// coordinates `(x, y)` relative to the aperture centre, for
/// `|nx|, |ny| <= truncation`. Functions are ordered with `nx` outer.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierBasis {
    pub truncation: usize,
    pub aperture: Aperture,
}

impl FourierBasis {
    pub fn new(aperture: Aperture, truncation: usize) -> Self {
        Self { truncation, aperture }
    }

    /// Number of basis functions, `(2 N + 1)^2`.
    pub fn len(&self) -> usize {
        let side = 2 * self.truncation + 1;
        side * side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Frequency pairs in basis order.
    pub fn frequencies(&self) -> Vec<(i64, i64)> {
        let n = self.truncation as i64;
        (-n..=n).flat_map(|nx| (-n..=n).map(move |ny| (nx, ny))).collect()
    }

    /// Basis functions sampled at `grid`: one row per point, one column per
    /// function.
    pub fn sample(&self, grid: &QuadGrid) -> CMatrix {
        let a = &self.aperture;
        let norm = 1.0 / a.area().sqrt();
        let freqs = self.frequencies();
        CMatrix::from_fn(grid.len(), freqs.len(), |i, f| {
            let p = grid.points[i];
            let (x, y) = (p[0] - a.center[0], p[1] - a.center[1]);
            let (nx, ny) = freqs[f];
            let phase = 2.0 * PI * (nx as f64 * x / a.lx + ny as f64 * y / a.ly);
            Complex64::from_polar(norm, phase)
        })
    }
}

/// Largest deviation from the identity of the 1-D Gram
/// `(1/L) sum_i w_i exp(j 2 pi m x_i / L)` over `|m| <= 2 N`, for an
/// `order`-point Gauss-Legendre rule.
fn gram_error(order: usize, truncation: usize) -> Result<f64> {
    let rule = legendre_rule(order)?;
    let mut worst: f64 = 0.0;
    for m in 0..=(2 * truncation) {
        // on [-1, 1] the interval length is 2 and x / L = t / 2
        let value: Complex64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| Complex64::from_polar(w / 2.0, PI * m as f64 * t))
            .sum();
        let target = if m == 0 { 1.0 } else { 0.0 };
        worst = worst.max((value - target).norm());
    }
    Ok(worst)
}

/// Smallest Gauss-Legendre order, at least `min_order`, for which the sampled
/// basis is orthonormal to within `1e-7`.
pub fn fourier_quadrature_order(truncation: usize, min_order: usize) -> Result<usize> {
    for order in min_order.max(1)..=MAX_ORDER {
        if gram_error(order, truncation)? < GRAM_TOL {
            return Ok(order);
        }
    }
    Err(invalid(format!(
        "no quadrature order up to {MAX_ORDER} resolves a Fourier truncation of {truncation}"
    )))
}

/// Outcome of a Fourier-basis solve.
#[derive(Debug, Clone)]
pub struct FourierRun {
    pub run: BaselineRun,
    /// Per-user coefficient matrices, `basis.len() x d`.
    pub coefficients: Vec<CMatrix>,
    pub basis: FourierBasis,
    /// Quadrature order used on the base-station aperture.
    pub bs_order: usize,
    /// Synthesised beamformers on that grid.
    pub beamformers: Vec<CMatrix>,
}

/// Optimises Fourier coefficients with the WMMSE block updates and scores the
/// synthesised beamformers.
///
/// The base-station grid uses the scenario's order or the smallest order that
/// keeps the basis orthonormal, whichever is larger, so coefficient power and
/// integrated current power coincide.
pub fn run_fourier(scenario: &Scenario, truncation: usize, config: &SolverConfig) -> Result<FourierRun> {
    config.validate()?;
    let start = Instant::now();
    let bs_order = fourier_quadrature_order(truncation, scenario.bs_order)?;
    let channels = build_channel_set_with_orders(scenario, bs_order, scenario.user_order)?;
    let basis = FourierBasis::new(scenario.bs, truncation);
    let phi = basis.sample(&channels.bs_grid);
    let link = coefficient_link(&channels, &phi);

    let v0 = initial_beamformers(
        &link,
        &channels.rows_by_centre_distance(),
        scenario.streams,
        scenario.budget,
        config.init,
        scenario.seed,
    );
    let solution = Wmmse::new(&link, scenario.noise_variance, scenario.budget, v0, config.clone())?.run()?;
    let coefficients = solution.state.v.clone();
    let beamformers: Vec<CMatrix> = coefficients.iter().map(|c| &phi * c).collect();
    let se = evaluate_se(&channels.link, &beamformers, scenario.noise_variance)?;
    let power = transmit_power(&beamformers, &channels.link.tx_weights);
    if !power.is_finite() {
        return Err(CapaError::Numerical("synthesised beamformer power is not finite".into()));
    }
    Ok(FourierRun {
        run: BaselineRun {
            se,
            seconds: start.elapsed().as_secs_f64(),
            iterations: solution.iterations(),
            converged: solution.converged,
            power,
        },
        coefficients,
        basis,
        bs_order,
        beamformers,
    })
}

/// Channels seen by the coefficients: `H_k Pi_B Phi`, with unit transmit
/// weights so that the coefficient power is the Parseval power.
fn coefficient_link(channels: &ChannelSet, phi: &CMatrix) -> SampledLink {
    let weighted_phi = scale_rows(&channels.link.tx_weights, phi);
    SampledLink {
        channels: channels.link.channels.iter().map(|h| h * &weighted_phi).collect(),
        tx_weights: DVector::from_element(phi.ncols(), 1.0),
        rx_weights: channels.link.rx_weights.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_rel_diff, weighted_gram};
    use crate::quadrature::tensor_grid;

    #[test]
    fn basis_size_and_order() {
        let b = FourierBasis::new(Aperture::new([0.0; 3], 1.0, 2.0), 1);
        assert_eq!(b.len(), 9);
        let f = b.frequencies();
        assert_eq!(f[0], (-1, -1));
        assert_eq!(f[1], (-1, 0));
        assert_eq!(f[3], (0, -1));
        assert_eq!(f[8], (1, 1));
        assert_eq!(FourierBasis::new(b.aperture, 0).len(), 1);
    }

    #[test]
    fn zero_truncation_is_the_constant_function() {
        let ap = Aperture::new([0.3, -0.1, 0.0], 0.5, 0.25);
        let grid = tensor_grid(ap.center, ap.lx, ap.ly, 3).unwrap();
        let phi = FourierBasis::new(ap, 0).sample(&grid);
        for z in phi.iter() {
            assert!((z - Complex64::new(1.0 / ap.area().sqrt(), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn chosen_order_makes_the_basis_orthonormal() {
        for n in [0, 1, 2, 4, 6] {
            let order = fourier_quadrature_order(n, 1).unwrap();
            assert!(gram_error(order, n).unwrap() < GRAM_TOL);
            if order > 1 {
                assert!(gram_error(order - 1, n).unwrap() >= GRAM_TOL);
            }
            let ap = Aperture::new([0.2, 0.1, 0.0], 0.5, 0.4);
            let grid = tensor_grid(ap.center, ap.lx, ap.ly, order).unwrap();
            let phi = FourierBasis::new(ap, n).sample(&grid);
            let w = DVector::from_vec(grid.combined_weights.clone());
            let gram = weighted_gram(&phi, &w, &phi);
            let id = CMatrix::identity(phi.ncols(), phi.ncols());
            assert!((gram - id).iter().all(|z| z.norm() < 1e-6), "truncation {n}");
        }
        // the scenario order is a floor
        assert_eq!(fourier_quadrature_order(0, 10).unwrap(), 10);
    }

    #[test]
    fn synthesised_power_equals_coefficient_power() {
        let ap = Aperture::new([0.0; 3], 0.5, 0.5);
        let order = fourier_quadrature_order(3, 4).unwrap();
        let grid = tensor_grid(ap.center, ap.lx, ap.ly, order).unwrap();
        let phi = FourierBasis::new(ap, 3).sample(&grid);
        let coeffs = CMatrix::from_fn(phi.ncols(), 2, |i, j| Complex64::new((i as f64).sin(), (j as f64 + 0.3 * i as f64).cos()));
        let v = &phi * &coeffs;
        let w = DVector::from_vec(grid.combined_weights.clone());
        let p_coeff = coeffs.norm_squared();
        let p_fn = transmit_power(&[v], &w);
        assert!((p_fn - p_coeff).abs() < 1e-6 * p_coeff);
    }

    #[test]
    fn coefficient_link_reproduces_sampled_fields() {
        let s = Scenario::desk(2);
        let order = fourier_quadrature_order(2, s.bs_order).unwrap();
        let ch = build_channel_set_with_orders(&s, order, 4).unwrap();
        let phi = FourierBasis::new(s.bs, 2).sample(&ch.bs_grid);
        let link = coefficient_link(&ch, &phi);
        let c = CMatrix::from_fn(phi.ncols(), 1, |i, _| Complex64::new(1.0, i as f64 * 0.1));
        let direct = &ch.link.channels[1] * scale_rows(&ch.link.tx_weights, &(&phi * &c));
        let via = &link.channels[1] * &c;
        assert!(max_rel_diff(&via, &direct) < 1e-12);
    }
}
