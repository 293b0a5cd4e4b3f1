//! Comparison methods: beamforming restricted to a truncated Fourier basis,
//! and a spatially discrete array obtained by cutting the apertures into
//! elements.
//!
//! Both report spectral efficiency through [`crate::solver::evaluate_se`] so
//! that every method is scored by the same evaluator.

pub mod fourier;
pub mod spda;

pub use fourier::{fourier_quadrature_order, run_fourier, FourierBasis, FourierRun};
pub use spda::{element_grid, run_spda, SpdaMode, SpdaRun};

use crate::error::{invalid, Result};
use crate::solver::{SolverConfig, SpectralEfficiency};

/// What every baseline reports.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun {
    pub se: SpectralEfficiency,
    /// Wall time including channel construction.
    pub seconds: f64,
    /// Iterations of the alternating solver, 0 for closed-form methods.
    pub iterations: usize,
    pub converged: bool,
    /// Transmit power in the continuous (integrated) sense.
    pub power: f64,
}

/// The solver configuration baselines run with: the same block updates, but
/// solved with dense inverses on the sample grids rather than the `Kd`-sized
/// Woodbury forms.
pub fn conventional(config: &SolverConfig) -> SolverConfig {
    SolverConfig {
        use_woodbury: false,
        ..config.clone()
    }
}

/// Water-filling of `budget` over parallel channels with power gains
/// `gains` and noise `noise`: `p_i = max(0, nu - noise / g_i)` with
/// `sum p_i = budget`.
///
/// The water level is found in closed form from the sorted gains.
pub fn waterfill(gains: &[f64], noise: f64, budget: f64) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return Err(invalid("water-filling needs at least one gain"));
    }
    if gains.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(invalid("water-filling gains must be positive and finite"));
    }
    if !(noise > 0.0 && budget > 0.0) {
        return Err(invalid("water-filling noise and budget must be positive"));
    }
    let mut floors: Vec<f64> = gains.iter().map(|g| noise / g).collect();
    floors.sort_by(f64::total_cmp);
    // with the m lowest floors active, nu = (budget + sum floors) / m; the
    // largest m whose last floor stays below nu is the answer
    let mut level = budget + floors[0];
    let mut acc = floors[0];
    for (m, &f) in floors.iter().enumerate().skip(1) {
        let candidate = (budget + acc + f) / (m + 1) as f64;
        if candidate <= f {
            break;
        }
        acc += f;
        level = candidate;
    }
    Ok(gains.iter().map(|g| (level - noise / g).max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_gain_takes_the_budget() {
        let p = waterfill(&[3.0], 0.5, 2.0).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn equal_gains_split_evenly() {
        let p = waterfill(&[2.0, 2.0, 2.0], 1.0, 3.0).unwrap();
        for x in p {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_solved_two_channel_case() {
        // nu from 2 nu - 1/4 - 1 = 1
        let p = waterfill(&[4.0, 1.0], 1.0, 1.0).unwrap();
        assert!((p[0] - 0.875).abs() < 1e-15);
        assert!((p[1] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn weak_channels_are_switched_off() {
        // floors 0.1 and 10: with budget 1 the second stays dry
        let p = waterfill(&[10.0, 0.1], 1.0, 1.0).unwrap();
        assert_eq!(p[1], 0.0);
        assert!((p[0] - 1.0).abs() < 1e-15);
        // order of the input does not matter
        let q = waterfill(&[0.1, 10.0], 1.0, 1.0).unwrap();
        assert_eq!(q, vec![p[1], p[0]]);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(waterfill(&[], 1.0, 1.0).is_err());
        assert!(waterfill(&[1.0, 0.0], 1.0, 1.0).is_err());
        assert!(waterfill(&[1.0], 0.0, 1.0).is_err());
        assert!(waterfill(&[1.0], 1.0, -1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Brute-force level search by bisection on nu.
        fn bisect_level(gains: &[f64], noise: f64, budget: f64) -> f64 {
            let spent = |nu: f64| gains.iter().map(|g| (nu - noise / g).max(0.0)).sum::<f64>();
            let (mut lo, mut hi) = (0.0, budget + gains.iter().map(|g| noise / g).fold(0.0, f64::max));
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if spent(mid) > budget {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        }

        proptest! {
            #[test]
            fn spends_the_budget_and_matches_bisection(
                gains in proptest::collection::vec(1e-3f64..1e3, 1..12),
                noise in 1e-3f64..10.0,
                budget in 1e-3f64..1e3,
            ) {
                let p = waterfill(&gains, noise, budget).unwrap();
                let total: f64 = p.iter().sum();
                prop_assert!((total - budget).abs() <= 1e-10 * budget);
                let nu = bisect_level(&gains, noise, budget);
                for (pi, g) in p.iter().zip(&gains) {
                    let expected = (nu - noise / g).max(0.0);
                    prop_assert!((pi - expected).abs() <= 1e-9 * budget.max(nu));
                }
            }
        }
    }
}
