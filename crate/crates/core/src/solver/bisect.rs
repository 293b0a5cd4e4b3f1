//! Bisection on the power multiplier.

use crate::error::{CapaError, Result};

use super::SolverConfig;

const MAX_BISECTION_STEPS: usize = 500;

/// Outcome of a multiplier search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuSearch {
    pub mu: f64,
    /// Power evaluations after the initial floor check.
    pub iterations: usize,
}

/// Finds `mu` with `budget * (1 - tol) <= power(mu) <= budget` for a strictly
/// decreasing `power`, or returns `mu_floor` when the constraint is slack
/// there.
///
/// The returned point always satisfies `power(mu) <= budget`, so the
/// constraint is never violated by the tolerance. `upper_hint` seeds the
/// bracket; it is doubled up to `mu_max_doublings` times if too small.
pub fn bisect_mu<F>(
    mut power: F,
    budget: f64,
    mu_floor: f64,
    upper_hint: Option<f64>,
    config: &SolverConfig,
) -> Result<MuSearch>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut power = move |mu: f64| -> Result<f64> {
        let p = power(mu)?;
        // +inf is a legitimate "far above budget" (singular system at mu)
        if p >= 0.0 {
            Ok(p)
        } else {
            Err(CapaError::Numerical(format!("transmit power {p} at mu = {mu:e}")))
        }
    };
    if power(mu_floor)? <= budget {
        return Ok(MuSearch {
            mu: mu_floor,
            iterations: 0,
        });
    }
    let target_lo = budget * (1.0 - config.bisect_tol);
    let mut evals = 0;
    let mut lo = mu_floor;
    let mut hi = upper_hint
        .filter(|h| h.is_finite() && *h > mu_floor)
        .unwrap_or_else(|| (2.0 * mu_floor).max(1.0));
    let mut p_hi = power(hi)?;
    evals += 1;
    let mut doublings = 0;
    while p_hi > budget {
        if doublings >= config.mu_max_doublings {
            return Err(CapaError::Convergence(format!(
                "no multiplier bracket after {doublings} doublings (mu = {hi:e}, power = {p_hi:e})"
            )));
        }
        lo = hi;
        hi *= 2.0;
        p_hi = power(hi)?;
        evals += 1;
        doublings += 1;
    }
    // power(lo) > budget >= power(hi)
    for _ in 0..MAX_BISECTION_STEPS {
        if p_hi >= target_lo {
            return Ok(MuSearch { mu: hi, iterations: evals });
        }
        let mid = if hi > 2.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            // bracket exhausted at machine precision
            return Ok(MuSearch { mu: hi, iterations: evals });
        }
        let p = power(mid)?;
        evals += 1;
        if p > budget {
            lo = mid;
        } else {
            hi = mid;
            p_hi = p;
        }
    }
    Err(CapaError::Convergence(format!(
        "multiplier bisection did not reach tolerance {} in {MAX_BISECTION_STEPS} steps",
        config.bisect_tol
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(tol: f64) -> SolverConfig {
        SolverConfig {
            bisect_tol: tol,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn recovers_analytic_root() {
        let c_max = 10.0;
        let p = |mu: f64| Ok(4.0 * c_max / (1.0 + mu).powi(2));
        let s = bisect_mu(p, c_max, 1e-12, None, &cfg(1e-9)).unwrap();
        assert!((s.mu - 1.0).abs() < 1e-8);
        // from a bad hint as well
        let s = bisect_mu(p, c_max, 1e-12, Some(1e-3), &cfg(1e-9)).unwrap();
        assert!((s.mu - 1.0).abs() < 1e-8);
        assert!(p(s.mu).unwrap() <= c_max);
    }

    #[test]
    fn inactive_constraint_returns_floor() {
        let mut calls = 0;
        let s = bisect_mu(
            |mu| {
                calls += 1;
                Ok(1.0 / (1.0 + mu))
            },
            5.0,
            1e-9,
            None,
            &cfg(1e-6),
        )
        .unwrap();
        assert_eq!(s, MuSearch { mu: 1e-9, iterations: 0 });
        assert_eq!(calls, 1);
    }

    #[test]
    fn halving_tolerance_adds_few_steps() {
        let c_max = 1.0;
        let p = |mu: f64| Ok(7.0 * c_max / (1.0 + mu).powi(2));
        let mut prev = None;
        for tol in [1e-3, 5e-4, 2.5e-4, 1.25e-4] {
            let s = bisect_mu(p, c_max, 1e-12, None, &cfg(tol)).unwrap();
            let power = p(s.mu).unwrap();
            assert!(power <= c_max && power >= c_max * (1.0 - tol));
            if let Some(n) = prev {
                assert!(s.iterations >= n && s.iterations <= n + 3, "{n} -> {}", s.iterations);
            }
            prev = Some(s.iterations);
        }
    }

    #[test]
    fn bracket_failure() {
        let config = SolverConfig {
            mu_max_doublings: 3,
            ..SolverConfig::default()
        };
        let err = bisect_mu(|_| Ok(1e9), 1.0, 1e-12, None, &config).unwrap_err();
        assert!(matches!(err, CapaError::Convergence(_)));
    }

    #[test]
    fn unbounded_power_near_the_floor_moves_up() {
        // singular below mu = 0.5, 1 / mu^2 above
        let p = |mu: f64| Ok(if mu < 0.5 { f64::INFINITY } else { 1.0 / (mu * mu) });
        let s = bisect_mu(p, 1.0, 1e-15, None, &cfg(1e-9)).unwrap();
        assert!((s.mu - 1.0).abs() < 1e-8);
    }

    #[test]
    fn nan_power_is_an_error() {
        let err = bisect_mu(|_| Ok(f64::NAN), 1.0, 1e-12, None, &cfg(1e-6)).unwrap_err();
        assert!(matches!(err, CapaError::Numerical(_)));
    }
}
