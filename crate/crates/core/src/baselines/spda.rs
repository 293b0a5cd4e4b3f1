//! Spatially discrete array baseline: both apertures are cut into square-ish
//! cells and each cell becomes a point element at its centre whose gain
//! carries the cell area.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_set_from_grids, ChannelSet};
use crate::error::{invalid, CapaError, Result};
use crate::linalg::{scale_cols, scale_rows, CMatrix};
use crate::quadrature::QuadGrid;
use crate::scenario::{Aperture, Scenario};
use crate::solver::{evaluate_se, initial_beamformers, transmit_power, SolverConfig, Wmmse};

use super::{waterfill, BaselineRun};

/// How the element-domain problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpdaMode {
    /// Per-user SVD with water-filling of an equal budget share; other
    /// users' signals are ignored while designing but counted when scoring.
    #[default]
    SvdWaterfill,
    /// The WMMSE block updates on the element channels.
    Wmmse,
}

/// Outcome of an element-array solve.
#[derive(Debug, Clone)]
pub struct SpdaRun {
    pub run: BaselineRun,
    pub channels: ChannelSet,
    /// Element currents, one `elements x d` matrix per user.
    pub beamformers: Vec<CMatrix>,
}

/// Element centres and cell areas for `aperture` at roughly `spacing`:
/// `max(1, round(L / spacing))` elements per axis, ordered like a
/// quadrature grid (x outer).
pub fn element_grid(aperture: &Aperture, spacing: f64) -> Result<QuadGrid> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(invalid(format!("element spacing must be positive (got {spacing})")));
    }
    let count = |side: f64| ((side / spacing).round() as usize).max(1);
    let (nx, ny) = (count(aperture.lx), count(aperture.ly));
    let (dx, dy) = (aperture.lx / nx as f64, aperture.ly / ny as f64);
    let c = aperture.center;
    let mut points = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            points.push([
                c[0] - aperture.lx / 2.0 + (i as f64 + 0.5) * dx,
                c[1] - aperture.ly / 2.0 + (j as f64 + 0.5) * dy,
                c[2],
            ]);
        }
    }
    Ok(QuadGrid {
        combined_weights: vec![dx * dy; points.len()],
        points,
        aperture_area: aperture.area(),
    })
}

/// Runs the element-array baseline at `spacing` metres.
pub fn run_spda(scenario: &Scenario, spacing: f64, mode: SpdaMode, config: &SolverConfig) -> Result<SpdaRun> {
    config.validate()?;
    scenario.validate()?;
    let start = Instant::now();
    let bs_grid = element_grid(&scenario.bs, spacing)?;
    let user_grids = scenario
        .users
        .iter()
        .map(|u| element_grid(u, spacing))
        .collect::<Result<Vec<_>>>()?;
    let channels = channel_set_from_grids(scenario, bs_grid, user_grids)?;
    let (beamformers, iterations, converged) = match mode {
        SpdaMode::SvdWaterfill => (svd_waterfill(&channels, scenario)?, 0, true),
        SpdaMode::Wmmse => {
            let v0 = initial_beamformers(
                &channels.link,
                &channels.rows_by_centre_distance(),
                scenario.streams,
                scenario.budget,
                config.init,
                scenario.seed,
            );
            let sol = Wmmse::new(&channels.link, scenario.noise_variance, scenario.budget, v0, config.clone())?.run()?;
            let (it, conv) = (sol.iterations(), sol.converged);
            (sol.state.v, it, conv)
        }
    };
    let se = evaluate_se(&channels.link, &beamformers, scenario.noise_variance)?;
    let power = transmit_power(&beamformers, &channels.link.tx_weights);
    Ok(SpdaRun {
        run: BaselineRun {
            se,
            seconds: start.elapsed().as_secs_f64(),
            iterations,
            converged,
            power,
        },
        channels,
        beamformers,
    })
}

/// Per user: SVD of `Pi_U^{1/2} H_k Pi_B^{1/2}`, water-filling of
/// `budget / K` over the leading `d` singular values, currents
/// `Pi_B^{-1/2} v_i sqrt(p_i)`.
fn svd_waterfill(channels: &ChannelSet, scenario: &Scenario) -> Result<Vec<CMatrix>> {
    let link = &channels.link;
    let d = scenario.streams;
    let share = scenario.budget / link.num_users() as f64;
    let tx_root = link.tx_weights.map(f64::sqrt);
    let rx_root = link.rx_weights.map(f64::sqrt);
    link.channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let g = scale_cols(&scale_rows(&rx_root, h), &tx_root);
            let svd = g.svd(false, true);
            let v_t = svd
                .v_t
                .ok_or_else(|| CapaError::Numerical(format!("SVD of user {k}'s element channel failed")))?;
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
            let modes: Vec<usize> = order
                .into_iter()
                .take(d)
                .filter(|&i| svd.singular_values[i] > 0.0)
                .collect();
            let mut vk = CMatrix::zeros(link.tx_len(), d);
            if modes.is_empty() {
                return Ok(vk);
            }
            let gains: Vec<f64> = modes.iter().map(|&i| svd.singular_values[i].powi(2)).collect();
            let powers = waterfill(&gains, scenario.noise_variance, share)?;
            for (col, (&i, p)) in modes.iter().zip(powers).enumerate() {
                let dir = v_t.row(i).adjoint() * Complex64::new(p.sqrt(), 0.0);
                let current = dir.component_div(&tx_root.map(|r| Complex64::new(r, 0.0)));
                vk.set_column(col, &current);
            }
            Ok(vk)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SampledLink;
    use nalgebra::DVector;

    #[test]
    fn element_grid_layout() {
        let ap = Aperture::new([1.0, -1.0, 2.0], 0.5, 0.25);
        let g = element_grid(&ap, 0.125).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.points[0], [0.8125, -1.0625, 2.0]);
        assert_eq!(g.points[1], [0.8125, -0.9375, 2.0]);
        assert_eq!(g.points[2], [0.9375, -1.0625, 2.0]);
        let area: f64 = g.combined_weights.iter().sum();
        assert!((area - ap.area()).abs() < 1e-15);
        // coarser than the aperture still leaves one element
        let one = element_grid(&ap, 10.0).unwrap();
        assert_eq!(one.points, vec![ap.center]);
        assert!(element_grid(&ap, 0.0).is_err());
        assert!(element_grid(&ap, f64::NAN).is_err());
    }

    #[test]
    fn elements_lie_inside_the_aperture() {
        let ap = Aperture::new([0.0, 0.0, 3.0], 0.37, 0.21);
        for spacing in [0.01, 0.05, 0.0625, 0.3] {
            let g = element_grid(&ap, spacing).unwrap();
            assert!(g.points.iter().all(|&p| ap.contains(p, 1e-12)));
        }
    }

    #[test]
    fn single_user_puts_power_on_the_dominant_mode() {
        // rank-one channel: only one non-zero singular value
        let h = CMatrix::from_fn(3, 4, |i, j| Complex64::new((i + 1) as f64, 0.0) * Complex64::new(1.0, j as f64));
        let mut s = Scenario::desk(0);
        s.users.truncate(1);
        s.streams = 2;
        s.budget = 5.0;
        let channels = ChannelSet {
            link: SampledLink {
                channels: vec![h],
                tx_weights: DVector::from_element(4, 0.25),
                rx_weights: DVector::from_element(3, 0.5),
            },
            bs_grid: element_grid(&s.bs, 0.25).unwrap(),
            user_grids: vec![element_grid(&s.users[0], 0.05).unwrap()],
        };
        let v = svd_waterfill(&channels, &s).unwrap();
        let power = transmit_power(&v, &channels.link.tx_weights);
        assert!((power - 5.0).abs() < 1e-10);
        // the second stream would sit on a zero-gain mode and gets nothing
        let second: f64 = v[0].column(1).iter().map(|z| z.norm_sqr()).sum();
        assert!(second < 1e-20);
    }

    #[test]
    fn each_user_spends_an_equal_share() {
        let s = Scenario::desk(4);
        let out = run_spda(&s, s.wavelength / 2.0, SpdaMode::SvdWaterfill, &SolverConfig::default()).unwrap();
        for vk in &out.beamformers {
            let p = transmit_power(std::slice::from_ref(vk), &out.channels.link.tx_weights);
            assert!((p - s.budget / 3.0).abs() < 1e-9 * s.budget);
        }
        assert!((out.run.power - s.budget).abs() < 1e-9 * s.budget);
        assert_eq!(out.run.iterations, 0);
        assert!(out.run.se.sum > 0.0);
    }
}
