//! Uniform entry point over the proposed solver and the baselines.

use std::time::Instant;

use anyhow::Result;
use capa_core::baselines::{conventional, run_fourier, run_spda, SpdaMode};
use capa_core::solver::{run_on_channels, transmit_power, SpectralEfficiency};
use capa_core::{build_channel_set, Scenario, SolverConfig};

use crate::config::{Method, MethodOptions};

/// What one method run reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub method: Method,
    pub se: SpectralEfficiency,
    pub iterations: usize,
    pub converged: bool,
    /// Wall time including channel sampling.
    pub seconds: f64,
    pub power: f64,
}

/// Fourier truncation: the option, or `ceil(L_B / wavelength)`.
pub fn fourier_truncation(scenario: &Scenario, options: &MethodOptions) -> usize {
    options
        .fourier_truncation
        .unwrap_or_else(|| (scenario.bs.lx.max(scenario.bs.ly) / scenario.wavelength).ceil() as usize)
}

/// Element spacing: the option, or half a wavelength.
pub fn spda_spacing(scenario: &Scenario, options: &MethodOptions) -> f64 {
    options.spda_spacing.unwrap_or(scenario.wavelength / 2.0)
}

pub fn run_method(method: Method, scenario: &Scenario, config: &SolverConfig, options: &MethodOptions) -> Result<Outcome> {
    let outcome = match method {
        Method::Proposed => {
            let start = Instant::now();
            let channels = build_channel_set(scenario)?;
            let sol = run_on_channels(scenario, &channels, config)?;
            let seconds = start.elapsed().as_secs_f64();
            Outcome {
                method,
                power: transmit_power(&sol.state.v, &channels.link.tx_weights),
                iterations: sol.iterations(),
                converged: sol.converged,
                se: sol.se,
                seconds,
            }
        }
        Method::Fourier => {
            let r = run_fourier(scenario, fourier_truncation(scenario, options), config)?.run;
            Outcome {
                method,
                se: r.se,
                iterations: r.iterations,
                converged: r.converged,
                seconds: r.seconds,
                power: r.power,
            }
        }
        Method::Spda | Method::SpdaWmmse => {
            let mode = if method == Method::Spda {
                SpdaMode::SvdWaterfill
            } else {
                SpdaMode::Wmmse
            };
            let r = run_spda(scenario, spda_spacing(scenario, options), mode, &conventional(config))?.run;
            Outcome {
                method,
                se: r.se,
                iterations: r.iterations,
                converged: r.converged,
                seconds: r.seconds,
                power: r.power,
            }
        }
    };
    Ok(outcome)
}
