//! Alternating WMMSE solver over a sampled link.
//!
//! Each iteration runs, in order: snapshot of the weight matrices, combiner
//! update, weight update, beamformer update. The loop stops once the change
//! in `sum_k log det W_k` is at most `epsilon`.

mod bisect;
mod init;
mod rate;
mod updates;

use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{build_channel_set, ChannelSet, SampledLink};
use crate::error::{invalid, CapaError, Result};
use crate::linalg::CMatrix;
use crate::scenario::Scenario;

pub use bisect::{bisect_mu, MuSearch};
pub use init::{initial_beamformers, Init};
pub use rate::{evaluate_se, SpectralEfficiency};
pub use updates::{
    mse_matrices, mu_floor, received_fields, sum_logdet, transmit_power, update_beamformers, update_combiners,
    update_weights, weighted_mse_objective, BeamformerUpdate,
};

/// Sampled beamformers, combiners and weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub v: Vec<CMatrix>,
    pub u: Vec<CMatrix>,
    pub w: Vec<CMatrix>,
}

impl SolverState {
    /// State with the given beamformers, zero combiners and identity weights.
    pub fn from_beamformers(v: Vec<CMatrix>, rx_len: usize) -> Self {
        let d = v.first().map_or(0, |m| m.ncols());
        let u = updates::zeros_like(&v, rx_len);
        let w = v.iter().map(|_| CMatrix::identity(d, d)).collect();
        Self { v, u, w }
    }

    pub fn streams(&self) -> usize {
        self.v.first().map_or(0, |m| m.ncols())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stop when `|sum log det W - sum log det W'|` falls to this.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Relative power tolerance of the multiplier search.
    pub bisect_tol: f64,
    pub mu_max_doublings: usize,
    pub init: Init,
    /// Use the `Kd`-sized Woodbury forms instead of dense solves on the
    /// sample grids.
    pub use_woodbury: bool,
    /// When the power constraint is inactive after a beamformer update,
    /// scale beamformers up to the budget and combiners down by the same
    /// factor. The cross terms are unchanged and the noise term shrinks, so
    /// the objective still decreases.
    pub rescale_to_budget: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iters: 100,
            bisect_tol: 1e-6,
            mu_max_doublings: 200,
            init: Init::RandomGaussian,
            use_woodbury: true,
            rescale_to_budget: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(invalid("`epsilon` must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid("`max_iters` must be at least 1"));
        }
        if !(self.bisect_tol > 0.0 && self.bisect_tol < 0.1) {
            return Err(invalid("`bisect_tol` must lie in (0, 0.1)"));
        }
        Ok(())
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Weighted-MSE objective at the end of the iteration.
    pub objective: f64,
    pub sum_logdet_w: f64,
    /// Sum rate of the beamformers produced by this iteration, in nats.
    pub sum_se: f64,
    pub power: f64,
    pub mu: f64,
    /// Wall time since the start of the solve.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with header `iter,objective,sum_logdet_w,sum_se_bits,power,mu,seconds`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iter", "objective", "sum_logdet_w", "sum_se_bits", "power", "mu", "seconds"])?;
        for r in &self.records {
            out.write_record([
                r.iter.to_string(),
                r.objective.to_string(),
                r.sum_logdet_w.to_string(),
                (r.sum_se / std::f64::consts::LN_2).to_string(),
                r.power.to_string(),
                r.mu.to_string(),
                r.seconds.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Diagnostics of one full iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub iter: usize,
    pub objective_start: f64,
    pub objective_after_u: f64,
    pub objective_after_w: f64,
    pub objective_after_v: f64,
    pub sum_logdet_w_prev: f64,
    pub sum_logdet_w: f64,
    /// Sum rate of the beamformers the combiners and weights were fitted to.
    pub sum_se_at_w: f64,
    pub power_before_v: f64,
    pub power_after_v: f64,
    pub mu: f64,
    pub mu_floor: f64,
    pub bisect_iterations: usize,
    /// Factor applied by the budget rescale, 1 when none was applied.
    pub rescale: f64,
    pub sum_se: f64,
}

/// Iterative solver bound to one link.
#[derive(Debug, Clone)]
pub struct Wmmse<'a> {
    link: &'a SampledLink,
    noise: f64,
    budget: f64,
    config: SolverConfig,
    state: SolverState,
    fields: Vec<CMatrix>,
    /// Sum rate of the current beamformers, once known.
    sum_se: Option<f64>,
    iter: usize,
}

impl<'a> Wmmse<'a> {
    pub fn new(
        link: &'a SampledLink,
        noise: f64,
        budget: f64,
        initial_v: Vec<CMatrix>,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        if initial_v.len() != link.num_users() || initial_v.iter().any(|v| v.nrows() != link.tx_len()) {
            return Err(invalid("initial beamformers do not match the link dimensions"));
        }
        let fields = received_fields(link, &initial_v);
        Ok(Self {
            link,
            noise,
            budget,
            config,
            state: SolverState::from_beamformers(initial_v, link.rx_len()),
            fields,
            sum_se: None,
            iter: 0,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn into_state(self) -> SolverState {
        self.state
    }

    fn objective(&self) -> f64 {
        updates::objective_from_fields(self.link, &self.fields, &self.state, self.noise)
    }

    /// Runs one iteration.
    pub fn step(&mut self) -> Result<StepReport> {
        self.iter += 1;
        let iter = self.iter;
        let tag = |e: CapaError| match e {
            CapaError::Numerical(m) => CapaError::Numerical(format!("iteration {iter}: {m}")),
            CapaError::Convergence(m) => CapaError::Convergence(format!("iteration {iter}: {m}")),
            other => other,
        };
        let d = self.state.streams();
        let objective_start = self.objective();
        let sum_logdet_w_prev = sum_logdet(&self.state.w);

        self.state.u =
            updates::combiners_from_fields(self.link, &self.fields, d, self.noise, self.config.use_woodbury)
                .map_err(tag)?;
        let objective_after_u = self.objective();

        self.state.w = updates::weights_from_fields(self.link, &self.fields, &self.state.u, d).map_err(tag)?;
        let objective_after_w = self.objective();
        let sum_logdet_w = sum_logdet(&self.state.w);
        let sum_se_at_w = match self.sum_se {
            Some(se) => se,
            None => rate::se_from_fields(self.link, &self.fields, d, self.noise).map_err(tag)?.sum,
        };

        let power_before_v = transmit_power(&self.state.v, &self.link.tx_weights);
        let update =
            update_beamformers(self.link, &self.state.u, &self.state.w, self.budget, &self.config).map_err(tag)?;
        self.state.v = update.v;
        let mut rescale = 1.0;
        if self.config.rescale_to_budget {
            let power = transmit_power(&self.state.v, &self.link.tx_weights);
            if power > 0.0 && power < self.budget * (1.0 - self.config.bisect_tol) {
                rescale = (self.budget / power).sqrt();
                let a = Complex64::new(rescale, 0.0);
                self.state.v.iter_mut().for_each(|m| *m *= a);
                self.state.u.iter_mut().for_each(|m| *m /= a);
            }
        }
        self.fields = received_fields(self.link, &self.state.v);
        let objective_after_v = self.objective();
        let power_after_v = transmit_power(&self.state.v, &self.link.tx_weights);
        let sum_se = rate::se_from_fields(self.link, &self.fields, d, self.noise).map_err(tag)?.sum;
        self.sum_se = Some(sum_se);

        Ok(StepReport {
            iter,
            objective_start,
            objective_after_u,
            objective_after_w,
            objective_after_v,
            sum_logdet_w_prev,
            sum_logdet_w,
            sum_se_at_w,
            power_before_v,
            power_after_v,
            mu: update.mu,
            mu_floor: update.mu_floor,
            bisect_iterations: update.bisect_iterations,
            rescale,
            sum_se,
        })
    }

    /// Iterates to convergence or `max_iters`, calling `observe` after every
    /// iteration.
    pub fn run_with<F: FnMut(&StepReport, &SolverState)>(mut self, mut observe: F) -> Result<Solution> {
        let start = Instant::now();
        let mut trace = IterationTrace::default();
        let mut converged = false;
        let mut last_mu = 0.0;
        for _ in 0..self.config.max_iters {
            let report = self.step()?;
            observe(&report, &self.state);
            trace.records.push(IterationRecord {
                iter: report.iter,
                objective: report.objective_after_v,
                sum_logdet_w: report.sum_logdet_w,
                sum_se: report.sum_se,
                power: report.power_after_v,
                mu: report.mu,
                seconds: start.elapsed().as_secs_f64(),
            });
            last_mu = report.mu;
            if (report.sum_logdet_w - report.sum_logdet_w_prev).abs() <= self.config.epsilon {
                converged = true;
                break;
            }
        }
        let se = evaluate_se(self.link, &self.state.v, self.noise)?;
        Ok(Solution {
            state: self.state,
            trace,
            converged,
            mu: last_mu,
            se,
        })
    }

    pub fn run(self) -> Result<Solution> {
        self.run_with(|_, _| {})
    }
}

/// Final state of a solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub state: SolverState,
    pub trace: IterationTrace,
    pub converged: bool,
    pub mu: f64,
    pub se: SpectralEfficiency,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Initial beamformers for a scenario's channel set.
pub fn init_beamformers(scenario: &Scenario, channels: &ChannelSet, config: &SolverConfig) -> SolverState {
    let v = initial_beamformers(
        &channels.link,
        &channels.rows_by_centre_distance(),
        scenario.streams,
        scenario.budget,
        config.init,
        scenario.seed,
    );
    SolverState::from_beamformers(v, channels.link.rx_len())
}

/// Solves an already sampled scenario.
pub fn run_on_channels(scenario: &Scenario, channels: &ChannelSet, config: &SolverConfig) -> Result<Solution> {
    let init = init_beamformers(scenario, channels, config);
    Wmmse::new(&channels.link, scenario.noise_variance, scenario.budget, init.v, config.clone())?.run()
}

/// Samples the scenario's channels and runs the solver.
pub fn run(scenario: &Scenario, config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    let channels = build_channel_set(scenario)?;
    run_on_channels(scenario, &channels, config)
}
