//! Block updates of the alternating minimisation, in quadrature-weighted
//! matrix form.
//!
//! Shapes: `v[k]` is `tx x d`, `u[k]` is `rx x d`, `w[k]` is `d x d`. The
//! received-field block of user `k` is `[H_k Pi_B V_1, ..., H_k Pi_B V_K]`,
//! an `rx x Kd` matrix whose `j`-th `d`-column block is the field of user
//! `j`'s streams sampled on user `k`'s aperture.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::SampledLink;
use crate::error::{CapaError, Result};
use crate::linalg::{
    hermitian_part, hstack, inverse, logdet_hermitian, norm_sq, scale_rows, solve_general, solve_hermitian,
    trace_re, weighted_gram, CMatrix, ZERO,
};

use super::bisect::{bisect_mu, MuSearch};
use super::{SolverConfig, SolverState};

fn streams_of(v: &[CMatrix]) -> usize {
    v.first().map_or(0, |m| m.ncols())
}

fn block(m: &CMatrix, j: usize, d: usize) -> CMatrix {
    m.columns(j * d, d).clone_owned()
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Received-field blocks for every user.
pub fn received_fields(link: &SampledLink, v: &[CMatrix]) -> Vec<CMatrix> {
    let stacked = scale_rows(&link.tx_weights, &hstack(v));
    link.channels.iter().map(|h| h * &stacked).collect()
}

/// `sum_k tr(V_k^H Pi_B V_k)`.
pub fn transmit_power(v: &[CMatrix], tx_weights: &DVector<f64>) -> f64 {
    v.iter()
        .map(|vk| {
            vk.row_iter()
                .zip(tx_weights.iter())
                .map(|(row, &w)| w * row.iter().map(|z| z.norm_sqr()).sum::<f64>())
                .sum::<f64>()
        })
        .sum()
}

/// MMSE combiners for the current beamformers.
pub fn update_combiners(link: &SampledLink, v: &[CMatrix], noise: f64, use_woodbury: bool) -> Result<Vec<CMatrix>> {
    let fields = received_fields(link, v);
    combiners_from_fields(link, &fields, streams_of(v), noise, use_woodbury)
}

pub(crate) fn combiners_from_fields(
    link: &SampledLink,
    fields: &[CMatrix],
    d: usize,
    noise: f64,
    use_woodbury: bool,
) -> Result<Vec<CMatrix>> {
    fields
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if use_woodbury {
                combiner_woodbury(&link.rx_weights, c, k, d, noise)
            } else {
                combiner_direct(&link.rx_weights, c, &block(c, k, d), noise)
            }
            .map_err(|e| CapaError::Numerical(format!("combiner update, user {k}: {e}")))
        })
        .collect()
}

/// Kd-sized Woodbury form of the MMSE combiner.
///
/// `E/s2 - C (I + G/s2)^{-1} G e_k / s2^2` with `G = C^H Pi_U C` collapses to
/// `C (s2 I + G)^{-1} G e_k / s2 = C (s2 I + G)^{-1} e_k`, which is what is
/// evaluated: the difference form cancels catastrophically once the received
/// SNR is large.
fn combiner_woodbury(
    rx_weights: &DVector<f64>,
    c: &CMatrix,
    k: usize,
    d: usize,
    noise: f64,
) -> Result<CMatrix> {
    let kd = c.ncols();
    let gram = hermitian_part(&weighted_gram(c, rx_weights, c));
    let system = gram + CMatrix::identity(kd, kd) * real(noise);
    let mut selector = CMatrix::zeros(kd, d);
    selector.view_mut((k * d, 0), (d, d)).fill_with_identity();
    let x = solve_hermitian(&system, &selector, "combiner Gram")?;
    Ok(c * x)
}

/// Dense solve of `(s2 I + C C^H Pi_U) U = E` in the symmetrised variables
/// `Pi_U^{1/2} U`.
fn combiner_direct(rx_weights: &DVector<f64>, c: &CMatrix, own: &CMatrix, noise: f64) -> Result<CMatrix> {
    let root = rx_weights.map(f64::sqrt);
    let dc = scale_rows(&root, c);
    let rx = c.nrows();
    let system = CMatrix::identity(rx, rx) * real(noise) + &dc * dc.adjoint();
    let y = solve_hermitian(&system, &scale_rows(&root, own), "combiner direct")?;
    Ok(scale_rows(&root.map(|r| 1.0 / r), &y))
}

/// `W_k = (I - U_k^H Pi_U H_k Pi_B V_k)^{-1}`, symmetrised.
pub fn update_weights(link: &SampledLink, u: &[CMatrix], v: &[CMatrix]) -> Result<Vec<CMatrix>> {
    let fields = received_fields(link, v);
    weights_from_fields(link, &fields, u, streams_of(v))
}

pub(crate) fn weights_from_fields(
    link: &SampledLink,
    fields: &[CMatrix],
    u: &[CMatrix],
    d: usize,
) -> Result<Vec<CMatrix>> {
    u.iter()
        .zip(fields)
        .enumerate()
        .map(|(k, (uk, c))| {
            let b = weighted_gram(uk, &link.rx_weights, &block(c, k, d));
            let w = inverse(&(CMatrix::identity(d, d) - b), "weight update")
                .map_err(|e| CapaError::Numerical(format!("user {k}: {e}")))?;
            Ok(hermitian_part(&w))
        })
        .collect()
}

/// Result of a beamformer update.
#[derive(Debug, Clone)]
pub struct BeamformerUpdate {
    pub v: Vec<CMatrix>,
    pub mu: f64,
    pub mu_floor: f64,
    pub bisect_iterations: usize,
}

/// Smallest multiplier the search will return.
pub fn mu_floor(budget: f64, tx_weights: &DVector<f64>) -> f64 {
    1e-12 * budget / tx_weights.sum()
}

/// Beamformer update under the sum-power budget with one global multiplier.
pub fn update_beamformers(
    link: &SampledLink,
    u: &[CMatrix],
    w: &[CMatrix],
    budget: f64,
    config: &SolverConfig,
) -> Result<BeamformerUpdate> {
    let d = w.first().map_or(0, |m| m.nrows());
    let k_users = link.num_users();
    // F_k = H_k^H Pi_U U_k
    let f: Vec<CMatrix> = link
        .channels
        .iter()
        .zip(u)
        .map(|(h, uk)| h.adjoint() * scale_rows(&link.rx_weights, uk))
        .collect();
    let n_hat = hstack(&f);
    let fw: Vec<CMatrix> = f.iter().zip(w).map(|(fk, wk)| fk * wk).collect();
    let m_hat = hstack(&fw);
    let floor = mu_floor(budget, &link.tx_weights);
    let root = link.tx_weights.map(f64::sqrt);
    let hint = (norm_sq(&scale_rows(&root, &m_hat)) / budget).sqrt();

    let (search, v_all) = if config.use_woodbury {
        let kd = m_hat.ncols();
        // P = N^H Pi_B M. The Woodbury update
        //   V = M e_k / mu - M (I + P/mu)^{-1} P e_k / mu^2
        // equals M (mu I + P)^{-1} e_k, evaluated in that form for stability.
        let gram = weighted_gram(&n_hat, &link.tx_weights, &m_hat);
        let dm = scale_rows(&root, &m_hat);
        let z_of = |mu: f64| -> Result<CMatrix> {
            let system = &gram + CMatrix::identity(kd, kd) * real(mu);
            solve_general(&system, &CMatrix::identity(kd, kd), "beamformer Gram")
        };
        let power = |mu: f64| -> Result<f64> {
            // Norm of Pi_B^{1/2} M Z taken directly: the Kd-space quadratic
            // form loses all accuracy once Z is large.
            // a singular system only occurs near the floor, where dead
            // streams leave zero columns; the power there is unbounded
            Ok(z_of(mu).map_or(f64::INFINITY, |z| norm_sq(&(&dm * z))))
        };
        let search = bisect_mu(power, budget, floor, Some(hint), config)?;
        let v_all = &m_hat * z_of(search.mu)?;
        (search, v_all)
    } else {
        let tx = link.tx_len();
        let dn = scale_rows(&root, &n_hat);
        let mut wb = CMatrix::zeros(k_users * d, k_users * d);
        for (j, wj) in w.iter().enumerate() {
            wb.view_mut((j * d, j * d), (d, d)).copy_from(wj);
        }
        let q = hermitian_part(&(&dn * wb * dn.adjoint()));
        let dm = scale_rows(&root, &m_hat);
        let solve = |mu: f64| -> Result<CMatrix> {
            let system = &q + CMatrix::identity(tx, tx) * real(mu);
            solve_hermitian(&system, &dm, "beamformer direct")
        };
        let search = bisect_mu(
            |mu| Ok(solve(mu).map_or(f64::INFINITY, |x| norm_sq(&x))),
            budget,
            floor,
            Some(hint),
            config,
        )?;
        let v_all = scale_rows(&root.map(|r| 1.0 / r), &solve(search.mu)?);
        (search, v_all)
    };
    let MuSearch { mu, iterations } = search;
    let v = (0..k_users).map(|k| block(&v_all, k, d)).collect();
    Ok(BeamformerUpdate {
        v,
        mu,
        mu_floor: floor,
        bisect_iterations: iterations,
    })
}

/// Per-user MSE matrices `E_k`.
pub fn mse_matrices(link: &SampledLink, state: &SolverState, noise: f64) -> Vec<CMatrix> {
    let fields = received_fields(link, &state.v);
    mse_from_fields(link, &fields, &state.u, streams_of(&state.v), noise)
}

pub(crate) fn mse_from_fields(
    link: &SampledLink,
    fields: &[CMatrix],
    u: &[CMatrix],
    d: usize,
    noise: f64,
) -> Vec<CMatrix> {
    u.iter()
        .zip(fields)
        .enumerate()
        .map(|(k, (uk, c))| {
            let b_row = weighted_gram(uk, &link.rx_weights, c);
            let b_kk = block(&b_row, k, d);
            let u_gram = weighted_gram(uk, &link.rx_weights, uk);
            CMatrix::identity(d, d) - &b_kk - b_kk.adjoint() + &b_row * b_row.adjoint() + u_gram * real(noise)
        })
        .collect()
}

/// `sum_k tr(W_k E_k) - log det W_k`.
pub fn weighted_mse_objective(link: &SampledLink, state: &SolverState, noise: f64) -> f64 {
    let fields = received_fields(link, &state.v);
    objective_from_fields(link, &fields, state, noise)
}

pub(crate) fn objective_from_fields(link: &SampledLink, fields: &[CMatrix], state: &SolverState, noise: f64) -> f64 {
    let d = streams_of(&state.v);
    mse_from_fields(link, fields, &state.u, d, noise)
        .iter()
        .zip(&state.w)
        .map(|(e, w)| trace_re(&(w * e)) - logdet_hermitian(w))
        .sum()
}

/// `sum_k log det W_k`.
pub fn sum_logdet(w: &[CMatrix]) -> f64 {
    w.iter().map(logdet_hermitian).sum()
}

pub(crate) fn zeros_like(v: &[CMatrix], rows: usize) -> Vec<CMatrix> {
    v.iter().map(|m| CMatrix::from_element(rows, m.ncols(), ZERO)).collect()
}
