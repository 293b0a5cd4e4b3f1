//! Spectral efficiency with the optimal (MMSE) receiver on each aperture.

use num_complex::Complex64;

use crate::channel::SampledLink;
use crate::error::Result;
use crate::linalg::{hermitian_part, logdet_hermitian, solve_hermitian, weighted_gram, CMatrix};

use super::updates::received_fields;

/// Per-user and total spectral efficiency in nats per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEfficiency {
    pub per_user: Vec<f64>,
    pub sum: f64,
}

impl SpectralEfficiency {
    pub fn per_user_bits(&self) -> Vec<f64> {
        self.per_user.iter().map(|x| x / std::f64::consts::LN_2).collect()
    }

    pub fn sum_bits(&self) -> f64 {
        self.sum / std::f64::consts::LN_2
    }
}

/// `SE_k = log det(I + A_k)` where `A_k` is the signal term seen through the
/// inverse of the interference-plus-noise operator.
///
/// With `E = H_k Pi_B V_k`, the interference fields `C = [H_k Pi_B V_j]_{j != k}`
/// and `G = C^H Pi_U C`, `S = E^H Pi_U E`, `X = E^H Pi_U C`:
/// `A_k = (S - X (s2 I + G)^{-1} X^H) / s2`. Only `(K-1)d`-sized systems are
/// solved.
pub fn evaluate_se(link: &SampledLink, v: &[CMatrix], noise: f64) -> Result<SpectralEfficiency> {
    let d = v.first().map_or(0, |m| m.ncols());
    se_from_fields(link, &received_fields(link, v), d, noise)
}

pub(crate) fn se_from_fields(link: &SampledLink, fields: &[CMatrix], d: usize, noise: f64) -> Result<SpectralEfficiency> {
    let per_user = fields
        .iter()
        .enumerate()
        .map(|(k, c)| user_rate(link, c, k, d, noise))
        .collect::<Result<Vec<_>>>()?;
    let sum = per_user.iter().sum();
    Ok(SpectralEfficiency { per_user, sum })
}

fn user_rate(link: &SampledLink, fields: &CMatrix, k: usize, d: usize, noise: f64) -> Result<f64> {
    let own = fields.columns(k * d, d).clone_owned();
    let others: Vec<usize> = (0..fields.ncols()).filter(|&c| c / d != k).collect();
    let interference = fields.select_columns(&others);
    let s = weighted_gram(&own, &link.rx_weights, &own);
    let signal = if interference.ncols() == 0 {
        s
    } else {
        let g = hermitian_part(&weighted_gram(&interference, &link.rx_weights, &interference));
        let x = weighted_gram(&own, &link.rx_weights, &interference);
        let n = g.nrows();
        let system = g + CMatrix::identity(n, n) * Complex64::new(noise, 0.0);
        let y = solve_hermitian(&system, &x.adjoint(), "rate interference Gram")?;
        s - x * y
    };
    let a = hermitian_part(&signal) * Complex64::new(1.0 / noise, 0.0);
    Ok(logdet_hermitian(&(CMatrix::identity(d, d) + a)))
}
