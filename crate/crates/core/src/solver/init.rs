use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::SampledLink;
use crate::linalg::CMatrix;

use super::updates::transmit_power;

/// Starting point for the beamformers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// i.i.d. complex Gaussian samples.
    #[default]
    RandomGaussian,
    /// Column `i` of user `k` is the conjugate channel row of the `i`-th
    /// receive sample closest to the user's aperture centre.
    MatchedFilter,
}

/// Beamformers scaled to spend exactly `budget`.
///
/// `preferred_rows[k]` orders user `k`'s receive samples for the
/// matched-filter start; it is ignored for the random start.
pub fn initial_beamformers(
    link: &SampledLink,
    preferred_rows: &[Vec<usize>],
    streams: usize,
    budget: f64,
    init: Init,
    seed: u64,
) -> Vec<CMatrix> {
    let tx = link.tx_len();
    let mut v: Vec<CMatrix> = match init {
        Init::RandomGaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // keep this stream apart from user placement, which uses stream 0
            rng.set_stream(1);
            (0..link.num_users())
                .map(|_| {
                    CMatrix::from_fn(tx, streams, |_, _| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                    })
                })
                .collect()
        }
        Init::MatchedFilter => link
            .channels
            .iter()
            .enumerate()
            .map(|(k, h)| {
                let rows = preferred_rows
                    .get(k)
                    .cloned()
                    .filter(|r| !r.is_empty())
                    .unwrap_or_else(|| (0..h.nrows()).collect());
                let mut vk = CMatrix::zeros(tx, streams);
                for i in 0..streams {
                    let row = h.row(rows[i % rows.len()]);
                    vk.set_column(i, &row.adjoint());
                }
                vk
            })
            .collect(),
    };
    scale_to_budget(&mut v, &link.tx_weights, budget);
    v
}

pub(crate) fn scale_to_budget(v: &mut [CMatrix], tx_weights: &DVector<f64>, budget: f64) {
    let p = transmit_power(v, tx_weights);
    if p > 0.0 {
        let c = Complex64::new((budget / p).sqrt(), 0.0);
        for vk in v.iter_mut() {
            *vk *= c;
        }
    }
}
