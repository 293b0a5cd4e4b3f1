//! Free-space channel kernel and its sampled matrix form.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CapaError, Result};
use crate::linalg::{CMatrix, ZERO};
use crate::quadrature::{tensor_grid, QuadGrid};
use crate::scenario::Scenario;
use crate::Point3;

/// Minimum transmitter/receiver separation, in wavelengths, accepted when
/// sampling a channel.
pub const MIN_SEPARATION_WAVELENGTHS: f64 = 10.0;

/// yy-component of the free-space dyadic Green's function for a
/// y-polarised source and receiver.
///
/// `h = -j eta exp(-j 2 pi R / lambda) / (2 lambda R) * (1 - dy^2 / R^2)`.
pub fn kernel(r: Point3, s: Point3, wavelength: f64, impedance: f64) -> Result<Complex64> {
    let d = [r[0] - s[0], r[1] - s[1], r[2] - s[2]];
    let dist_sq = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    if dist_sq == 0.0 {
        return Err(CapaError::Singularity(format!(
            "kernel evaluated at coincident points {r:?}"
        )));
    }
    Ok(kernel_unchecked(d, dist_sq, wavelength, impedance))
}

#[inline]
fn kernel_unchecked(d: Point3, dist_sq: f64, wavelength: f64, impedance: f64) -> Complex64 {
    let dist = dist_sq.sqrt();
    let projection = 1.0 - d[1] * d[1] / dist_sq;
    let amp = impedance * projection / (2.0 * wavelength * dist);
    let phase = -2.0 * std::f64::consts::PI / wavelength * dist;
    // -j * e^{j phase}
    let (sin, cos) = phase.sin_cos();
    Complex64::new(amp * sin, -amp * cos)
}

/// Kernel seen by user `k`: zero unless `r` lies on that user's aperture and
/// `s` on the base-station aperture.
pub fn masked_kernel(k: usize, r: Point3, s: Point3, scenario: &Scenario) -> Result<Complex64> {
    const TOL: f64 = 1e-12;
    let Some(user) = scenario.users.get(k) else {
        return Ok(ZERO);
    };
    if user.contains(r, TOL) && scenario.bs.contains(s, TOL) {
        kernel(r, s, scenario.wavelength, scenario.impedance)
    } else {
        Ok(ZERO)
    }
}

/// What the solver sees of a link: per-user channel samples and the
/// quadrature (or element-area) weights on each side.
///
/// `channels[k]` has one row per receive sample of user `k` and one column
/// per transmit sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledLink {
    pub channels: Vec<CMatrix>,
    pub tx_weights: DVector<f64>,
    pub rx_weights: DVector<f64>,
}

impl SampledLink {
    pub fn num_users(&self) -> usize {
        self.channels.len()
    }

    pub fn tx_len(&self) -> usize {
        self.tx_weights.len()
    }

    pub fn rx_len(&self) -> usize {
        self.rx_weights.len()
    }

    /// Every channel multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let c = Complex64::new(c, 0.0);
        Self {
            channels: self.channels.iter().map(|h| h * c).collect(),
            tx_weights: self.tx_weights.clone(),
            rx_weights: self.rx_weights.clone(),
        }
    }
}

/// Sampled channels on Gauss-Legendre grids, together with the grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub link: SampledLink,
    pub bs_grid: QuadGrid,
    pub user_grids: Vec<QuadGrid>,
}

impl ChannelSet {
    pub fn h_hat(&self, k: usize) -> &CMatrix {
        &self.link.channels[k]
    }

    pub fn pi_b(&self) -> &DVector<f64> {
        &self.link.tx_weights
    }

    pub fn pi_u(&self) -> &DVector<f64> {
        &self.link.rx_weights
    }

    /// For each user, receive-sample indices sorted by distance from the
    /// aperture centre (ties broken by index).
    pub fn rows_by_centre_distance(&self) -> Vec<Vec<usize>> {
        self.user_grids
            .iter()
            .map(|g| {
                let n = g.len() as f64;
                let c = g.points.iter().fold([0.0; 3], |acc, p| {
                    [acc[0] + p[0] / n, acc[1] + p[1] / n, acc[2] + p[2] / n]
                });
                let mut idx: Vec<usize> = (0..g.len()).collect();
                let dist = |i: usize| {
                    let p = g.points[i];
                    (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)
                };
                idx.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
                idx
            })
            .collect()
    }
}

/// Samples `h(r_i, s_j)` for all receive points `rx` and transmit points
/// `tx`, rejecting any pair closer than the separation guard.
pub fn sample_kernel(rx: &[Point3], tx: &[Point3], wavelength: f64, impedance: f64) -> Result<CMatrix> {
    let min_sq = (MIN_SEPARATION_WAVELENGTHS * wavelength).powi(2);
    let mut h = CMatrix::zeros(rx.len(), tx.len());
    for (i, r) in rx.iter().enumerate() {
        for (j, s) in tx.iter().enumerate() {
            let d = [r[0] - s[0], r[1] - s[1], r[2] - s[2]];
            let dist_sq = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if !(dist_sq >= min_sq) {
                return Err(CapaError::Singularity(format!(
                    "receive point {r:?} is within {MIN_SEPARATION_WAVELENGTHS} wavelengths of transmit point {s:?}"
                )));
            }
            h[(i, j)] = kernel_unchecked(d, dist_sq, wavelength, impedance);
        }
    }
    Ok(h)
}

/// Builds the sampled channel matrices and quadrature weights for every
/// user. Users are sampled in parallel.
pub fn build_channel_set(scenario: &Scenario) -> Result<ChannelSet> {
    build_channel_set_with_orders(scenario, scenario.bs_order, scenario.user_order)
}

/// As [`build_channel_set`] but with explicit quadrature orders.
pub fn build_channel_set_with_orders(scenario: &Scenario, bs_order: usize, user_order: usize) -> Result<ChannelSet> {
    scenario.validate()?;
    let bs = &scenario.bs;
    let bs_grid = tensor_grid(bs.center, bs.lx, bs.ly, bs_order)?;
    let user_grids = scenario
        .users
        .iter()
        .map(|u| tensor_grid(u.center, u.lx, u.ly, user_order))
        .collect::<Result<Vec<_>>>()?;
    channel_set_from_grids(scenario, bs_grid, user_grids)
}

/// Samples the scenario's kernel between arbitrary sample grids. Every user
/// grid must carry the same weights, so that one receive weight vector
/// serves all users.
pub fn channel_set_from_grids(scenario: &Scenario, bs_grid: QuadGrid, user_grids: Vec<QuadGrid>) -> Result<ChannelSet> {
    let Some(first) = user_grids.first() else {
        return Err(CapaError::InvalidArgument("at least one user grid is required".into()));
    };
    if user_grids.iter().any(|g| g.combined_weights != first.combined_weights) {
        return Err(CapaError::InvalidArgument(
            "all user apertures must share the same size".into(),
        ));
    }
    let rx_weights = DVector::from_vec(first.combined_weights.clone());
    let channels = user_grids
        .par_iter()
        .map(|g| sample_kernel(&g.points, &bs_grid.points, scenario.wavelength, scenario.impedance))
        .collect::<Result<Vec<_>>>()?;
    let link = SampledLink {
        channels,
        tx_weights: DVector::from_vec(bs_grid.combined_weights.clone()),
        rx_weights,
    };
    Ok(ChannelSet {
        link,
        bs_grid,
        user_grids,
    })
}

const MAGIC: &[u8; 8] = b"CAPACHAN";
const FORMAT_VERSION: u32 = 1;

/// Writes a channel set in the cache format:
///
/// ```text
/// magic "CAPACHAN" | version u32 | tag_len u32 | tag bytes
/// users u32 | tx_len u32 | rx_len u32
/// bs grid:   area f64, then tx_len x (x, y, z, weight) f64
/// per user:  area f64, then rx_len x (x, y, z, weight) f64
/// per user:  rx_len x tx_len row-major (re, im) f64 pairs
/// ```
///
/// Everything is little-endian. `tag` is an opaque caller string, usually
/// the scenario JSON, used to detect stale caches.
pub fn write_channel_set<W: Write>(mut w: W, set: &ChannelSet, tag: &str) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u32::<LittleEndian>(tag.len() as u32)?;
    w.write_all(tag.as_bytes())?;
    w.write_u32::<LittleEndian>(set.link.num_users() as u32)?;
    w.write_u32::<LittleEndian>(set.link.tx_len() as u32)?;
    w.write_u32::<LittleEndian>(set.link.rx_len() as u32)?;
    let write_grid = |w: &mut W, g: &QuadGrid| -> Result<()> {
        w.write_f64::<LittleEndian>(g.aperture_area)?;
        for (p, &wt) in g.points.iter().zip(&g.combined_weights) {
            for &c in p {
                w.write_f64::<LittleEndian>(c)?;
            }
            w.write_f64::<LittleEndian>(wt)?;
        }
        Ok(())
    };
    write_grid(&mut w, &set.bs_grid)?;
    for g in &set.user_grids {
        write_grid(&mut w, g)?;
    }
    for h in &set.link.channels {
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                w.write_f64::<LittleEndian>(h[(i, j)].re)?;
                w.write_f64::<LittleEndian>(h[(i, j)].im)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a channel set written by [`write_channel_set`], returning it with
/// its tag.
pub fn read_channel_set<R: Read>(mut r: R) -> Result<(ChannelSet, String)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CapaError::Format("not a channel cache file".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(CapaError::Format(format!("unsupported cache version {version}")));
    }
    let tag_len = r.read_u32::<LittleEndian>()? as usize;
    let mut tag = vec![0u8; tag_len];
    r.read_exact(&mut tag)?;
    let tag = String::from_utf8(tag).map_err(|_| CapaError::Format("tag is not UTF-8".into()))?;
    let users = r.read_u32::<LittleEndian>()? as usize;
    let tx_len = r.read_u32::<LittleEndian>()? as usize;
    let rx_len = r.read_u32::<LittleEndian>()? as usize;
    let read_grid = |r: &mut R, n: usize| -> Result<QuadGrid> {
        let aperture_area = r.read_f64::<LittleEndian>()?;
        let mut points = Vec::with_capacity(n);
        let mut combined_weights = Vec::with_capacity(n);
        for _ in 0..n {
            let p = [
                r.read_f64::<LittleEndian>()?,
                r.read_f64::<LittleEndian>()?,
                r.read_f64::<LittleEndian>()?,
            ];
            points.push(p);
            combined_weights.push(r.read_f64::<LittleEndian>()?);
        }
        Ok(QuadGrid {
            points,
            combined_weights,
            aperture_area,
        })
    };
    let bs_grid = read_grid(&mut r, tx_len)?;
    let user_grids = (0..users)
        .map(|_| read_grid(&mut r, rx_len))
        .collect::<Result<Vec<_>>>()?;
    let mut channels = Vec::with_capacity(users);
    for _ in 0..users {
        let mut h = CMatrix::zeros(rx_len, tx_len);
        for i in 0..rx_len {
            for j in 0..tx_len {
                let re = r.read_f64::<LittleEndian>()?;
                let im = r.read_f64::<LittleEndian>()?;
                h[(i, j)] = Complex64::new(re, im);
            }
        }
        channels.push(h);
    }
    let rx_weights = user_grids
        .first()
        .map(|g| DVector::from_vec(g.combined_weights.clone()))
        .unwrap_or_else(|| DVector::zeros(0));
    let link = SampledLink {
        channels,
        tx_weights: DVector::from_vec(bs_grid.combined_weights.clone()),
        rx_weights,
    };
    Ok((
        ChannelSet {
            link,
            bs_grid,
            user_grids,
        },
        tag,
    ))
}
