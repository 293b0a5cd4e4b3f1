//! Geometry, physical constants and derived sizes for one experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::Point3;

/// Free-space intrinsic impedance used by the default scenarios.
pub const ETA_FREE_SPACE: f64 = 120.0 * std::f64::consts::PI;

/// Rectangular aperture parallel to the global xy-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aperture {
    pub center: Point3,
    pub lx: f64,
    pub ly: f64,
}

impl Aperture {
    pub fn new(center: Point3, lx: f64, ly: f64) -> Self {
        Self { center, lx, ly }
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Closed-rectangle membership test; `tol` absorbs round-off on the
    /// boundary and on the plane height.
    pub fn contains(&self, p: Point3, tol: f64) -> bool {
        (p[0] - self.center[0]).abs() <= self.lx / 2.0 + tol
            && (p[1] - self.center[1]).abs() <= self.ly / 2.0 + tol
            && (p[2] - self.center[2]).abs() <= tol
    }
}

/// A fully resolved experiment instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub bs: Aperture,
    pub users: Vec<Aperture>,
    pub wavelength: f64,
    pub impedance: f64,
    pub noise_variance: f64,
    pub budget: f64,
    pub streams: usize,
    pub bs_order: usize,
    pub user_order: usize,
    pub seed: u64,
}

impl Scenario {
    /// Small scenario that runs in well under a second: three users with
    /// one-wavelength apertures 2-3 m in front of a 0.5 m base station.
    pub fn desk(seed: u64) -> Self {
        let users = place_users(3, 1.0, 2.0, 3.0, seed)
            .into_iter()
            .map(|c| Aperture::new(c, 0.125, 0.125))
            .collect();
        Self {
            bs: Aperture::new([0.0; 3], 0.5, 0.5),
            users,
            wavelength: 0.125,
            impedance: ETA_FREE_SPACE,
            noise_variance: 5.6e-3,
            budget: 1000.0,
            streams: 2,
            bs_order: 10,
            user_order: 10,
            seed,
        }
    }

    /// Full-size setup: 2 m base station, 0.5 m users
    /// 20-30 m away, streams and user order from the sizing rules.
    pub fn full_scale(seed: u64) -> Self {
        let (lb, lu, lambda, m) = (2.0, 0.5, 0.125, 10);
        let users = place_users(3, 5.0, 20.0, 30.0, seed)
            .into_iter()
            .map(|c| Aperture::new(c, lu, lu))
            .collect();
        Self {
            bs: Aperture::new([0.0; 3], lb, lb),
            users,
            wavelength: lambda,
            impedance: ETA_FREE_SPACE,
            noise_variance: 5.6e-3,
            budget: 1000.0,
            streams: stream_count(lb, lb, lu, lu, lambda),
            bs_order: m,
            user_order: user_quadrature_order(m, lb, lu),
            seed,
        }
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("`{name}` must be positive and finite (got {v})")))
            }
        };
        if self.users.is_empty() {
            return Err(invalid("`users` must contain at least one aperture"));
        }
        if self.streams == 0 {
            return Err(invalid("`streams` must be at least 1"));
        }
        if self.bs_order == 0 || self.user_order == 0 {
            return Err(invalid("`bs_order` and `user_order` must be at least 1"));
        }
        positive("wavelength", self.wavelength)?;
        positive("impedance", self.impedance)?;
        positive("noise_variance", self.noise_variance)?;
        positive("budget", self.budget)?;
        positive("bs.lx", self.bs.lx)?;
        positive("bs.ly", self.bs.ly)?;
        if self.bs.center[2] != 0.0 {
            return Err(invalid("`bs.center` must lie in the z = 0 plane"));
        }
        for (k, u) in self.users.iter().enumerate() {
            positive(&format!("users[{k}].lx"), u.lx)?;
            positive(&format!("users[{k}].ly"), u.ly)?;
            if !(u.center[2] > 0.0) {
                return Err(invalid(format!(
                    "`users[{k}].center` must have z > 0 (got {})",
                    u.center[2]
                )));
            }
        }
        Ok(())
    }
}

/// Random user placement box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub count: usize,
    pub xy_half_range: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub lx: f64,
    pub ly: f64,
}

/// On-disk scenario description. Either `users` or `placement` must be given;
/// `streams` and `user_order` fall back to the sizing rules when omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub bs: Aperture,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users: Option<Vec<Aperture>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
    pub wavelength: f64,
    pub impedance: f64,
    pub noise_variance: f64,
    pub budget: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub streams: Option<usize>,
    pub bs_order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_order: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioFile {
    /// Desk-scale defaults with random placement, so that every seed draws
    /// a fresh user layout.
    pub fn desk() -> Self {
        let s = Scenario::desk(0);
        Self {
            bs: s.bs,
            users: None,
            placement: Some(Placement {
                count: 3,
                xy_half_range: 1.0,
                z_min: 2.0,
                z_max: 3.0,
                lx: 0.125,
                ly: 0.125,
            }),
            wavelength: s.wavelength,
            impedance: s.impedance,
            noise_variance: s.noise_variance,
            budget: s.budget,
            streams: Some(s.streams),
            bs_order: s.bs_order,
            user_order: Some(s.user_order),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolves the description into a concrete scenario. `seed` overrides
    /// the file's seed when given.
    pub fn resolve(&self, seed: Option<u64>) -> Result<Scenario> {
        let seed = seed.unwrap_or(self.seed);
        let users = match (&self.users, &self.placement) {
            (Some(u), None) => u.clone(),
            (None, Some(p)) => {
                if p.count == 0 {
                    return Err(invalid("`placement.count` must be at least 1"));
                }
                if p.z_min > p.z_max {
                    return Err(invalid("`placement.z_min` must not exceed `placement.z_max`"));
                }
                place_users(p.count, p.xy_half_range, p.z_min, p.z_max, seed)
                    .into_iter()
                    .map(|c| Aperture::new(c, p.lx, p.ly))
                    .collect()
            }
            (Some(_), Some(_)) => {
                return Err(invalid("give either `users` or `placement`, not both"))
            }
            (None, None) => return Err(invalid("one of `users` or `placement` is required")),
        };
        let first = users.first().copied().ok_or_else(|| invalid("`users` is empty"))?;
        let streams = match self.streams {
            Some(d) => d,
            None => stream_count(self.bs.lx, self.bs.ly, first.lx, first.ly, self.wavelength),
        };
        let user_order = match self.user_order {
            Some(n) => n,
            None => user_quadrature_order(self.bs_order, self.bs.lx, first.lx),
        };
        let s = Scenario {
            bs: self.bs,
            users,
            wavelength: self.wavelength,
            impedance: self.impedance,
            noise_variance: self.noise_variance,
            budget: self.budget,
            streams,
            bs_order: self.bs_order,
            user_order,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    /// Sets the side lengths of every user aperture.
    pub fn set_user_size(&mut self, side: f64) {
        if let Some(p) = self.placement.as_mut() {
            p.lx = side;
            p.ly = side;
        }
        if let Some(users) = self.users.as_mut() {
            for u in users {
                u.lx = side;
                u.ly = side;
            }
        }
    }

    pub fn set_bs_size(&mut self, side: f64) {
        self.bs.lx = side;
        self.bs.ly = side;
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        Self {
            bs: s.bs,
            users: Some(s.users.clone()),
            placement: None,
            wavelength: s.wavelength,
            impedance: s.impedance,
            noise_variance: s.noise_variance,
            budget: s.budget,
            streams: Some(s.streams),
            bs_order: s.bs_order,
            user_order: Some(s.user_order),
            seed: s.seed,
        }
    }
}

/// Maps a point in a user's local frame to global coordinates.
pub fn local_to_global(local: Point3, user_center: Point3) -> Point3 {
    [
        local[0] + user_center[0],
        local[1] + user_center[1],
        local[2] + user_center[2],
    ]
}

/// Draws `k` user centres uniformly from the box
/// `(-r, r) x (-r, r) x (z_min, z_max)`.
pub fn place_users(k: usize, xy_half_range: f64, z_min: f64, z_max: f64, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let x = uniform(&mut rng, -xy_half_range, xy_half_range);
            let y = uniform(&mut rng, -xy_half_range, xy_half_range);
            let z = uniform(&mut rng, z_min, z_max);
            [x, y, z]
        })
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    if lo == hi {
        lo
    } else {
        lo + (hi - lo) * u
    }
}

/// Number of streams that saturates the spatial degrees of freedom of the
/// smaller aperture.
pub fn stream_count(lbx: f64, lby: f64, lux: f64, luy: f64, wavelength: f64) -> usize {
    let dof = |lx: f64, ly: f64| {
        let nx = 2 * (lx / wavelength).ceil() as usize + 1;
        let ny = 2 * (ly / wavelength).ceil() as usize + 1;
        nx * ny
    };
    dof(lbx, lby).min(dof(lux, luy))
}

/// Default user-side quadrature order, `ceil(L_B / L_U) * M`.
pub fn user_quadrature_order(bs_order: usize, lbx: f64, lux: f64) -> usize {
    (lbx / lux).ceil() as usize * bs_order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_to_global_adds_center() {
        assert_eq!(local_to_global([0.0; 3], [1.0, 2.0, 20.0]), [1.0, 2.0, 20.0]);
        let g = local_to_global([0.1, -0.1, 0.0], [1.0, 2.0, 20.0]);
        assert!((g[0] - 1.1).abs() < 1e-15 && (g[1] - 1.9).abs() < 1e-15 && g[2] == 20.0);
        let back = [g[0] - 1.0, g[1] - 2.0, g[2] - 20.0];
        assert!((back[0] - 0.1).abs() < 1e-15 && (back[1] + 0.1).abs() < 1e-15 && back[2] == 0.0);
    }

    #[test]
    fn placement_is_deterministic_and_bounded() {
        let a = place_users(3, 5.0, 20.0, 30.0, 7);
        assert_eq!(a, place_users(3, 5.0, 20.0, 30.0, 7));
        assert_ne!(a, place_users(3, 5.0, 20.0, 30.0, 8));
        for p in &a {
            assert!(p[0].abs() < 5.0 && p[1].abs() < 5.0);
            assert!(p[2] >= 20.0 && p[2] < 30.0);
        }
        for p in place_users(4, 1.0, 25.0, 25.0, 1) {
            assert_eq!(p[2], 25.0);
        }
    }

    #[test]
    fn stream_count_rules() {
        assert_eq!(stream_count(2.0, 2.0, 2.0, 2.0, 0.125), 1089);
        assert_eq!(stream_count(2.0, 2.0, 0.5, 0.5, 0.125), 81);
        assert_eq!(stream_count(0.125, 0.125, 0.125, 0.125, 0.125), 9);
    }

    #[test]
    fn user_order_rule() {
        assert_eq!(user_quadrature_order(10, 2.0, 0.5), 40);
        assert_eq!(user_quadrature_order(7, 0.3, 0.3), 7);
        assert_eq!(user_quadrature_order(6, 0.5, 0.125), 24);
    }

    #[test]
    fn full_scale_sizes() {
        let s = Scenario::full_scale(1);
        assert_eq!(s.streams, 81);
        assert_eq!(s.user_order, 40);
        s.validate().unwrap();
    }

    #[test]
    fn validation_names_fields() {
        let mut s = Scenario::desk(0);
        s.noise_variance = 0.0;
        let e = s.validate().unwrap_err().to_string();
        assert!(e.contains("noise_variance"), "{e}");
        let mut s = Scenario::desk(0);
        s.users[1].center[2] = 0.0;
        assert!(s.validate().unwrap_err().to_string().contains("users[1]"));
        let mut s = Scenario::desk(0);
        s.users.clear();
        assert!(s.validate().is_err());
    }

    #[test]
    fn file_resolution_fills_derived_fields() {
        let mut f = ScenarioFile::desk();
        f.streams = None;
        f.user_order = None;
        let s = f.resolve(Some(3)).unwrap();
        assert_eq!(s.streams, 9);
        assert_eq!(s.user_order, 40);
        assert_eq!(s.seed, 3);
        assert_eq!(ScenarioFile::desk().resolve(Some(5)).unwrap(), Scenario::desk(5));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = serde_json::to_value(Scenario::desk(0)).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<Scenario>(v).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn json_round_trip(seed in any::<u64>(), budget in 1.0f64..1e4, d in 1usize..9) {
                let mut s = Scenario::desk(seed);
                s.budget = budget;
                s.streams = d;
                let text = serde_json::to_string(&s).unwrap();
                let back: Scenario = serde_json::from_str(&text).unwrap();
                prop_assert_eq!(&back, &s);
                let via_file = ScenarioFile::from_json(&text).unwrap().resolve(None).unwrap();
                prop_assert_eq!(via_file, s);
            }

            #[test]
            fn stream_count_monotone(
                a in 0.01f64..3.0, b in 0.01f64..3.0, c in 0.01f64..3.0, e in 0.01f64..3.0,
                grow in 0.0f64..1.0, which in 0usize..4,
            ) {
                let mut sides = [a, b, c, e];
                let before = stream_count(sides[0], sides[1], sides[2], sides[3], 0.125);
                sides[which] += grow;
                let after = stream_count(sides[0], sides[1], sides[2], sides[3], 0.125);
                prop_assert!(after >= before);
            }
        }
    }
}
