//! Scenario and sweep files.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use capa_core::{ScenarioFile, SolverConfig};
use serde::{Deserialize, Serialize};

/// A comparison method selectable with `--methods`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Proposed,
    Fourier,
    /// Element array with per-user SVD and water-filling.
    Spda,
    /// Element array solved with the WMMSE updates.
    SpdaWmmse,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::Fourier, Method::Spda, Method::SpdaWmmse];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Fourier => "fourier",
            Method::Spda => "spda",
            Method::SpdaWmmse => "spda-wmmse",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                format!("unknown method `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Parses a comma-separated method list, keeping the given order and
/// dropping repeats.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let m: Method = part.parse().map_err(anyhow::Error::msg)?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        bail!("`--methods` is empty");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Transmit current budget.
    Budget,
    /// Side length of every (square) user aperture.
    UserApertureSize,
    /// Side length of the (square) base-station aperture.
    BsApertureSize,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Budget => "budget",
            SweepVariable::UserApertureSize => "user_aperture_size",
            SweepVariable::BsApertureSize => "bs_aperture_size",
        }
    }

    /// The scenario file with this variable set to `value`.
    pub fn apply(self, base: &ScenarioFile, value: f64) -> ScenarioFile {
        let mut f = base.clone();
        match self {
            SweepVariable::Budget => f.budget = value,
            SweepVariable::UserApertureSize => f.set_user_size(value),
            SweepVariable::BsApertureSize => f.set_bs_size(value),
        }
        f
    }
}

/// Method parameters shared by every command.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodOptions {
    /// Fourier truncation per axis; `ceil(L_B / wavelength)` when absent.
    pub fourier_truncation: Option<usize>,
    /// Element spacing in metres; half a wavelength when absent.
    pub spda_spacing: Option<f64>,
}

/// A sweep file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "proposed_only")]
    pub methods: Vec<Method>,
    #[serde(default = "ScenarioFile::desk")]
    pub scenario: ScenarioFile,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub options: MethodOptions,
}

fn one() -> usize {
    1
}

fn proposed_only() -> Vec<Method> {
    vec![Method::Proposed]
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            bail!("`values` must not be empty");
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            bail!("`values` must be finite");
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            bail!("`values` must be strictly increasing");
        }
        if self.repetitions == 0 {
            bail!("`repetitions` must be at least 1");
        }
        if self.methods.is_empty() {
            bail!("`methods` must not be empty");
        }
        self.solver.validate()?;
        Ok(())
    }

    /// The budget sweep used when no file is given.
    pub fn default_budget_sweep() -> Self {
        Self {
            variable: SweepVariable::Budget,
            values: vec![200.0, 400.0, 600.0, 800.0, 1000.0],
            repetitions: 1,
            methods: proposed_only(),
            scenario: ScenarioFile::desk(),
            solver: SolverConfig::default(),
            options: MethodOptions::default(),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Reads a scenario file; the error carries the line and column of the
/// offending field.
pub fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    let text = read(path)?;
    serde_json::from_str(&text).with_context(|| format!("invalid scenario file {}", path.display()))
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec> {
    let text = read(path)?;
    let spec: SweepSpec =
        serde_json::from_str(&text).with_context(|| format!("invalid sweep file {}", path.display()))?;
    spec.validate().with_context(|| format!("invalid sweep file {}", path.display()))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("spda_wmmse".parse::<Method>().is_err());
    }

    #[test]
    fn method_lists() {
        assert_eq!(
            parse_methods("fourier, proposed,fourier").unwrap(),
            vec![Method::Fourier, Method::Proposed]
        );
        assert!(parse_methods("proposed,best").is_err());
        assert!(parse_methods(" , ").is_err());
    }

    #[test]
    fn sweep_defaults_and_validation() {
        let spec: SweepSpec = serde_json::from_str(r#"{"variable": "budget", "values": [1, 2]}"#).unwrap();
        assert_eq!(spec.repetitions, 1);
        assert_eq!(spec.methods, vec![Method::Proposed]);
        assert_eq!(spec.scenario, ScenarioFile::desk());
        spec.validate().unwrap();

        let mut bad = spec.clone();
        bad.values = vec![2.0, 2.0];
        assert!(bad.validate().is_err());
        bad.values.clear();
        assert!(bad.validate().is_err());
        let mut bad = spec;
        bad.repetitions = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sweep_variables_touch_the_right_field() {
        let base = ScenarioFile::desk();
        assert_eq!(SweepVariable::Budget.apply(&base, 5.0).budget, 5.0);
        let f = SweepVariable::UserApertureSize.apply(&base, 0.25);
        assert_eq!(f.placement.unwrap().lx, 0.25);
        let f = SweepVariable::BsApertureSize.apply(&base, 0.75);
        assert_eq!((f.bs.lx, f.bs.ly), (0.75, 0.75));
    }
}
