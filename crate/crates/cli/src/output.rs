//! Result rows and their CSV form.

use std::io::Write;

use anyhow::Result;
use serde::Serialize;

use crate::config::Method;
use crate::methods::Outcome;

/// Column order of every results CSV.
pub const RESULT_HEADER: [&str; 11] = [
    "method",
    "seed",
    "variable",
    "value",
    "status",
    "sum_se_bits",
    "per_user_se_bits",
    "iterations",
    "converged",
    "seconds",
    "error",
];

/// One (method, swept value, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: Method,
    pub seed: u64,
    pub variable: String,
    pub value: f64,
    /// `ok` or `failed`.
    pub status: String,
    pub sum_se_bits: f64,
    /// Per-user values in bits, joined with `;`.
    pub per_user_se_bits: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
    pub error: String,
}

impl ResultRow {
    /// Row for a finished run. The sum is formed from the per-user values so
    /// the two columns agree to rounding.
    pub fn ok(outcome: &Outcome, seed: u64, variable: &str, value: f64) -> Self {
        let per_user = outcome.se.per_user_bits();
        Self {
            method: outcome.method,
            seed,
            variable: variable.to_string(),
            value,
            status: "ok".into(),
            sum_se_bits: per_user.iter().sum(),
            per_user_se_bits: per_user,
            iterations: outcome.iterations,
            converged: outcome.converged,
            seconds: outcome.seconds,
            error: String::new(),
        }
    }

    pub fn failed(method: Method, seed: u64, variable: &str, value: f64, error: &anyhow::Error) -> Self {
        Self {
            method,
            seed,
            variable: variable.to_string(),
            value,
            status: "failed".into(),
            sum_se_bits: f64::NAN,
            per_user_se_bits: Vec::new(),
            iterations: 0,
            converged: false,
            seconds: 0.0,
            error: format!("{error:#}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn record(&self) -> [String; 11] {
        let per_user: Vec<String> = self.per_user_se_bits.iter().map(f64::to_string).collect();
        [
            self.method.to_string(),
            self.seed.to_string(),
            self.variable.clone(),
            self.value.to_string(),
            self.status.clone(),
            self.sum_se_bits.to_string(),
            per_user.join(";"),
            self.iterations.to_string(),
            self.converged.to_string(),
            self.seconds.to_string(),
            self.error.clone(),
        ]
    }
}

/// Writes `rows` under [`RESULT_HEADER`]. With `with_timing` false the
/// seconds column is left empty so that reruns compare byte for byte.
pub fn write_rows<W: Write>(w: W, rows: &[ResultRow], with_timing: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RESULT_HEADER)?;
    for row in rows {
        let mut rec = row.record();
        if !with_timing {
            rec[9].clear();
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Mean sum SE per (method, value) over successful rows, in value order.
pub fn mean_by_value(rows: &[ResultRow], method: Method) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for r in rows.iter().filter(|r| r.method == method && r.is_ok()) {
        match out.iter_mut().find(|(v, _, _)| *v == r.value) {
            Some(slot) => {
                slot.1 += r.sum_se_bits;
                slot.2 += 1;
            }
            None => out.push((r.value, r.sum_se_bits, 1)),
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.into_iter().map(|(v, s, n)| (v, s / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use capa_core::solver::SpectralEfficiency;

    fn outcome() -> Outcome {
        Outcome {
            method: Method::Proposed,
            se: SpectralEfficiency {
                per_user: vec![1.0, 2.0],
                sum: 3.0,
            },
            iterations: 4,
            converged: true,
            seconds: 0.5,
            power: 1.0,
        }
    }

    #[test]
    fn sum_matches_per_user() {
        let row = ResultRow::ok(&outcome(), 7, "budget", 10.0);
        let total: f64 = row.per_user_se_bits.iter().sum();
        assert!((row.sum_se_bits - total).abs() < 1e-9);
        assert!((row.sum_se_bits - 3.0 / std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn csv_layout_and_quoting() {
        let ok = ResultRow::ok(&outcome(), 7, "budget", 10.0);
        let bad = ResultRow::failed(Method::Fourier, 8, "budget", 20.0, &anyhow::anyhow!("bad, \"very\" bad"));
        let mut buf = Vec::new();
        write_rows(&mut buf, &[ok, bad], false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESULT_HEADER.join(","));
        assert!(lines[1].starts_with("proposed,7,budget,10,ok,"));
        assert!(lines[1].ends_with(",4,true,,"));
        assert!(lines[2].ends_with(",\"bad, \"\"very\"\" bad\""));
    }

    #[test]
    fn means_skip_failures() {
        let mut rows = vec![
            ResultRow::ok(&outcome(), 1, "budget", 2.0),
            ResultRow::ok(&outcome(), 2, "budget", 1.0),
            ResultRow::failed(Method::Proposed, 3, "budget", 1.0, &anyhow::anyhow!("x")),
        ];
        rows[1].sum_se_bits = 1.0;
        let m = mean_by_value(&rows, Method::Proposed);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0], (1.0, 1.0));
        assert!(mean_by_value(&rows, Method::Spda).is_empty());
    }
}
