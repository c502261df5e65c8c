//! Run records and their table / JSON rendering.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::elementary::C64;
use crate::error::Result;
use crate::model::FactoredSystem;
use crate::solver::{solve, SolveOutcome, SolverConfig, Status};

/// Result of comparing a run against a stored expectation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "result", content = "detail", rename_all = "kebab-case")]
pub enum Check {
    Match,
    Mismatch(String),
    /// Differs from the reference in a way recorded in the fixture.
    Documented(String),
}

impl Check {
    pub fn label(&self) -> &'static str {
        match self {
            Check::Match => "ok",
            Check::Mismatch(_) => "MISMATCH",
            Check::Documented(_) => "documented",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub model: String,
    /// Free-form run label, e.g. the branch setting.
    pub run: String,
    pub variant: String,
    pub p: Vec<f64>,
    #[serde(serialize_with = "complex_list")]
    pub x0: Vec<C64>,
    pub status: Status,
    pub iterations: usize,
    #[serde(serialize_with = "complex_list")]
    pub x_final: Vec<C64>,
    pub wall_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escalated_at: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<Check>,
}

fn complex_list<S: serde::Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// Solves `sys` from declared-variable guess `x0` and records the run,
/// keeping the full outcome for traces.
pub fn execute(
    sys: &FactoredSystem,
    x0: &[C64],
    cfg: &SolverConfig,
    model: &str,
    run: &str,
) -> Result<(RunRecord, SolveOutcome)> {
    let start = Instant::now();
    let internal = sys.initial_point(x0)?;
    let outcome = solve(sys, &internal, cfg)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let record = RunRecord {
        model: model.to_string(),
        run: run.to_string(),
        variant: cfg.variant.label().to_string(),
        p: sys.p().iter().map(|v| v.re).collect(),
        x0: x0.to_vec(),
        status: outcome.status,
        iterations: outcome.iterations,
        x_final: outcome.x_final.clone(),
        wall_ms,
        escalated_at: outcome.escalated_at,
        detail: outcome.detail.clone(),
        check: None,
    };
    Ok((record, outcome))
}

/// Compact complex formatting: `1.3803`, `0.7854+0.3466i`.
pub fn format_complex(z: C64, digits: usize) -> String {
    if !(z.re.abs() < 1e6 && z.im.abs() < 1e6) {
        return if z.im == 0.0 {
            format!("{:.digits$e}", z.re)
        } else {
            format!("{:.digits$e}{:+.digits$e}i", z.re, z.im)
        };
    }
    let scale = 0.5 * 10f64.powi(-(digits as i32));
    let re = if z.re.abs() < scale { 0.0 } else { z.re };
    if z.im.abs() < scale {
        format!("{re:.digits$}")
    } else {
        let sign = if z.im < 0.0 { '-' } else { '+' };
        format!("{re:.digits$}{sign}{:.digits$}i", z.im.abs())
    }
}

pub fn format_vector(v: &[C64], digits: usize) -> String {
    let parts: Vec<_> = v.iter().map(|z| format_complex(*z, digits)).collect();
    if parts.len() == 1 {
        parts.into_iter().next().unwrap_or_default()
    } else {
        format!("({})", parts.join(", "))
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunReport {
    pub records: Vec<RunRecord>,
}

impl RunReport {
    pub fn mismatches(&self) -> usize {
        self.records
            .iter()
            .filter(|r| matches!(r.check, Some(Check::Mismatch(_))))
            .count()
    }

    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.status.converged())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// Aligned text table; the wall-time column is omitted when `timings` is false.
    pub fn to_table(&self, timings: bool) -> String {
        let checked = self.records.iter().any(|r| r.check.is_some());
        let mut header = vec!["model", "run", "variant", "x0", "status", "iter", "x"];
        if timings {
            header.push("ms");
        }
        if checked {
            header.push("check");
        }
        let rows: Vec<Vec<String>> = self
            .records
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.model.clone(),
                    r.run.clone(),
                    r.variant.clone(),
                    format_vector(&r.x0, 4),
                    r.status.label().to_string(),
                    r.iterations.to_string(),
                    format_vector(&r.x_final, 4),
                ];
                if timings {
                    row.push(format!("{:.3}", r.wall_ms));
                }
                if checked {
                    row.push(r.check.as_ref().map_or("-", Check::label).to_string());
                }
                row
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        };
        line(&mut out, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        for row in &rows {
            line(&mut out, row);
        }
        for r in &self.records {
            match &r.check {
                Some(Check::Mismatch(why)) => {
                    let _ = writeln!(out, "mismatch  {} {} {}: {why}", r.model, r.run, r.variant);
                }
                Some(Check::Documented(why)) => {
                    let _ = writeln!(out, "note      {} {} {}: {why}", r.model, r.run, r.variant);
                }
                _ => {}
            }
        }
        out
    }
}
