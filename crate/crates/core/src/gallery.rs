//! Bundled example models together with their reference results.
//!
//! Each example is a model file plus a TOML fixture listing the runs
//! (targets, starting points, branch settings) and, per solver variant, the
//! reference status, iteration count and solution. Values are compared at
//! the fixture's `value_tolerance`, iteration counts within
//! `iteration_tolerance`. A `deviation` note marks a reference entry this
//! implementation is known not to reproduce; such runs are reported but do
//! not count as mismatches.

use std::fs;
use std::path::Path;
use std::thread;

use serde::Deserialize;

use crate::builders::{build, parse_branch, parse_model};
use crate::elementary::{Mode, C64};
use crate::error::{Error, Result};
use crate::model::FactoredSystem;
use crate::report::{execute, format_vector, Check, RunRecord, RunReport};
use crate::solver::{SolverConfig, Status, Variant};

macro_rules! bundled {
    ($($id:literal),* $(,)?) => {
        &[$(
            BundledExample {
                id: $id,
                model: include_str!(concat!("../data/gallery/", $id, ".model")),
                fixture: include_str!(concat!("../data/gallery/", $id, ".toml")),
            },
        )*]
    };
}

#[derive(Debug, Clone, Copy)]
pub struct BundledExample<'a> {
    pub id: &'a str,
    pub model: &'a str,
    pub fixture: &'a str,
}

pub const EXAMPLES: &[BundledExample<'static>] =
    bundled!("ex1", "ex2", "ex3", "ex4", "ex5", "ex6", "ex7", "ex8", "ex10", "ex11", "ex12");

pub fn find(id: &str) -> Option<&'static BundledExample<'static>> {
    EXAMPLES.iter().find(|e| e.id == id)
}

fn default_max_iter() -> usize {
    50
}

fn default_tol() -> f64 {
    1e-5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub title: String,
    #[serde(default)]
    pub complex: bool,
    pub value_tolerance: f64,
    pub iteration_tolerance: usize,
    #[serde(default = "default_tol")]
    pub tol_dx_l1: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Accept the complex conjugate of a reference solution.
    #[serde(default)]
    pub conjugate_ok: bool,
    #[serde(rename = "run")]
    pub runs: Vec<RunSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub x0_imag: Option<Vec<f64>>,
    /// `"<slot>=<branch>"` overrides.
    #[serde(default)]
    pub branches: Vec<String>,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub factored: Option<Expectation>,
    #[serde(default)]
    pub newton: Option<Expectation>,
    #[serde(default, rename = "factored-aug")]
    pub augmented: Option<Expectation>,
}

impl RunSpec {
    pub fn start(&self) -> Vec<C64> {
        let im = self.x0_imag.clone().unwrap_or_default();
        self.x0
            .iter()
            .enumerate()
            .map(|(i, &re)| C64::new(re, im.get(i).copied().unwrap_or(0.0)))
            .collect()
    }

    pub fn expectations(&self) -> Vec<(Variant, &Expectation)> {
        [
            (Variant::TwoStep, &self.factored),
            (Variant::NewtonBaseline, &self.newton),
            (Variant::TwoStepAugmented, &self.augmented),
        ]
        .into_iter()
        .filter_map(|(v, e)| e.as_ref().map(|e| (v, e)))
        .collect()
    }

    pub fn display_label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            let mut parts = Vec::new();
            if let Some(p) = &self.p {
                parts.push(format!("p={}", join(p)));
            }
            parts.extend(self.branches.iter().cloned());
            if parts.is_empty() {
                "-".into()
            } else {
                parts.join(" ")
            }
        })
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    /// A status label, or `converged` / `failed` for any status of that class.
    pub status: String,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    #[serde(default)]
    pub x_imag: Option<Vec<f64>>,
    #[serde(default)]
    pub deviation: Option<String>,
}

impl Expectation {
    pub fn status_matches(&self, status: Status) -> bool {
        match self.status.as_str() {
            "converged" => status.converged(),
            "failed" => !status.converged(),
            label => status.label() == label,
        }
    }

    pub fn reference(&self) -> Option<Vec<C64>> {
        let re = self.x.as_ref()?;
        let im = self.x_imag.clone().unwrap_or_default();
        Some(
            re.iter()
                .enumerate()
                .map(|(i, &r)| C64::new(r, im.get(i).copied().unwrap_or(0.0)))
                .collect(),
        )
    }

    /// Iteration count within the fixture tolerance, or no count given.
    pub fn iterations_match(&self, iterations: usize, fixture: &Fixture) -> bool {
        self.iterations
            .is_none_or(|it| iterations.abs_diff(it) <= fixture.iteration_tolerance)
    }

    /// Solution within the fixture tolerance, or no solution given. The
    /// leading components are compared; conjugates count when allowed.
    pub fn value_matches(&self, x: &[C64], fixture: &Fixture) -> bool {
        let Some(reference) = self.reference() else {
            return true;
        };
        let close = |conj: bool| {
            reference.iter().zip(x).all(|(r, x)| {
                let x = if conj { x.conj() } else { *x };
                (x.re - r.re).abs() <= fixture.value_tolerance && (x.im - r.im).abs() <= fixture.value_tolerance
            })
        };
        x.len() >= reference.len() && (close(false) || (fixture.conjugate_ok && close(true)))
    }

    /// Compares a record to this reference, ignoring any deviation note.
    pub fn compare(&self, record: &RunRecord, fixture: &Fixture) -> Vec<String> {
        let mut problems = Vec::new();
        if !self.status_matches(record.status) {
            problems.push(format!("status {} (expected {})", record.status, self.status));
        }
        if !self.iterations_match(record.iterations, fixture) {
            problems.push(format!(
                "{} iterations (expected {} ± {})",
                record.iterations,
                self.iterations.unwrap_or_default(),
                fixture.iteration_tolerance
            ));
        }
        if !self.value_matches(&record.x_final, fixture) {
            let reference = self.reference().unwrap_or_default();
            problems.push(format!(
                "x = {} (expected {})",
                format_vector(&record.x_final[..reference.len().min(record.x_final.len())], 4),
                format_vector(&reference, 4)
            ));
        }
        problems
    }

    pub fn check(&self, record: &RunRecord, fixture: &Fixture) -> Check {
        let problems = self.compare(record, fixture);
        match (&self.deviation, problems.is_empty()) {
            (_, true) => Check::Match,
            (Some(note), false) => Check::Documented(format!("{}; {note}", problems.join(", "))),
            (None, false) => Check::Mismatch(problems.join(", ")),
        }
    }
}

impl BundledExample<'_> {
    pub fn fixture(&self) -> Result<Fixture> {
        toml::from_str(self.fixture).map_err(|e| Error::Model(format!("fixture {}: {e}", self.id)))
    }

    pub fn system(&self) -> Result<FactoredSystem> {
        build(&parse_model(self.model)?)
    }
}

/// System for one run: base model with the run's target and branch overrides.
pub fn run_system(base: &FactoredSystem, run: &RunSpec) -> Result<FactoredSystem> {
    let mut sys = match &run.p {
        Some(p) => base.with_real_target(p)?,
        None => base.clone(),
    };
    for spec in &run.branches {
        let (slot, branch) = parse_slot_branch(spec)?;
        sys = sys.with_branch(slot, branch)?;
    }
    Ok(sys)
}

/// Parses `<slot>=<branch>`.
pub fn parse_slot_branch(spec: &str) -> Result<(usize, crate::elementary::BranchSelector)> {
    let (slot, branch) = spec
        .split_once('=')
        .ok_or_else(|| Error::Model(format!("branch override `{spec}` is not <slot>=<branch>")))?;
    let slot = slot
        .trim()
        .parse()
        .map_err(|_| Error::Model(format!("branch override `{spec}`: bad slot index")))?;
    Ok((slot, parse_branch(branch.trim())?))
}

pub fn config_for(fixture: &Fixture, variant: Variant) -> SolverConfig {
    SolverConfig {
        tol_dx_l1: fixture.tol_dx_l1,
        max_iter: fixture.max_iter,
        mode: if fixture.complex { Mode::Complex } else { Mode::Real },
        ..SolverConfig::default().with_variant(variant)
    }
}

/// Every run of one example, each variant that has a reference. With
/// `variants` set only those variants run, and unreferenced ones are
/// included unchecked.
pub fn run_example(example: &BundledExample, variants: Option<&[Variant]>) -> Result<Vec<RunRecord>> {
    let fixture = example.fixture()?;
    let base = example.system()?;
    let mut records = Vec::new();
    for run in &fixture.runs {
        let sys = run_system(&base, run)?;
        let x0 = run.start();
        let expected = run.expectations();
        let selected: Vec<Variant> = match variants {
            Some(v) => v.to_vec(),
            None => expected.iter().map(|(v, _)| *v).collect(),
        };
        for variant in selected {
            let cfg = config_for(&fixture, variant);
            let (mut record, _) = execute(&sys, &x0, &cfg, example.id, &run.display_label())?;
            record.check = expected
                .iter()
                .find(|(v, _)| *v == variant)
                .map(|(_, e)| e.check(&record, &fixture));
            records.push(record);
        }
    }
    Ok(records)
}

/// Example sources read from `dir`: every `<id>.toml` with a sibling
/// `<id>.model`, ordered by id. Returns `(id, model, fixture)` texts.
pub fn read_dir(dir: &Path) -> Result<Vec<(String, String, String)>> {
    let io = |path: &Path, e: std::io::Error| Error::Model(format!("{}: {e}", path.display()));
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io(dir, e))? {
        let path = entry.map_err(|e| io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let model_path = path.with_extension("model");
        let model = fs::read_to_string(&model_path).map_err(|e| io(&model_path, e))?;
        let fixture = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
        out.push((id.to_string(), model, fixture));
    }
    out.sort_by(|a, b| natural_key(&a.0).cmp(&natural_key(&b.0)));
    Ok(out)
}

/// Orders `ex2` before `ex10`.
fn natural_key(id: &str) -> (String, u64) {
    let digits = id.len() - id.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let (head, tail) = id.split_at(id.len() - digits);
    (head.to_string(), tail.parse().unwrap_or(0))
}

/// Runs the selected bundled examples concurrently; records keep gallery order.
pub fn run_gallery(selector: &str, variants: Option<&[Variant]>) -> Result<RunReport> {
    run_gallery_from(EXAMPLES, selector, variants)
}

/// [`run_gallery`] over an arbitrary example set.
pub fn run_gallery_from(examples: &[BundledExample<'_>], selector: &str, variants: Option<&[Variant]>) -> Result<RunReport> {
    let chosen: Vec<&BundledExample> = if selector == "all" {
        examples.iter().collect()
    } else {
        let mut out = Vec::new();
        for id in selector.split(',') {
            let id = id.trim();
            out.push(
                examples
                    .iter()
                    .find(|e| e.id == id)
                    .ok_or_else(|| Error::Model(format!("no example `{id}`")))?,
            );
        }
        out
    };
    let results: Vec<Result<Vec<RunRecord>>> = thread::scope(|s| {
        let handles: Vec<_> = chosen
            .iter()
            .map(|ex| s.spawn(move || run_example(ex, variants)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Model("example run panicked".into()))))
            .collect()
    });
    let mut report = RunReport::default();
    for r in results {
        report.records.extend(r?);
    }
    Ok(report)
}
