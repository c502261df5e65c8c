use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use factored::builders::{build, parse_model};
use factored::gallery::{self, parse_slot_branch, BundledExample};
use factored::powerflow::{self, CaseFormat, PowerFlowCase, DEFAULT_MISMATCH_TOL};
use factored::report::{execute, format_complex, RunReport};
use factored::solver::write_trace_csv;
use factored::{Error, Mode, SolverConfig, Variant, C64};

const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "factored", version, about = "Factored two-step solver for nonlinear equation systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Factored,
    FactoredAug,
    Newton,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Factored => Variant::TwoStep,
            VariantArg::FactoredAug => Variant::TwoStepAugmented,
            VariantArg::Newton => Variant::NewtonBaseline,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model file.
    Solve {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "factored")]
        variant: VariantArg,
        /// Starting point (declared variables), comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x0: Option<Vec<f64>>,
        #[arg(long = "x0-imag", value_delimiter = ',', allow_negative_numbers = true)]
        x0_imag: Option<Vec<f64>>,
        /// Replaces the equation targets.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        p: Option<Vec<f64>>,
        /// Convergence threshold on the l1 norm of the step.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long = "max-iter", default_value_t = 50)]
        max_iter: usize,
        /// Work in complex arithmetic.
        #[arg(long)]
        complex: bool,
        /// Branch override `<slot>=<principal|neg_root|q<k>>`, repeatable.
        #[arg(long)]
        branch: Vec<String>,
        /// Per-iteration CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run bundled examples (`all`, an id such as `ex7`, or a comma list).
    Examples {
        #[arg(default_value = "all")]
        selector: String,
        /// Compare against the stored reference results.
        #[arg(long)]
        check: bool,
        /// Only run these variants.
        #[arg(long, value_enum)]
        variant: Vec<VariantArg>,
        #[arg(long)]
        json: bool,
        /// Include wall times in the table.
        #[arg(long)]
        timings: bool,
        /// Read `<id>.model` / `<id>.toml` pairs from this directory instead
        /// of the bundled gallery.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Power flow from flat start on a case file or bundled case name.
    Powerflow {
        case: String,
        #[arg(long, value_enum, default_value = "factored")]
        variant: VariantArg,
        /// Run the factored and Newton solvers side by side.
        #[arg(long)]
        compare: bool,
        /// Mismatch threshold.
        #[arg(long, default_value_t = DEFAULT_MISMATCH_TOL)]
        tol: f64,
        #[arg(long = "max-iter", default_value_t = 50)]
        max_iter: usize,
        /// Starting state: lines of `<bus> <V> <theta>`.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Per-iteration CSV trace (one file per variant with --compare).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

/// Failure that maps to an exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn with_file_context(path: &Path, e: Error) -> Failure {
    usage(format!("{}: {e}", path.display()))
}

fn write_trace(path: &Path, outcome: &factored::SolveOutcome, names: &[String]) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    write_trace_csv(outcome, names, BufWriter::new(file)).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    })
}

fn complex_start(re: &[f64], im: Option<&[f64]>) -> Result<Vec<C64>, Failure> {
    match im {
        Some(im) if im.len() != re.len() => Err(usage("--x0-imag must have as many entries as --x0")),
        Some(im) => Ok(re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect()),
        None => Ok(re.iter().map(|&a| C64::new(a, 0.0)).collect()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    model: &Path,
    variant: Variant,
    x0: Option<Vec<f64>>,
    x0_imag: Option<Vec<f64>>,
    p: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
    complex: bool,
    branches: &[String],
    trace: Option<&Path>,
    json: bool,
) -> Result<u8, Failure> {
    let text = read(model)?;
    let doc = parse_model(&text).map_err(|e| with_file_context(model, e))?;
    let mut sys = build(&doc).map_err(|e| with_file_context(model, e))?;
    if let Some(p) = &p {
        sys = sys.with_real_target(p)?;
    }
    for spec in branches {
        let (slot, branch) = parse_slot_branch(spec)?;
        sys = sys.with_branch(slot, branch)?;
    }
    let start = match (x0, doc.initial_guess()) {
        (Some(re), _) => complex_start(&re, x0_imag.as_deref())?,
        (None, Some(init)) if x0_imag.is_none() => init,
        (None, Some(init)) => {
            let re: Vec<f64> = init.iter().map(|z| z.re).collect();
            complex_start(&re, x0_imag.as_deref())?
        }
        (None, None) => return Err(usage("no starting point: pass --x0 or give every variable an init value")),
    };
    let complex = complex || start.iter().any(|z| z.im != 0.0);
    let cfg = SolverConfig {
        tol_dx_l1: tol,
        max_iter,
        mode: if complex { Mode::Complex } else { Mode::Real },
        ..SolverConfig::default().with_variant(variant)
    };
    let name = model.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let (record, outcome) = execute(&sys, &start, &cfg, name, "-")?;
    if let Some(path) = trace {
        write_trace(path, &outcome, sys.names())?;
    }
    let converged = record.status.converged();
    let report = RunReport { records: vec![record] };
    if json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_table(true));
        if let Some(detail) = &outcome.detail {
            println!("detail: {detail}");
        }
    }
    Ok(if converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn cmd_examples(
    selector: &str,
    check: bool,
    variants: &[VariantArg],
    json: bool,
    timings: bool,
    dir: Option<&Path>,
) -> Result<u8, Failure> {
    let variants: Vec<Variant> = variants.iter().map(|&v| v.into()).collect();
    let variants = (!variants.is_empty()).then_some(&variants[..]);
    let mut report = match dir {
        Some(dir) => {
            let sources = gallery::read_dir(dir)?;
            let examples: Vec<BundledExample> = sources
                .iter()
                .map(|(id, model, fixture)| BundledExample { id, model, fixture })
                .collect();
            gallery::run_gallery_from(&examples, selector, variants)?
        }
        None => gallery::run_gallery(selector, variants)?,
    };
    if !check {
        for r in &mut report.records {
            r.check = None;
        }
    }
    if json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_table(timings));
    }
    if check && report.mismatches() > 0 {
        eprintln!("{} run(s) differ from the reference results", report.mismatches());
        return Ok(EXIT_CHECK_FAILED);
    }
    Ok(0)
}

fn load_case(arg: &str) -> Result<PowerFlowCase, Failure> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(case) = powerflow::bundled_case(arg) {
            return Ok(case?);
        }
    }
    let text = read(path)?;
    CaseFormat::from_path(path)
        .parse(&text)
        .map_err(|e| with_file_context(path, e))
}

fn load_state(path: &Path, case: &PowerFlowCase) -> Result<Vec<C64>, Failure> {
    let text = read(path)?;
    let index = case.index_map()?;
    let mut v: Vec<f64> = case.buses.iter().map(|b| b.v.unwrap_or(1.0)).collect();
    let mut theta = vec![0.0; case.buses.len()];
    for (n, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        let parsed = match fields.as_slice() {
            [id, vm, th] => id
                .parse::<u32>()
                .ok()
                .zip(vm.parse::<f64>().ok())
                .zip(th.parse::<f64>().ok()),
            _ => None,
        };
        let ((id, vm), th) = parsed.ok_or_else(|| {
            usage(format!("{}:{}: expected `<bus> <V> <theta>`", path.display(), n + 1))
        })?;
        let &i = index
            .get(&id)
            .ok_or_else(|| usage(format!("{}:{}: unknown bus {id}", path.display(), n + 1)))?;
        if !(vm > 0.0) {
            return Err(usage(format!("{}:{}: V must be positive", path.display(), n + 1)));
        }
        v[i] = vm;
        theta[i] = th;
    }
    Ok(powerflow::state_vector(case, &v, &theta))
}

#[allow(clippy::too_many_arguments)]
fn cmd_powerflow(
    case_arg: &str,
    variant: Variant,
    compare: bool,
    tol: f64,
    max_iter: usize,
    from: Option<&Path>,
    trace: Option<&Path>,
    json: bool,
) -> Result<u8, Failure> {
    let case = load_case(case_arg)?;
    let sys = powerflow::build_powerflow(&case)?;
    let x0 = match from {
        Some(path) => load_state(path, &case)?,
        None => powerflow::flat_start(&case),
    };
    let variants = if compare {
        vec![Variant::TwoStep, Variant::NewtonBaseline]
    } else {
        vec![variant]
    };
    let name = Path::new(case_arg)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(case_arg)
        .to_string();
    let mut report = RunReport::default();
    let mut solutions = Vec::new();
    for &v in &variants {
        let cfg = SolverConfig {
            max_iter,
            ..powerflow::powerflow_config(v, tol)
        };
        let (mut record, outcome) = execute(&sys, &x0, &cfg, &name, "flat")?;
        if from.is_some() {
            record.run = "from-state".into();
        }
        if let Some(path) = trace {
            let path = if compare {
                path.with_extension(format!("{}.csv", v.label()))
            } else {
                path.to_path_buf()
            };
            write_trace(&path, &outcome, sys.names())?;
        }
        solutions.push((v, powerflow::extract_solution(&sys, &outcome, &case).ok(), outcome));
        report.records.push(record);
    }
    let converged = report.all_converged();
    if json {
        let body = serde_json::json!({
            "records": report.records,
            "solutions": solutions
                .iter()
                .map(|(v, s, _)| serde_json::json!({ "variant": v.label(), "solution": s }))
                .collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&body).expect("serializable"));
        return Ok(if converged { 0 } else { EXIT_NOT_CONVERGED });
    }

    println!("{} buses, {} branches, threshold |dp|inf < {tol:e}", case.buses.len(), case.branches.len());
    println!("{:<10} {:<16} {:>5}  {:>12}", "variant", "status", "iter", "mismatch");
    for (v, sol, outcome) in &solutions {
        println!(
            "{:<10} {:<16} {:>5}  {:>12}",
            v.label(),
            outcome.status.label(),
            outcome.iterations,
            sol.as_ref().map_or("-".into(), |s| format!("{:.3e}", s.mismatch_inf))
        );
    }
    if let Some((_, Some(sol), _)) = solutions.first() {
        println!();
        println!("{:>5}  {:<5}  {:>8}  {:>10}  {:>9}  {:>9}", "bus", "type", "V", "theta(deg)", "P", "Q");
        for (i, bus) in case.buses.iter().enumerate() {
            println!(
                "{:>5}  {:<5}  {:>8.5}  {:>10.4}  {:>9.5}  {:>9.5}",
                bus.id,
                bus.kind.keyword(),
                sol.v[i],
                sol.theta[i].to_degrees(),
                sol.p_injection[i],
                sol.q_injection[i]
            );
        }
        println!();
        println!("{:>5} {:>5}  {:>9}  {:>9}  {:>9}  {:>9}", "from", "to", "P_from", "Q_from", "P_to", "Q_to");
        for (br, f) in case.branches.iter().zip(&sol.branch_flows) {
            println!(
                "{:>5} {:>5}  {:>9.5}  {:>9.5}  {:>9.5}  {:>9.5}",
                br.from, br.to, f.p_from, f.q_from, f.p_to, f.q_to
            );
        }
        println!("\nlosses {} pu", format_complex(C64::new(sol.losses(), 0.0), 6));
    }
    Ok(if converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve {
            model,
            variant,
            x0,
            x0_imag,
            p,
            tol,
            max_iter,
            complex,
            branch,
            trace,
            json,
        } => cmd_solve(
            &model,
            variant.into(),
            x0,
            x0_imag,
            p,
            tol,
            max_iter,
            complex,
            &branch,
            trace.as_deref(),
            json,
        ),
        Command::Examples {
            selector,
            check,
            variant,
            json,
            timings,
            dir,
        } => cmd_examples(&selector, check, &variant, json, timings, dir.as_deref()),
        Command::Powerflow {
            case,
            variant,
            compare,
            tol,
            max_iter,
            from,
            trace,
            json,
        } => cmd_powerflow(
            &case,
            variant.into(),
            compare,
            tol,
            max_iter,
            from.as_deref(),
            trace.as_deref(),
            json,
        ),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
