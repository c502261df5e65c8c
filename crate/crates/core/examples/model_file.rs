//! Solve a model file and write the iteration trace as CSV.
//!
//!     cargo run --example model_file -- <model> [trace.csv]

use std::fs::File;
use std::io;

use factored::builders::{build, parse_model};
use factored::report::format_vector;
use factored::solver::write_trace_csv;
use factored::{solve, SolverConfig, C64};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/gallery/ex3.model").to_string());
    let doc = parse_model(&std::fs::read_to_string(&path)?)?;
    let sys = build(&doc)?;
    let guess = doc
        .initial_guess()
        .unwrap_or_else(|| vec![C64::new(1.0, 0.0); doc.variables.len()]);
    let out = solve(&sys, &sys.initial_point(&guess)?, &SolverConfig::complex())?;
    eprintln!("{path}: {} {} in {}", out.status, format_vector(&out.x_final, 6), out.iterations);

    let names = sys.names().to_vec();
    match args.next() {
        Some(trace) => write_trace_csv(&out, &names, File::create(trace)?)?,
        None => write_trace_csv(&out, &names, io::stdout().lock())?,
    }
    Ok(())
}
