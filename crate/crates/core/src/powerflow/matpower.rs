//! Importer for the matrix-based case layout (`mpc.bus`, `mpc.gen`,
//! `mpc.branch`, `mpc.baseMVA`), restricted to what the bus/branch model
//! represents. Bus shunts, off-nominal taps and phase shifters are rejected.

use std::collections::HashMap;

use num_complex::Complex64;

use super::case::{Branch, Bus, BusType, PowerFlowCase};
use crate::error::{Error, Location, Result};

struct Matrix {
    line: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

fn case_at(line: usize, message: impl Into<String>) -> Error {
    Error::Case {
        location: Some(Location { line, column: 1 }),
        message: message.into(),
    }
}

fn push_rows(m: &mut Matrix, content: &str, line: usize) -> Result<()> {
    for row in content.split(';') {
        let values = row
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::syntax(line, 1, format!("`{s}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if !values.is_empty() {
            m.rows.push((line, values));
        }
    }
    Ok(())
}

/// Pulls `name = [ ... ];` blocks and `name = value;` scalars out of the file.
fn scan(text: &str) -> Result<(HashMap<String, Matrix>, HashMap<String, f64>)> {
    let mut matrices = HashMap::new();
    let mut scalars = HashMap::new();
    let mut open: Option<(String, Matrix)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('%').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some((name, mut m)) = open.take() {
            let (content, closed) = match body.find(']') {
                Some(pos) => (&body[..pos], true),
                None => (body, false),
            };
            push_rows(&mut m, content, line)?;
            if closed {
                matrices.insert(name, m);
            } else {
                open = Some((name, m));
            }
            continue;
        }
        let Some((lhs, rhs)) = body.split_once('=') else {
            continue;
        };
        let name = lhs.trim().trim_start_matches("mpc.").to_string();
        let rhs = rhs.trim();
        if let Some(rest) = rhs.strip_prefix('[') {
            let mut m = Matrix { line, rows: Vec::new() };
            let (content, closed) = match rest.find(']') {
                Some(pos) => (&rest[..pos], true),
                None => (rest, false),
            };
            push_rows(&mut m, content, line)?;
            if closed {
                matrices.insert(name, m);
            } else {
                open = Some((name, m));
            }
        } else if let Ok(v) = rhs.trim_end_matches(';').trim().parse::<f64>() {
            scalars.insert(name, v);
        }
    }
    if let Some((name, m)) = open {
        return Err(case_at(m.line, format!("matrix `{name}` is not closed")));
    }
    Ok((matrices, scalars))
}

fn need<'a>(matrices: &'a HashMap<String, Matrix>, name: &str, columns: usize) -> Result<&'a Matrix> {
    let m = matrices
        .get(name)
        .ok_or_else(|| Error::case(format!("missing `mpc.{name}` matrix")))?;
    if let Some((line, row)) = m.rows.iter().find(|(_, r)| r.len() < columns) {
        return Err(case_at(
            *line,
            format!("`{name}` row has {} columns, expected at least {columns}", row.len()),
        ));
    }
    Ok(m)
}

/// Converts a case in the matrix layout to per-unit bus/branch data.
pub fn import_matpower(text: &str) -> Result<PowerFlowCase> {
    let (matrices, scalars) = scan(text)?;
    let base = scalars.get("baseMVA").copied().unwrap_or(100.0);
    if !(base > 0.0) {
        return Err(Error::case("baseMVA must be positive"));
    }
    let bus_m = need(&matrices, "bus", 8)?;
    let gen_m = need(&matrices, "gen", 8)?;
    let branch_m = need(&matrices, "branch", 11)?;

    let mut buses = Vec::with_capacity(bus_m.rows.len());
    let mut index = HashMap::new();
    for (line, r) in &bus_m.rows {
        let id = r[0] as u32;
        let kind = match r[1] as i64 {
            1 => BusType::Pq,
            2 => BusType::Pv,
            3 => BusType::Slack,
            t => return Err(case_at(*line, format!("bus {id}: unsupported bus type {t}"))),
        };
        if r[4] != 0.0 || r[5] != 0.0 {
            return Err(case_at(*line, format!("bus {id}: bus shunts are not supported")));
        }
        index.insert(id, buses.len());
        buses.push(Bus {
            id,
            kind,
            p: -r[2] / base,
            q: -r[3] / base,
            v: None,
        });
    }
    for (line, r) in &gen_m.rows {
        if r[7] <= 0.0 {
            continue;
        }
        let id = r[0] as u32;
        let &i = index
            .get(&id)
            .ok_or_else(|| case_at(*line, format!("generator at unknown bus {id}")))?;
        let bus = &mut buses[i];
        bus.p += r[1] / base;
        bus.q += r[2] / base;
        if bus.kind != BusType::Pq {
            bus.v = Some(r[5]);
        }
    }
    for bus in &mut buses {
        if bus.kind == BusType::Pv {
            bus.q = 0.0;
        }
    }
    let mut branches = Vec::with_capacity(branch_m.rows.len());
    for (line, r) in &branch_m.rows {
        if r[10] <= 0.0 {
            continue;
        }
        let (from, to) = (r[0] as u32, r[1] as u32);
        if r[8] != 0.0 && r[8] != 1.0 {
            return Err(case_at(*line, format!("branch {from}-{to}: off-nominal tap ratio {}", r[8])));
        }
        if r[9] != 0.0 {
            return Err(case_at(*line, format!("branch {from}-{to}: phase shifters are not supported")));
        }
        let z = Complex64::new(r[2], r[3]);
        if z.norm() == 0.0 {
            return Err(case_at(*line, format!("branch {from}-{to}: zero impedance")));
        }
        let y = z.inv();
        branches.push(Branch {
            from,
            to,
            g: y.re,
            b: y.im,
            bsh: r[4] / 2.0,
        });
    }
    let case = PowerFlowCase { buses, branches };
    case.validate()?;
    Ok(case)
}
