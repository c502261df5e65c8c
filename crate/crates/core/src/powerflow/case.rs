use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Slack,
    Pq,
    Pv,
}

impl BusType {
    pub fn keyword(&self) -> &'static str {
        match self {
            BusType::Slack => "slack",
            BusType::Pq => "pq",
            BusType::Pv => "pv",
        }
    }
}

/// Bus with specified net injections (generation minus load), per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    pub kind: BusType,
    pub p: f64,
    pub q: f64,
    /// Voltage magnitude setpoint; required on slack and PV buses.
    pub v: Option<f64>,
}

/// Pi-model line: series admittance `g + jb`, half line charging `bsh` at each end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    pub g: f64,
    pub b: f64,
    pub bsh: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerFlowCase {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
}

impl PowerFlowCase {
    /// Checks the structural invariants: unique ids, exactly one slack bus,
    /// setpoints where needed, finite data and a connected network.
    pub fn validate(&self) -> Result<()> {
        let index = self.index_map()?;
        let slacks = self.buses.iter().filter(|b| b.kind == BusType::Slack).count();
        match slacks {
            0 => return Err(Error::case("no slack bus")),
            1 => {}
            k => return Err(Error::case(format!("{k} slack buses, expected exactly one"))),
        }
        for bus in &self.buses {
            if !(bus.p.is_finite() && bus.q.is_finite()) {
                return Err(Error::case(format!("bus {}: non-finite injection", bus.id)));
            }
            match (bus.kind, bus.v) {
                (BusType::Slack | BusType::Pv, None) => {
                    return Err(Error::case(format!(
                        "bus {}: {} bus needs a voltage setpoint V=",
                        bus.id,
                        bus.kind.keyword()
                    )))
                }
                (_, Some(v)) if !(v.is_finite() && v > 0.0) => {
                    return Err(Error::case(format!("bus {}: voltage setpoint must be positive", bus.id)))
                }
                _ => {}
            }
        }
        for br in &self.branches {
            for end in [br.from, br.to] {
                if !index.contains_key(&end) {
                    return Err(Error::case(format!("branch {}-{}: unknown bus {end}", br.from, br.to)));
                }
            }
            if br.from == br.to {
                return Err(Error::case(format!("branch {}-{} connects a bus to itself", br.from, br.to)));
            }
            if ![br.g, br.b, br.bsh].iter().all(|v| v.is_finite()) {
                return Err(Error::case(format!("branch {}-{}: non-finite parameter", br.from, br.to)));
            }
            if br.g == 0.0 && br.b == 0.0 {
                return Err(Error::case(format!("branch {}-{}: zero series admittance", br.from, br.to)));
            }
        }
        self.check_connected(&index)
    }

    /// Position of each bus id in `buses`.
    pub fn index_map(&self) -> Result<HashMap<u32, usize>> {
        let mut map = HashMap::with_capacity(self.buses.len());
        for (i, b) in self.buses.iter().enumerate() {
            if map.insert(b.id, i).is_some() {
                return Err(Error::case(format!("bus {} defined twice", b.id)));
            }
        }
        Ok(map)
    }

    pub fn slack_index(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.kind == BusType::Slack)
    }

    fn check_connected(&self, index: &HashMap<u32, usize>) -> Result<()> {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for br in &self.branches {
            let (i, j) = (index[&br.from], index[&br.to]);
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(Error::case(format!(
                "network is disconnected: bus {} is not reachable from bus {}",
                self.buses[i].id, self.buses[0].id
            ))),
            None => Ok(()),
        }
    }

    /// Text form accepted by [`parse_case`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for b in &self.buses {
            let _ = write!(out, "bus {} {} P={} Q={}", b.id, b.kind.keyword(), b.p, b.q);
            if let Some(v) = b.v {
                let _ = write!(out, " V={v}");
            }
            out.push('\n');
        }
        for br in &self.branches {
            let _ = writeln!(out, "branch {} {} g={} b={} bsh={}", br.from, br.to, br.g, br.b, br.bsh);
        }
        out
    }
}

fn case_at(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Case {
        location: Some(Location { line, column }),
        message: message.into(),
    }
}

/// Whitespace-separated tokens with their 1-based columns; `#` starts a comment.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let body = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in body.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s, &body[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &body[s..]));
    }
    out.into_iter()
        .map(|(byte, tok)| (body[..byte].chars().count() + 1, tok))
        .collect()
}

fn parse_number<T: std::str::FromStr>(line: usize, (col, tok): (usize, &str), what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::syntax(line, col, format!("expected {what}, found `{tok}`")))
}

/// `key=value` attributes; every key in `allowed` at most once.
fn attributes(line: usize, toks: &[(usize, &str)], allowed: &[&str]) -> Result<HashMap<String, f64>> {
    let mut out = HashMap::new();
    for &(col, tok) in toks {
        let Some((key, value)) = tok.split_once('=') else {
            return Err(Error::syntax(line, col, format!("expected key=value, found `{tok}`")));
        };
        if !allowed.contains(&key) {
            return Err(Error::syntax(line, col, format!("unknown attribute `{key}`")));
        }
        let v: f64 = parse_number(line, (col + key.len() + 1, value), "a number")?;
        if !v.is_finite() {
            return Err(case_at(line, col, format!("`{key}` is not finite")));
        }
        if out.insert(key.to_string(), v).is_some() {
            return Err(case_at(line, col, format!("`{key}` given twice")));
        }
    }
    Ok(out)
}

/// Parses the line-oriented case format:
///
/// ```text
/// bus <id> slack|pq|pv P=<real> Q=<real> [V=<real>]
/// branch <from> <to> g=<real> b=<real> bsh=<real>
/// ```
///
/// Quantities are per-unit, `#` starts a comment. The result is validated.
pub fn parse_case(text: &str) -> Result<PowerFlowCase> {
    let mut case = PowerFlowCase::default();
    let mut bus_lines: HashMap<u32, usize> = HashMap::new();
    let mut branch_lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = tokens(raw);
        let Some(&(col, keyword)) = toks.first() else {
            continue;
        };
        match keyword {
            "bus" => {
                if toks.len() < 3 {
                    return Err(Error::syntax(line, col, "expected `bus <id> <type> P=.. Q=..`"));
                }
                let id: u32 = parse_number(line, toks[1], "a bus id")?;
                let kind = match toks[2].1 {
                    "slack" => BusType::Slack,
                    "pq" => BusType::Pq,
                    "pv" => BusType::Pv,
                    other => {
                        return Err(Error::syntax(
                            line,
                            toks[2].0,
                            format!("bus type must be slack, pq or pv, found `{other}`"),
                        ))
                    }
                };
                let attrs = attributes(line, &toks[3..], &["P", "Q", "V"])?;
                let need = |k: &str| {
                    attrs
                        .get(k)
                        .copied()
                        .ok_or_else(|| case_at(line, col, format!("bus {id}: missing {k}=")))
                };
                let bus = Bus {
                    id,
                    kind,
                    p: need("P")?,
                    q: need("Q")?,
                    v: attrs.get("V").copied(),
                };
                if bus_lines.insert(id, line).is_some() {
                    return Err(case_at(line, toks[1].0, format!("bus {id} defined twice")));
                }
                if matches!(kind, BusType::Slack | BusType::Pv) && bus.v.is_none() {
                    return Err(case_at(
                        line,
                        toks[2].0,
                        format!("bus {id}: {} bus needs V=", kind.keyword()),
                    ));
                }
                case.buses.push(bus);
            }
            "branch" => {
                if toks.len() < 3 {
                    return Err(Error::syntax(line, col, "expected `branch <from> <to> g=.. b=.. bsh=..`"));
                }
                let from: u32 = parse_number(line, toks[1], "a bus id")?;
                let to: u32 = parse_number(line, toks[2], "a bus id")?;
                let attrs = attributes(line, &toks[3..], &["g", "b", "bsh"])?;
                let need = |k: &str| {
                    attrs
                        .get(k)
                        .copied()
                        .ok_or_else(|| case_at(line, col, format!("branch {from}-{to}: missing {k}=")))
                };
                case.branches.push(Branch {
                    from,
                    to,
                    g: need("g")?,
                    b: need("b")?,
                    bsh: need("bsh")?,
                });
                branch_lines.push((line, toks[1].0, toks[2].0));
            }
            other => {
                return Err(Error::syntax(
                    line,
                    col,
                    format!("expected `bus` or `branch`, found `{other}`"),
                ))
            }
        }
    }
    // Point reference errors at the offending token before running the
    // document-level checks.
    for (br, &(line, c_from, c_to)) in case.branches.iter().zip(&branch_lines) {
        if !bus_lines.contains_key(&br.from) {
            return Err(case_at(line, c_from, format!("unknown bus {}", br.from)));
        }
        if !bus_lines.contains_key(&br.to) {
            return Err(case_at(line, c_to, format!("unknown bus {}", br.to)));
        }
    }
    if case.buses.is_empty() {
        return Err(Error::case("case has no buses"));
    }
    case.validate()?;
    Ok(case)
}
