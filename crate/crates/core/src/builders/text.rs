//! Line-oriented model format.
//!
//! ```text
//! # comment
//! form elementary_sum | power_product | augmented
//! var <name> [init <re>[+<im>i]]
//! eq <p> = <coef>*<kind>[<attr>=<value>, ...](<var>) + ...
//! eq <p> = <coef>*prod(<var>^<q> <var>^<q> ...) + ...
//! aux <name> = <kind>[<attrs>](<term> + <term> ...)
//! ```
//!
//! Kinds: `pow` (needs `exp=`), `exp`, `log`, `sin`, `cos`, `tan`,
//! `tan_shifted` (needs `shift=`), `asin`, `acos`, `atan`, `id`. Attributes
//! `scale=` and `branch=principal|neg_root|q<int>` apply to any kind.
//! Numeric attribute values and exponents accept `pi` and `+ - * /` with
//! parentheses. A bare `<var>` term stands for `1*id(<var>)`.

use std::fmt::Write as _;

use super::{AuxDefinition, Equation, Form, FunctionSpec, ModelDocument, TermBody, TermSpec, VarDecl};
use crate::elementary::{BranchSelector, Elementary, Kind, C64};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn lex(line: &str, line_no: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let col = i + 1;
        if ch == '#' {
            break;
        }
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                col,
            });
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text
                .parse::<f64>()
                .map_err(|_| Error::syntax(line_no, col, format!("malformed number `{text}`")))?;
            out.push(Token {
                tok: Tok::Number(value),
                col,
            });
        } else if "=+-*/^()[],".contains(ch) {
            out.push(Token { tok: Tok::Sym(ch), col });
            i += 1;
        } else {
            return Err(Error::syntax(line_no, col, format!("unexpected character `{ch}`")));
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.col)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::syntax(self.line, self.col(), msg)
    }

    fn sem(&self, col: usize, msg: impl Into<String>) -> Error {
        Error::semantic(self.line, col, msg)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expect_end(&self) -> Result<()> {
        if self.done() {
            Ok(())
        } else {
            Err(self.err("unexpected trailing input"))
        }
    }

    // sum := product (('+'|'-') product)*
    fn expr(&mut self) -> Result<f64> {
        let mut v = self.product()?;
        loop {
            if self.eat('+') {
                v += self.product()?;
            } else if self.eat('-') {
                v -= self.product()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn product(&mut self) -> Result<f64> {
        let mut v = self.unary()?;
        loop {
            if self.eat('*') {
                v *= self.unary()?;
            } else if self.eat('/') {
                v /= self.unary()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn unary(&mut self) -> Result<f64> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<f64> {
        match self.peek().cloned() {
            Some(Tok::Number(v)) => {
                self.pos += 1;
                if matches!(self.peek(), Some(Tok::Ident(s)) if s == "i") {
                    return Err(self.sem(self.col(), "complex values are not allowed here"));
                }
                Ok(v)
            }
            Some(Tok::Ident(s)) if s == "pi" => {
                self.pos += 1;
                Ok(std::f64::consts::PI)
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let v = self.expr()?;
                self.expect(')')?;
                Ok(v)
            }
            _ => Err(self.err("expected a number")),
        }
    }
}

/// Parses `principal`, `neg_root` or `q<int>`.
pub fn parse_branch(text: &str) -> Result<BranchSelector> {
    let bad = || Error::syntax(1, 1, format!("unknown branch `{text}`"));
    match text {
        "principal" => Ok(BranchSelector::Principal),
        "neg_root" => Ok(BranchSelector::NegativeRoot),
        _ => {
            let q = text.strip_prefix('q').ok_or_else(bad)?;
            q.parse::<i32>().map(BranchSelector::TrigIndex).map_err(|_| bad())
        }
    }
}

pub fn parse_model(text: &str) -> Result<ModelDocument> {
    let mut doc = ModelDocument::default();
    let mut form_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = lex(raw, line_no)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            toks: &toks,
            pos: 0,
            line: line_no,
            end_col: raw.chars().count() + 1,
        };
        let keyword_col = cur.col();
        let keyword = cur.ident("a keyword")?;
        match keyword.as_str() {
            "form" => {
                if form_seen {
                    return Err(cur.sem(keyword_col, "form declared twice"));
                }
                if !doc.variables.is_empty() || !doc.equations.is_empty() {
                    return Err(cur.sem(keyword_col, "form must precede declarations"));
                }
                let col = cur.col();
                doc.form = match cur.ident("a form name")?.as_str() {
                    "elementary_sum" => Form::ElementarySum,
                    "power_product" => Form::PowerProduct,
                    "augmented" => Form::Augmented,
                    other => return Err(Error::syntax(line_no, col, format!("unknown form `{other}`"))),
                };
                form_seen = true;
                cur.expect_end()?;
            }
            "var" => {
                let col = cur.col();
                let name = cur.ident("a variable name")?;
                check_name(&cur, col, &name)?;
                if declared(&doc, &name) {
                    return Err(cur.sem(col, format!("variable `{name}` declared more than once")));
                }
                let init = if cur.done() {
                    None
                } else {
                    let c = cur.col();
                    if cur.ident("`init`")? != "init" {
                        return Err(Error::syntax(line_no, c, "expected `init`"));
                    }
                    Some(parse_complex(&mut cur)?)
                };
                cur.expect_end()?;
                doc.variables.push(VarDecl { name, init });
            }
            "eq" => {
                let target = cur.expr()?;
                cur.expect('=')?;
                let terms = parse_terms(&mut cur, &doc, None)?;
                cur.expect_end()?;
                doc.equations.push(Equation { target, terms });
            }
            "aux" => {
                let col = cur.col();
                let name = cur.ident("an auxiliary name")?;
                check_name(&cur, col, &name)?;
                if declared(&doc, &name) {
                    return Err(cur.sem(col, format!("variable `{name}` declared more than once")));
                }
                cur.expect('=')?;
                let fcol = cur.col();
                let kind_name = cur.ident("a function kind")?;
                let function = parse_function(&mut cur, &kind_name, fcol)?;
                cur.expect('(')?;
                let argument = parse_terms(&mut cur, &doc, Some(&name))?;
                cur.expect(')')?;
                cur.expect_end()?;
                doc.aux.push(AuxDefinition {
                    name,
                    function,
                    argument,
                });
            }
            other => {
                return Err(Error::syntax(line_no, keyword_col, format!("unknown keyword `{other}`")));
            }
        }
    }
    Ok(doc)
}

fn check_name(cur: &Cursor, col: usize, name: &str) -> Result<()> {
    const RESERVED: &[&str] = &["pi", "i", "prod", "init"];
    if RESERVED.contains(&name) || kind_from_name(name).is_some() {
        return Err(cur.sem(col, format!("`{name}` is reserved")));
    }
    Ok(())
}

fn declared(doc: &ModelDocument, name: &str) -> bool {
    doc.variables.iter().any(|v| v.name == name) || doc.aux.iter().any(|a| a.name == name)
}

fn parse_complex(cur: &mut Cursor) -> Result<C64> {
    let sign = |cur: &mut Cursor| {
        if cur.eat('-') {
            -1.0
        } else {
            cur.eat('+');
            1.0
        }
    };
    let number = |cur: &mut Cursor| match cur.next() {
        Some(Tok::Number(v)) => Ok(v),
        _ => {
            cur.pos -= 1;
            Err(cur.err("expected a number"))
        }
    };
    let is_i = |cur: &Cursor| matches!(cur.peek(), Some(Tok::Ident(s)) if s == "i");
    let s1 = sign(cur);
    let a = number(cur)? * s1;
    if is_i(cur) {
        cur.pos += 1;
        return Ok(C64::new(0.0, a));
    }
    if cur.done() {
        return Ok(C64::new(a, 0.0));
    }
    let s2 = if cur.eat('-') {
        -1.0
    } else {
        cur.expect('+')?;
        1.0
    };
    let b = number(cur)? * s2;
    if !is_i(cur) {
        return Err(cur.err("expected `i` after the imaginary part"));
    }
    cur.pos += 1;
    Ok(C64::new(a, b))
}

fn kind_from_name(name: &str) -> Option<Kind> {
    Some(match name {
        "pow" => Kind::Power(f64::NAN),
        "exp" => Kind::Exp,
        "log" => Kind::Log,
        "sin" => Kind::Sin,
        "cos" => Kind::Cos,
        "tan" => Kind::Tan,
        "tan_shifted" => Kind::TanShifted(f64::NAN),
        "asin" => Kind::Asin,
        "acos" => Kind::Acos,
        "atan" => Kind::Atan,
        "id" => Kind::Identity,
        "polar_pair" => Kind::PolarPair,
        _ => return None,
    })
}

/// Kind name already consumed; parses optional `[attrs]`.
fn parse_function(cur: &mut Cursor, kind_name: &str, col: usize) -> Result<FunctionSpec> {
    let mut kind = kind_from_name(kind_name)
        .ok_or_else(|| cur.sem(col, format!("unknown function kind `{kind_name}`")))?;
    if kind == Kind::PolarPair {
        return Err(cur.sem(col, "polar_pair cannot appear in model terms"));
    }
    let mut spec = FunctionSpec::new(kind);
    let mut parameter = None;
    if cur.eat('[') {
        loop {
            let acol = cur.col();
            let attr = cur.ident("an attribute name")?;
            cur.expect('=')?;
            match attr.as_str() {
                "exp" | "shift" => {
                    let expected = if matches!(kind, Kind::Power(_)) { "exp" } else { "shift" };
                    if !matches!(kind, Kind::Power(_) | Kind::TanShifted(_)) || attr != expected {
                        return Err(cur.sem(acol, format!("`{attr}` does not apply to {kind_name}")));
                    }
                    parameter = Some(cur.expr()?);
                }
                "scale" => spec.scale = cur.expr()?,
                "branch" => {
                    let bcol = cur.col();
                    let mut text = cur.ident("a branch")?;
                    if text == "q" && cur.eat('-') {
                        match cur.next() {
                            Some(Tok::Number(v)) => text = format!("q-{v}"),
                            _ => return Err(Error::syntax(cur.line, bcol, "malformed branch index")),
                        }
                    }
                    spec.branch = parse_branch(&text)
                        .map_err(|_| Error::syntax(cur.line, bcol, format!("unknown branch `{text}`")))?;
                }
                other => return Err(cur.sem(acol, format!("unknown attribute `{other}`"))),
            }
            if cur.eat(']') {
                break;
            }
            cur.expect(',')?;
        }
    }
    match kind {
        Kind::Power(_) => kind = Kind::Power(parameter.ok_or_else(|| cur.sem(col, "pow needs exp="))?),
        Kind::TanShifted(_) => {
            kind = Kind::TanShifted(parameter.ok_or_else(|| cur.sem(col, "tan_shifted needs shift="))?)
        }
        _ => {}
    }
    spec.kind = kind;
    Elementary::new(kind)
        .with_branch(spec.branch)
        .and_then(|e| {
            e.with_argument(crate::elementary::Argument {
                scale: spec.scale,
                exponential: false,
            })
        })
        .map_err(|e| cur.sem(col, e.to_string()))?;
    Ok(spec)
}

fn parse_terms(cur: &mut Cursor, doc: &ModelDocument, defining: Option<&str>) -> Result<Vec<TermSpec>> {
    let mut terms = Vec::new();
    let mut sign = if cur.eat('-') {
        -1.0
    } else {
        cur.eat('+');
        1.0
    };
    loop {
        terms.push(parse_term(cur, doc, defining, sign)?);
        if cur.eat('+') {
            sign = 1.0;
        } else if cur.eat('-') {
            sign = -1.0;
        } else {
            return Ok(terms);
        }
    }
}

fn parse_term(cur: &mut Cursor, doc: &ModelDocument, defining: Option<&str>, sign: f64) -> Result<TermSpec> {
    let mut coefficient = sign;
    if matches!(cur.peek(), Some(Tok::Number(_)) | Some(Tok::Sym('(')))
        || matches!(cur.peek(), Some(Tok::Ident(s)) if s == "pi")
    {
        let mut c = cur.atom()?;
        while cur.eat('/') {
            c /= cur.atom()?;
        }
        cur.expect('*')?;
        coefficient *= c;
    }
    let col = cur.col();
    let name = cur.ident("a function or variable")?;
    let var_ref = |cur: &Cursor, col: usize, v: &str| -> Result<()> {
        if Some(v) == defining {
            return Err(cur.sem(col, format!("auxiliary `{v}` used in its own definition")));
        }
        if !declared(doc, v) {
            return Err(cur.sem(col, format!("undeclared variable `{v}`")));
        }
        Ok(())
    };
    if name == "prod" {
        cur.expect('(')?;
        let mut powers = Vec::new();
        while !cur.eat(')') {
            let vcol = cur.col();
            let v = cur.ident("a variable")?;
            var_ref(cur, vcol, &v)?;
            cur.expect('^')?;
            let q = cur.unary()?;
            if powers.iter().any(|(w, _): &(String, f64)| *w == v) {
                return Err(cur.sem(vcol, format!("variable `{v}` repeated in one product")));
            }
            powers.push((v, q));
        }
        if powers.is_empty() {
            return Err(cur.sem(col, "empty product"));
        }
        return Ok(TermSpec {
            coefficient,
            body: TermBody::Product(powers),
        });
    }
    if matches!(cur.peek(), Some(Tok::Sym('(')) | Some(Tok::Sym('['))) {
        let function = parse_function(cur, &name, col)?;
        cur.expect('(')?;
        let vcol = cur.col();
        let var = cur.ident("a variable")?;
        var_ref(cur, vcol, &var)?;
        cur.expect(')')?;
        return Ok(TermSpec {
            coefficient,
            body: TermBody::Single { function, var },
        });
    }
    if kind_from_name(&name).is_some() {
        return Err(cur.err(format!("expected `(` after {name}")));
    }
    var_ref(cur, col, &name)?;
    Ok(TermSpec {
        coefficient,
        body: TermBody::Single {
            function: FunctionSpec::new(Kind::Identity),
            var: name,
        },
    })
}

fn fmt_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

fn fmt_function(f: &FunctionSpec) -> String {
    let mut attrs = Vec::new();
    match f.kind {
        Kind::Power(q) => attrs.push(format!("exp={q}")),
        Kind::TanShifted(s) => attrs.push(format!("shift={s}")),
        _ => {}
    }
    if f.scale != 1.0 {
        attrs.push(format!("scale={}", f.scale));
    }
    match f.branch {
        BranchSelector::Principal => {}
        BranchSelector::NegativeRoot => attrs.push("branch=neg_root".into()),
        BranchSelector::TrigIndex(q) => attrs.push(format!("branch=q{q}")),
    }
    if attrs.is_empty() {
        f.kind.name().to_string()
    } else {
        format!("{}[{}]", f.kind.name(), attrs.join(", "))
    }
}

fn fmt_body(b: &TermBody) -> String {
    match b {
        TermBody::Single { function, var } => format!("{}({var})", fmt_function(function)),
        TermBody::Product(p) => {
            let inner: Vec<String> = p.iter().map(|(v, q)| format!("{v}^{q}")).collect();
            format!("prod({})", inner.join(" "))
        }
    }
}

fn fmt_terms(terms: &[TermSpec]) -> String {
    let mut s = String::new();
    for (i, t) in terms.iter().enumerate() {
        if i == 0 {
            let _ = write!(s, "{}*{}", t.coefficient, fmt_body(&t.body));
        } else if t.coefficient < 0.0 {
            let _ = write!(s, " - {}*{}", -t.coefficient, fmt_body(&t.body));
        } else {
            let _ = write!(s, " + {}*{}", t.coefficient, fmt_body(&t.body));
        }
    }
    s
}

/// Canonical text: decimal numbers, attributes in the order
/// `exp/shift, scale, branch`, default attributes omitted.
pub fn serialize_model(doc: &ModelDocument) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "form {}", doc.form.name());
    for v in &doc.variables {
        match v.init {
            Some(z) => {
                let _ = writeln!(s, "var {} init {}", v.name, fmt_complex(z));
            }
            None => {
                let _ = writeln!(s, "var {}", v.name);
            }
        }
    }
    for a in &doc.aux {
        let _ = writeln!(s, "aux {} = {}({})", a.name, fmt_function(&a.function), fmt_terms(&a.argument));
    }
    for e in &doc.equations {
        let _ = writeln!(s, "eq {} = {}", e.target, fmt_terms(&e.terms));
    }
    s
}
