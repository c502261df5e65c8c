//! Construction of factored systems from canonical model descriptions.
//!
//! * Elementary sums: `p_i = Σ c_ij g_ij(x_k)`, one intermediate slot per
//!   distinct `(function, branch, argument)` term.
//! * Power products: `p_i = Σ c_ij Π_k x_k^q_k`, solved in `α = ln x` with
//!   one `y = e^u` slot per distinct monomial.
//! * Auxiliary definitions `z = g(...)` add an unknown and an equation with
//!   target zero, turning composite expressions into one of the forms above.

mod text;

use std::collections::{HashMap, HashSet};

pub use text::{parse_branch, parse_model, serialize_model};

use crate::elementary::{Argument, BranchSelector, Elementary, Kind, C64};
use crate::error::{Error, Result};
use crate::linsolve::CsrMatrix;
use crate::model::{AuxInit, AuxTerm, FactoredSystem, Recovery, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Form {
    #[default]
    ElementarySum,
    PowerProduct,
    /// Elementary sum whose composite terms are introduced through
    /// auxiliary definitions.
    Augmented,
}

impl Form {
    pub fn name(&self) -> &'static str {
        match self {
            Form::ElementarySum => "elementary_sum",
            Form::PowerProduct => "power_product",
            Form::Augmented => "augmented",
        }
    }

    fn log_variables(&self) -> bool {
        *self == Form::PowerProduct
    }
}

/// Nonlinear function of a term: kind, branch and argument scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionSpec {
    pub kind: Kind,
    pub branch: BranchSelector,
    pub scale: f64,
}

impl FunctionSpec {
    pub fn new(kind: Kind) -> Self {
        FunctionSpec {
            kind,
            branch: BranchSelector::Principal,
            scale: 1.0,
        }
    }

    fn elementary(&self, exponential: bool) -> Result<Elementary> {
        Elementary::new(self.kind)
            .with_branch(self.branch)?
            .with_argument(Argument {
                scale: self.scale,
                exponential,
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermBody {
    /// `g(x)` for one variable.
    Single { function: FunctionSpec, var: String },
    /// `Π x_k^q_k`.
    Product(Vec<(String, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermSpec {
    pub coefficient: f64,
    pub body: TermBody,
}

impl TermSpec {
    pub fn single(coefficient: f64, function: FunctionSpec, var: &str) -> Self {
        TermSpec {
            coefficient,
            body: TermBody::Single {
                function,
                var: var.to_string(),
            },
        }
    }

    pub fn product(coefficient: f64, powers: &[(&str, f64)]) -> Self {
        TermSpec {
            coefficient,
            body: TermBody::Product(powers.iter().map(|&(v, q)| (v.to_string(), q)).collect()),
        }
    }

    fn vars(&self) -> Vec<&str> {
        match &self.body {
            TermBody::Single { var, .. } => vec![var.as_str()],
            TermBody::Product(p) => p.iter().map(|(v, _)| v.as_str()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub init: Option<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub target: f64,
    pub terms: Vec<TermSpec>,
}

/// `name = function(argument)`. A single bare-variable argument is a term
/// with unit coefficient and the identity function.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxDefinition {
    pub name: String,
    pub function: FunctionSpec,
    pub argument: Vec<TermSpec>,
}

impl AuxDefinition {
    fn bare_variable(&self) -> Option<&str> {
        match self.argument.as_slice() {
            [TermSpec {
                coefficient,
                body: TermBody::Single { function, var },
            }] if *coefficient == 1.0 && *function == FunctionSpec::new(Kind::Identity) => Some(var),
            [TermSpec {
                coefficient,
                body: TermBody::Product(p),
            }] if *coefficient == 1.0 && p.len() == 1 && p[0].1 == 1.0 => Some(&p[0].0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelDocument {
    pub form: Form,
    pub variables: Vec<VarDecl>,
    pub equations: Vec<Equation>,
    pub aux: Vec<AuxDefinition>,
}

impl ModelDocument {
    /// Initial guess from the `init` values of the declared variables, if
    /// every variable has one.
    pub fn initial_guess(&self) -> Option<Vec<C64>> {
        self.variables.iter().map(|v| v.init).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.equations.iter().map(|e| e.target).collect()
    }
}

/// Builds whichever form the document declares, applying its auxiliary
/// definitions.
pub fn build(doc: &ModelDocument) -> Result<FactoredSystem> {
    assemble(doc, &doc.aux)
}

pub fn build_elementary_sum(doc: &ModelDocument) -> Result<FactoredSystem> {
    if doc.form == Form::PowerProduct {
        return Err(Error::Model("document declares the power_product form".into()));
    }
    assemble(doc, &[])
}

pub fn build_power_product(doc: &ModelDocument) -> Result<FactoredSystem> {
    if doc.form != Form::PowerProduct {
        return Err(Error::Model(format!("document declares the {} form", doc.form.name())));
    }
    assemble(doc, &[])
}

/// Base form of `doc` extended by `definitions`, each adding one unknown and
/// one equation with target zero.
pub fn build_augmented(doc: &ModelDocument, definitions: &[AuxDefinition]) -> Result<FactoredSystem> {
    assemble(doc, definitions)
}

/// Key for deduplicating intermediate slots; floats compare by bit pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum SlotKey {
    Single {
        kind: &'static str,
        parameter: u64,
        branch: (u8, i32),
        scale: u64,
        exponential: bool,
        var: usize,
    },
    Product(Vec<(usize, u64)>),
}

struct Slots {
    keys: HashMap<SlotKey, usize>,
    elementaries: Vec<Elementary>,
    c_rows: Vec<Vec<(usize, f64)>>,
}

impl Slots {
    fn intern(&mut self, key: SlotKey, el: Elementary, row: Vec<(usize, f64)>) -> usize {
        if let Some(&s) = self.keys.get(&key) {
            return s;
        }
        let s = self.elementaries.len();
        self.keys.insert(key, s);
        self.elementaries.push(el);
        self.c_rows.push(row);
        s
    }
}

fn kind_parameter(kind: Kind) -> u64 {
    match kind {
        Kind::Power(q) | Kind::TanShifted(q) => q.to_bits(),
        _ => 0,
    }
}

fn branch_key(b: BranchSelector) -> (u8, i32) {
    match b {
        BranchSelector::Principal => (0, 0),
        BranchSelector::NegativeRoot => (1, 0),
        BranchSelector::TrigIndex(q) => (2, q),
    }
}

fn assemble(doc: &ModelDocument, definitions: &[AuxDefinition]) -> Result<FactoredSystem> {
    let log_vars = doc.form.log_variables();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    for v in &doc.variables {
        if index.insert(v.name.as_str(), names.len()).is_some() {
            return Err(Error::DuplicateVariable(v.name.clone()));
        }
        names.push(v.name.clone());
    }
    let aux_names: HashSet<&str> = definitions.iter().map(|d| d.name.as_str()).collect();
    for d in definitions {
        if index.insert(d.name.as_str(), names.len()).is_some() {
            return Err(Error::DuplicateVariable(d.name.clone()));
        }
        names.push(d.name.clone());
    }
    let lookup = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Model(format!("undeclared variable `{name}`")))
    };
    for eq in &doc.equations {
        if !eq.target.is_finite() {
            return Err(Error::Model("non-finite equation target".into()));
        }
        for t in &eq.terms {
            for v in t.vars() {
                lookup(v)?;
            }
        }
    }

    // each definition becomes one extra equation with target zero
    let mut equations: Vec<Equation> = doc.equations.clone();
    let mut aux_init = Vec::new();
    let mut defined: HashSet<&str> = HashSet::new();
    for d in definitions {
        for t in &d.argument {
            for v in t.vars() {
                lookup(v)?;
                if aux_names.contains(v) && !defined.contains(v) {
                    return Err(Error::CyclicDefinition(d.name.clone()));
                }
            }
        }
        defined.insert(d.name.as_str());
        let (eq, init) = rewrite_definition(d, &lookup)?;
        equations.push(eq);
        aux_init.push(init);
    }

    let mut slots = Slots {
        keys: HashMap::new(),
        elementaries: Vec::new(),
        c_rows: Vec::new(),
    };
    let mut e_entries = Vec::new();
    for (r, eq) in equations.iter().enumerate() {
        for t in &eq.terms {
            let s = intern_term(&mut slots, t, log_vars, &lookup)?;
            e_entries.push((r, s, t.coefficient));
        }
    }
    let (n, m) = (names.len(), slots.elementaries.len());
    if equations.len() != n {
        return Err(Error::Model(format!(
            "{} equations for {n} unknowns",
            equations.len()
        )));
    }
    let e = CsrMatrix::from_triplets(n, m, e_entries)?;
    let c = CsrMatrix::from_triplets(
        m,
        n,
        slots
            .c_rows
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().map(move |&(k, q)| (s, k, q))),
    )?;
    let p = equations.iter().map(|e| C64::new(e.target, 0.0)).collect();
    let mut spec = SystemSpec::new(e, c, slots.elementaries, p);
    spec.names = names;
    spec.aux = aux_init;
    spec.recovery = if log_vars {
        Recovery::Exp
    } else {
        Recovery::Identity
    };
    FactoredSystem::from_spec(spec)
}

fn intern_term(
    slots: &mut Slots,
    t: &TermSpec,
    log_vars: bool,
    lookup: &dyn Fn(&str) -> Result<usize>,
) -> Result<usize> {
    let product = |slots: &mut Slots, powers: Vec<(usize, f64)>| {
        let mut key: Vec<(usize, u64)> = powers.iter().map(|&(k, q)| (k, q.to_bits())).collect();
        key.sort_unstable();
        slots.intern(SlotKey::Product(key), Elementary::new(Kind::Exp), powers)
    };
    match &t.body {
        TermBody::Product(powers) => {
            if !log_vars {
                return Err(Error::Model("prod(...) terms require the power_product form".into()));
            }
            if powers.is_empty() {
                return Err(Error::Model("empty product term".into()));
            }
            let mut resolved = Vec::with_capacity(powers.len());
            for (v, q) in powers {
                if !q.is_finite() {
                    return Err(Error::Model(format!("non-finite exponent on `{v}`")));
                }
                let k = lookup(v)?;
                if resolved.iter().any(|&(j, _)| j == k) {
                    return Err(Error::Model(format!("variable `{v}` repeated in one product")));
                }
                resolved.push((k, *q));
            }
            Ok(product(slots, resolved))
        }
        TermBody::Single { function, var } => {
            let k = lookup(var)?;
            let plain = function.branch == BranchSelector::Principal && function.scale == 1.0;
            if log_vars {
                match function.kind {
                    Kind::Power(q) if plain => return Ok(product(slots, vec![(k, q)])),
                    Kind::Identity if plain => return Ok(product(slots, vec![(k, 1.0)])),
                    Kind::Power(_) | Kind::Identity => {
                        return Err(Error::Model(
                            "powers in log variables take neither a branch nor a scale".into(),
                        ))
                    }
                    _ => {}
                }
            }
            if function.kind == Kind::PolarPair {
                return Err(Error::Model("polar_pair cannot appear in model terms".into()));
            }
            let el = function.elementary(log_vars)?;
            let key = SlotKey::Single {
                kind: function.kind.name(),
                parameter: kind_parameter(function.kind),
                branch: branch_key(function.branch),
                scale: function.scale.to_bits(),
                exponential: log_vars,
                var: k,
            };
            Ok(slots.intern(key, el, vec![(k, 1.0)]))
        }
    }
}

/// `z = g(v)` becomes `0 = z − g(v)`; `z = g(expr)` becomes
/// `0 = expr − g⁻¹(z) / scale`.
fn rewrite_definition(d: &AuxDefinition, lookup: &dyn Fn(&str) -> Result<usize>) -> Result<(Equation, AuxInit)> {
    let z = lookup(&d.name)?;
    let init_fn = Elementary::new(d.function.kind).with_argument(Argument {
        scale: d.function.scale,
        exponential: false,
    })?;
    let mut init_terms = Vec::new();
    for t in &d.argument {
        init_terms.push(match &t.body {
            TermBody::Single { function, var } => AuxTerm::Single {
                coefficient: t.coefficient,
                function: function.elementary(false)?,
                var: lookup(var)?,
            },
            TermBody::Product(p) => AuxTerm::Product {
                coefficient: t.coefficient,
                powers: p
                    .iter()
                    .map(|(v, q)| Ok((lookup(v)?, *q)))
                    .collect::<Result<_>>()?,
            },
        });
    }
    let init = AuxInit {
        index: z,
        function: init_fn,
        argument: init_terms,
    };
    let identity = FunctionSpec::new(Kind::Identity);
    let terms = if let Some(v) = d.bare_variable() {
        vec![
            TermSpec::single(1.0, identity, &d.name),
            TermSpec::single(-1.0, d.function, v),
        ]
    } else {
        if d.function.branch != BranchSelector::Principal {
            return Err(Error::Model(format!(
                "auxiliary `{}`: a branch is only meaningful on a single-variable argument",
                d.name
            )));
        }
        let inverse = d.function.kind.functional_inverse().ok_or_else(|| {
            Error::Model(format!(
                "auxiliary `{}`: {} has no catalog inverse, use a single-variable argument",
                d.name,
                d.function.kind.name()
            ))
        })?;
        let mut terms = d.argument.clone();
        terms.push(TermSpec::single(-1.0 / d.function.scale, FunctionSpec::new(inverse), &d.name));
        terms
    };
    Ok((Equation { target: 0.0, terms }, init))
}
