//! Finite gauged metric structures: validation, exact evaluation with the
//! point-at-infinity quantifier semantics, restricted-quantifier macros,
//! prenex normalization, and the principal-ultrafilter product.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::Zero;
use thiserror::Error;

use crate::analysis::{self, AnalysisError};
use crate::modulus::{self, FiniteMap};
use crate::rational::{monus, parse_rat, rat_max, rat_min, rat_str, Rat};
use crate::sexp::{self, Sexp};
use crate::syntax::{
    dyadic_const, dyadic_parts, truncate_at, Formula, Signature, SyntaxError, Term, DIST, GAUGE,
};

/// A finite point set with rational metric, gauge, predicate and function
/// tables over a signature. Completeness is vacuous for finite point sets.
#[derive(Clone, Debug)]
pub struct GaugedStructure {
    pub signature: Arc<Signature>,
    pub points: Vec<String>,
    pub dist: Vec<Vec<Rat>>,
    pub gauge: Vec<Rat>,
    pub preds: BTreeMap<String, BTreeMap<Vec<usize>, Rat>>,
    pub funs: BTreeMap<String, BTreeMap<Vec<usize>, usize>>,
}

/// Maps variable names to point indices of a structure.
pub type Assignment = BTreeMap<String, usize>;

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown point {0:?}")]
    UnknownPoint(String),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("incomplete table: {0}")]
    IncompleteTable(String),
    #[error("variable {0:?} is not assigned")]
    Unassigned(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("window requires 0 < r < r', got r={0}, r'={1}")]
    BadWindow(String, String),
    #[error("window too fine to encode")]
    WindowTooFine,
    #[error("structures do not share a signature")]
    SignatureMismatch,
    #[error("factor index {0} out of range")]
    IndexOutOfRange(usize),
}

impl GaugedStructure {
    pub fn empty(signature: Arc<Signature>) -> Self {
        GaugedStructure {
            signature,
            points: Vec::new(),
            dist: Vec::new(),
            gauge: Vec::new(),
            preds: BTreeMap::new(),
            funs: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point_index(&self, name: &str) -> Option<usize> {
        self.points.iter().position(|p| p == name)
    }

    pub fn pred_value(&self, name: &str, args: &[usize]) -> Result<&Rat, StructureError> {
        self.preds
            .get(name)
            .and_then(|t| t.get(args))
            .ok_or_else(|| StructureError::IncompleteTable(format!("{name} at {args:?}")))
    }

    pub fn fun_value(&self, name: &str, args: &[usize]) -> Result<usize, StructureError> {
        self.funs
            .get(name)
            .and_then(|t| t.get(args))
            .copied()
            .ok_or_else(|| StructureError::IncompleteTable(format!("{name} at {args:?}")))
    }

    /// All tuples of point indices of the given length.
    pub fn tuples(&self, arity: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for _ in 0..arity {
            let mut next = Vec::with_capacity(out.len() * self.len());
            for t in &out {
                for i in 0..self.len() {
                    let mut t2 = t.clone();
                    t2.push(i);
                    next.push(t2);
                }
            }
            out = next;
        }
        out
    }

    /// Max-metric distance between equal-length tuples.
    pub fn tuple_dist(&self, a: &[usize], b: &[usize]) -> Rat {
        let mut d = Rat::zero();
        for (&i, &j) in a.iter().zip(b) {
            d = rat_max(&d, &self.dist[i][j]);
        }
        d
    }

    /// Max-gauge of a tuple; 0 for the empty tuple.
    pub fn tuple_gauge(&self, a: &[usize]) -> Rat {
        let mut g = Rat::zero();
        for &i in a {
            g = rat_max(&g, &self.gauge[i]);
        }
        g
    }
}

// ---------------------------------------------------------------------------
// file format

impl GaugedStructure {
    /// Reads a structure file. A `(sig ...)` form may embed the signature;
    /// otherwise `fallback` is used. Distances get symmetric closure and a
    /// zero diagonal; all tables must come out total.
    pub fn parse(text: &str, fallback: Option<&Signature>) -> Result<Self, StructureError> {
        let forms = sexp::parse_many(text).map_err(|e| StructureError::Parse(e.to_string()))?;
        Self::from_sexp_forms(&forms, fallback)
    }

    pub fn from_sexp_forms(
        forms: &[Sexp],
        fallback: Option<&Signature>,
    ) -> Result<Self, StructureError> {
        let mut sig: Option<Signature> = None;
        let mut points: Vec<String> = Vec::new();
        for form in forms {
            match form.head() {
                Some("sig") => {
                    let items = form.as_list().expect("list");
                    sig = Some(Signature::from_sexp_forms(&items[1..])?);
                }
                Some("points") => {
                    for it in &form.as_list().expect("list")[1..] {
                        let name = it
                            .as_atom()
                            .ok_or_else(|| StructureError::Parse("point names are atoms".into()))?;
                        points.push(name.to_string());
                    }
                }
                _ => {}
            }
        }
        let signature = Arc::new(match (sig, fallback) {
            (Some(s), _) => s,
            (None, Some(s)) => s.clone(),
            (None, None) => Signature::new(),
        });

        let n = points.len();
        let mut dist: Vec<Vec<Option<Rat>>> = vec![vec![None; n]; n];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = Some(Rat::zero());
        }
        let mut gauge: Vec<Option<Rat>> = vec![None; n];
        let mut st = GaugedStructure {
            signature: signature.clone(),
            points: points.clone(),
            dist: Vec::new(),
            gauge: Vec::new(),
            preds: BTreeMap::new(),
            funs: BTreeMap::new(),
        };

        let index = |name: &str| -> Result<usize, StructureError> {
            points
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| StructureError::UnknownPoint(name.to_string()))
        };
        let atom = |e: &Sexp| -> Result<String, StructureError> {
            e.as_atom()
                .map(str::to_string)
                .ok_or_else(|| StructureError::Parse(format!("expected an atom, got {e}")))
        };

        for form in forms {
            let Some(items) = form.as_list() else {
                return Err(StructureError::Parse(format!("expected a list form, got {form}")));
            };
            match form.head() {
                Some("sig") | Some("points") => {}
                Some("dist") if items.len() == 4 => {
                    let a = index(&atom(&items[1])?)?;
                    let b = index(&atom(&items[2])?)?;
                    let q = parse_rat(&atom(&items[3])?).map_err(StructureError::Parse)?;
                    dist[a][b] = Some(q.clone());
                    dist[b][a] = Some(q);
                }
                Some("gauge") if items.len() == 3 => {
                    let a = index(&atom(&items[1])?)?;
                    gauge[a] = Some(parse_rat(&atom(&items[2])?).map_err(StructureError::Parse)?);
                }
                Some("pred") if items.len() >= 3 => {
                    let name = atom(&items[1])?;
                    let (arity, _) = signature
                        .pred_info(&name)
                        .ok_or_else(|| StructureError::UnknownSymbol(name.clone()))?;
                    if items.len() != arity + 3 {
                        return Err(StructureError::Parse(format!(
                            "(pred {name} ...) expects {arity} points and a value"
                        )));
                    }
                    let mut args = Vec::with_capacity(arity);
                    for it in &items[2..2 + arity] {
                        args.push(index(&atom(it)?)?);
                    }
                    let q = parse_rat(&atom(&items[items.len() - 1])?)
                        .map_err(StructureError::Parse)?;
                    st.preds.entry(name).or_default().insert(args, q);
                }
                Some("fun") if items.len() >= 3 => {
                    let name = atom(&items[1])?;
                    let f = signature
                        .fun(&name)
                        .ok_or_else(|| StructureError::UnknownSymbol(name.clone()))?;
                    if items.len() != f.arity + 3 {
                        return Err(StructureError::Parse(format!(
                            "(fun {name} ...) expects {} points and an image point",
                            f.arity
                        )));
                    }
                    let mut args = Vec::with_capacity(f.arity);
                    for it in &items[2..2 + f.arity] {
                        args.push(index(&atom(it)?)?);
                    }
                    let img = index(&atom(&items[items.len() - 1])?)?;
                    st.funs.entry(name).or_default().insert(args, img);
                }
                _ => return Err(StructureError::Parse(format!("unknown structure form {form}"))),
            }
        }

        // totality
        st.dist = Vec::with_capacity(n);
        for (i, row) in dist.into_iter().enumerate() {
            let mut out = Vec::with_capacity(n);
            for (j, entry) in row.into_iter().enumerate() {
                out.push(entry.ok_or_else(|| {
                    StructureError::IncompleteTable(format!(
                        "distance {} {}",
                        points[i], points[j]
                    ))
                })?);
            }
            st.dist.push(out);
        }
        st.gauge = gauge
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.ok_or_else(|| StructureError::IncompleteTable(format!("gauge {}", points[i])))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for p in &signature.preds {
            let table = st.preds.entry(p.name.clone()).or_default();
            for t in st_tuples(n, p.arity) {
                if !table.contains_key(&t) {
                    return Err(StructureError::IncompleteTable(format!(
                        "predicate {} at {t:?}",
                        p.name
                    )));
                }
            }
        }
        for f in &signature.funs {
            let table = st.funs.entry(f.name.clone()).or_default();
            for t in st_tuples(n, f.arity) {
                if !table.contains_key(&t) {
                    return Err(StructureError::IncompleteTable(format!(
                        "function {} at {t:?}",
                        f.name
                    )));
                }
            }
        }
        Ok(st)
    }

    pub fn to_sexp_forms(&self) -> Vec<Sexp> {
        let mut out = Vec::new();
        let mut sig_items = vec![Sexp::atom("sig")];
        sig_items.extend(self.signature.to_sexp_forms());
        out.push(Sexp::list(sig_items));
        let mut pts = vec![Sexp::atom("points")];
        pts.extend(self.points.iter().map(Sexp::atom));
        out.push(Sexp::list(pts));
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                out.push(Sexp::list(vec![
                    Sexp::atom("dist"),
                    Sexp::atom(&self.points[i]),
                    Sexp::atom(&self.points[j]),
                    Sexp::atom(rat_str(&self.dist[i][j])),
                ]));
            }
        }
        for i in 0..self.len() {
            out.push(Sexp::list(vec![
                Sexp::atom("gauge"),
                Sexp::atom(&self.points[i]),
                Sexp::atom(rat_str(&self.gauge[i])),
            ]));
        }
        for (name, table) in &self.preds {
            for (args, value) in table {
                let mut items = vec![Sexp::atom("pred"), Sexp::atom(name)];
                items.extend(args.iter().map(|&i| Sexp::atom(&self.points[i])));
                items.push(Sexp::atom(rat_str(value)));
                out.push(Sexp::list(items));
            }
        }
        for (name, table) in &self.funs {
            for (args, img) in table {
                let mut items = vec![Sexp::atom("fun"), Sexp::atom(name)];
                items.extend(args.iter().map(|&i| Sexp::atom(&self.points[i])));
                items.push(Sexp::atom(&self.points[*img]));
                out.push(Sexp::list(items));
            }
        }
        out
    }

    pub fn to_file_text(&self) -> String {
        self.to_sexp_forms()
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }
}

fn st_tuples(n: usize, arity: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        let mut next = Vec::with_capacity(out.len() * n.max(1));
        for t in &out {
            for i in 0..n {
                let mut t2 = t.clone();
                t2.push(i);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

// ---------------------------------------------------------------------------
// validation

#[derive(Clone, Debug)]
pub enum ValidationFailure {
    NegativeDistance { a: String, b: String },
    NonzeroDiagonal { a: String },
    Asymmetric { a: String, b: String },
    IndiscernibleAtZero { a: String, b: String },
    Triangle { a: String, b: String, c: String },
    NegativeGauge { a: String },
    GaugeNotLipschitz { a: String, b: String },
    ModulusViolation { symbol: String, detail: String },
}

impl std::fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use ValidationFailure::*;
        match self {
            NegativeDistance { a, b } => write!(f, "negative distance between {a} and {b}"),
            NonzeroDiagonal { a } => write!(f, "d({a},{a}) != 0"),
            Asymmetric { a, b } => write!(f, "d({a},{b}) != d({b},{a})"),
            IndiscernibleAtZero { a, b } => write!(f, "d({a},{b}) = 0 but {a} != {b}"),
            Triangle { a, b, c } => write!(f, "triangle inequality fails on ({a},{b},{c})"),
            NegativeGauge { a } => write!(f, "negative gauge at {a}"),
            GaugeNotLipschitz { a, b } => write!(f, "|nu({a}) - nu({b})| > d({a},{b})"),
            ModulusViolation { symbol, detail } => {
                write!(f, "symbol {symbol} violates its modulus: {detail}")
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Builds the finite-map table of a predicate symbol for `respects_check`.
pub fn predicate_table(m: &GaugedStructure, name: &str, arity: usize) -> FiniteMap {
    let tuples = m.tuples(arity);
    let k = tuples.len();
    let mut dom_dist = vec![vec![Rat::zero(); k]; k];
    let mut dom_gauge = vec![Rat::zero(); k];
    let mut values = Vec::with_capacity(k);
    for (i, t) in tuples.iter().enumerate() {
        dom_gauge[i] = m.tuple_gauge(t);
        let v = match name {
            DIST => m.dist[t[0]][t[1]].clone(),
            GAUGE => m.gauge[t[0]].clone(),
            _ => m.preds[name][t].clone(),
        };
        values.push(v);
        for (j, u) in tuples.iter().enumerate() {
            dom_dist[i][j] = m.tuple_dist(t, u);
        }
    }
    FiniteMap::predicate_image(dom_dist, dom_gauge, &values)
}

/// Builds the finite-map table of a function symbol for `respects_check`.
pub fn function_table(m: &GaugedStructure, name: &str, arity: usize) -> FiniteMap {
    let tuples = m.tuples(arity);
    let k = tuples.len();
    let mut dom_dist = vec![vec![Rat::zero(); k]; k];
    let mut dom_gauge = vec![Rat::zero(); k];
    let mut img_dist = vec![vec![Rat::zero(); k]; k];
    let mut img_gauge = vec![Rat::zero(); k];
    let images: Vec<usize> = tuples.iter().map(|t| m.funs[name][t]).collect();
    for (i, t) in tuples.iter().enumerate() {
        dom_gauge[i] = m.tuple_gauge(t);
        img_gauge[i] = m.gauge[images[i]].clone();
        for (j, u) in tuples.iter().enumerate() {
            dom_dist[i][j] = m.tuple_dist(t, u);
            img_dist[i][j] = m.dist[images[i]][images[j]].clone();
        }
    }
    FiniteMap { dom_dist, dom_gauge, img_dist, img_gauge }
}

/// Exhaustive check of every structure invariant; failures are data, not
/// errors.
pub fn validate(m: &GaugedStructure) -> ValidationReport {
    let mut failures = Vec::new();
    let n = m.len();
    for i in 0..n {
        if m.dist[i][i] != Rat::zero() {
            failures.push(ValidationFailure::NonzeroDiagonal { a: m.points[i].clone() });
        }
        if m.gauge[i] < Rat::zero() {
            failures.push(ValidationFailure::NegativeGauge { a: m.points[i].clone() });
        }
        for j in 0..n {
            if m.dist[i][j] < Rat::zero() {
                failures.push(ValidationFailure::NegativeDistance {
                    a: m.points[i].clone(),
                    b: m.points[j].clone(),
                });
            }
            if m.dist[i][j] != m.dist[j][i] {
                failures.push(ValidationFailure::Asymmetric {
                    a: m.points[i].clone(),
                    b: m.points[j].clone(),
                });
            }
            if i != j && m.dist[i][j].is_zero() {
                failures.push(ValidationFailure::IndiscernibleAtZero {
                    a: m.points[i].clone(),
                    b: m.points[j].clone(),
                });
            }
            let dg = &m.gauge[i] - &m.gauge[j];
            let dg = if dg < Rat::zero() { -dg } else { dg };
            if dg > m.dist[i][j] {
                failures.push(ValidationFailure::GaugeNotLipschitz {
                    a: m.points[i].clone(),
                    b: m.points[j].clone(),
                });
            }
            for k in 0..n {
                if &m.dist[i][j] + &m.dist[j][k] < m.dist[i][k] {
                    failures.push(ValidationFailure::Triangle {
                        a: m.points[i].clone(),
                        b: m.points[j].clone(),
                        c: m.points[k].clone(),
                    });
                }
            }
        }
    }

    let mut symbols: Vec<(String, usize, crate::modulus::ContinuityModulus, bool)> = vec![
        (DIST.to_string(), 2, m.signature.dist_modulus.clone(), false),
        (GAUGE.to_string(), 1, m.signature.gauge_modulus.clone(), false),
    ];
    for p in &m.signature.preds {
        symbols.push((p.name.clone(), p.arity, p.modulus.clone(), false));
    }
    for f in &m.signature.funs {
        symbols.push((f.name.clone(), f.arity, f.modulus.clone(), true));
    }
    for (name, arity, delta, is_fun) in symbols {
        if m.is_empty() && arity > 0 {
            continue;
        }
        if is_fun && m.is_empty() {
            // a zero-ary function needs a value; any function on an empty
            // structure with arity 0 cannot have a total table
            failures.push(ValidationFailure::ModulusViolation {
                symbol: name,
                detail: "constant symbol has no interpretation in an empty structure".into(),
            });
            continue;
        }
        let table = if is_fun {
            function_table(m, &name, arity)
        } else {
            predicate_table(m, &name, arity)
        };
        match modulus::respects_check(&table, &delta) {
            Ok(report) if report.pass => {}
            Ok(report) => {
                let v = report.violation.expect("failing report has witness");
                failures.push(ValidationFailure::ModulusViolation {
                    symbol: name,
                    detail: format!(
                        "{:?} clause at tuple pair ({}, {}) with epsilon {}",
                        v.clause,
                        v.source,
                        v.target,
                        rat_str(&v.epsilon)
                    ),
                });
            }
            Err(e) => failures.push(ValidationFailure::ModulusViolation {
                symbol: name,
                detail: e.to_string(),
            }),
        }
    }
    ValidationReport { failures }
}

// ---------------------------------------------------------------------------
// evaluation

pub fn eval_term(
    m: &GaugedStructure,
    t: &Term,
    assignment: &Assignment,
) -> Result<usize, StructureError> {
    match t {
        Term::Var(v) => assignment
            .get(v)
            .copied()
            .ok_or_else(|| StructureError::Unassigned(v.clone())),
        Term::App(f, args) => {
            let mut points = Vec::with_capacity(args.len());
            for a in args {
                points.push(eval_term(m, a, assignment)?);
            }
            m.fun_value(f, &points)
        }
    }
}

/// Formula tree with every quantifier's limit formula resolved up front
/// and structure-independent subtrees folded into constants, so repeated
/// evaluation never re-derives limits or re-walks dyadic constant trees.
enum Prepared {
    Const(Rat),
    Atom(String, Vec<Term>),
    Half(Box<Prepared>),
    Add(Box<Prepared>, Box<Prepared>),
    Sub(Box<Prepared>, Box<Prepared>),
    Quant { is_sup: bool, var: String, body: Box<Prepared>, limit: Box<Prepared> },
}

fn fold1(a: Prepared, make: impl Fn(Box<Prepared>) -> Prepared, op: impl Fn(&Rat) -> Rat) -> Prepared {
    match a {
        Prepared::Const(x) => Prepared::Const(op(&x)),
        other => make(Box::new(other)),
    }
}

fn fold2(
    a: Prepared,
    b: Prepared,
    make: impl Fn(Box<Prepared>, Box<Prepared>) -> Prepared,
    op: impl Fn(&Rat, &Rat) -> Rat,
) -> Prepared {
    match (a, b) {
        (Prepared::Const(x), Prepared::Const(y)) => Prepared::Const(op(&x, &y)),
        (x, y) => make(Box::new(x), Box::new(y)),
    }
}

fn prepare(f: &Formula) -> Result<Prepared, StructureError> {
    Ok(match f {
        Formula::Atom(p, terms) => Prepared::Atom(p.clone(), terms.clone()),
        Formula::One => Prepared::Const(Rat::from_integer(1.into())),
        Formula::Half(a) => fold1(prepare(a)?, Prepared::Half, |x| x / Rat::from_integer(2.into())),
        Formula::Add(a, b) => fold2(prepare(a)?, prepare(b)?, Prepared::Add, |x, y| x + y),
        Formula::Sub(a, b) => fold2(prepare(a)?, prepare(b)?, Prepared::Sub, monus),
        Formula::Sup(x, body) | Formula::Inf(x, body) => {
            // the limit formula has complexity at most the body's, so this
            // recursion terminates
            let limit = analysis::limit_formula(body, x)?;
            let body_p = prepare(body)?;
            if let Prepared::Const(c) = &body_p {
                // a constant body has a constant limit equal to it
                return Ok(Prepared::Const(c.clone()));
            }
            Prepared::Quant {
                is_sup: matches!(f, Formula::Sup(..)),
                var: x.clone(),
                body: Box::new(body_p),
                limit: Box::new(prepare(&limit)?),
            }
        }
    })
}

fn eval_prepared(
    m: &GaugedStructure,
    f: &Prepared,
    assignment: &mut Assignment,
) -> Result<Rat, StructureError> {
    match f {
        Prepared::Const(c) => Ok(c.clone()),
        Prepared::Atom(p, terms) => {
            let mut args = Vec::with_capacity(terms.len());
            for t in terms {
                args.push(eval_term(m, t, assignment)?);
            }
            match p.as_str() {
                DIST => Ok(m.dist[args[0]][args[1]].clone()),
                GAUGE => Ok(m.gauge[args[0]].clone()),
                _ => Ok(m.pred_value(p, &args)?.clone()),
            }
        }
        Prepared::Half(a) => Ok(eval_prepared(m, a, assignment)? / Rat::from_integer(2.into())),
        Prepared::Add(a, b) => {
            Ok(eval_prepared(m, a, assignment)? + eval_prepared(m, b, assignment)?)
        }
        Prepared::Sub(a, b) => Ok(monus(
            &eval_prepared(m, a, assignment)?,
            &eval_prepared(m, b, assignment)?,
        )),
        Prepared::Quant { is_sup, var, body, limit } => {
            let saved = assignment.get(var).copied();
            let mut acc = eval_prepared(m, limit, assignment)?;
            for i in 0..m.len() {
                assignment.insert(var.clone(), i);
                let v = eval_prepared(m, body, assignment)?;
                acc = if *is_sup { rat_max(&acc, &v) } else { rat_min(&acc, &v) };
            }
            match saved {
                Some(old) => assignment.insert(var.clone(), old),
                None => assignment.remove(var),
            };
            Ok(acc)
        }
    }
}

/// Exact value of a well-formed formula under an assignment of its free
/// variables. Quantifiers range over the points of `m` together with the
/// ideal point at infinity, whose contribution is the limit formula; on an
/// empty structure the quantifier value is exactly the limit value.
pub fn eval_formula(
    m: &GaugedStructure,
    f: &Formula,
    assignment: &Assignment,
) -> Result<Rat, StructureError> {
    let prepared = prepare(f)?;
    let mut scratch = assignment.clone();
    eval_prepared(m, &prepared, &mut scratch)
}

/// A formula readied for repeated evaluation under many assignments.
pub struct PreparedFormula(Prepared);

impl PreparedFormula {
    pub fn new(f: &Formula) -> Result<Self, StructureError> {
        Ok(PreparedFormula(prepare(f)?))
    }

    pub fn eval(&self, m: &GaugedStructure, assignment: &Assignment) -> Result<Rat, StructureError> {
        let mut scratch = assignment.clone();
        eval_prepared(m, &self.0, &mut scratch)
    }
}

/// All assignments of the given variables to points of `m`.
pub fn all_assignments(m: &GaugedStructure, vars: &BTreeSet<String>) -> Vec<Assignment> {
    let vars: Vec<&String> = vars.iter().collect();
    let mut out = vec![Assignment::new()];
    for v in vars {
        let mut next = Vec::with_capacity(out.len() * m.len());
        for a in &out {
            for i in 0..m.len() {
                let mut a2 = a.clone();
                a2.insert(v.clone(), i);
                next.push(a2);
            }
        }
        out = next;
    }
    out
}

// ---------------------------------------------------------------------------
// restricted quantifiers

/// The least `m` admitting a dyadic `s = ℓ·2^-m` with
/// `r ≤ s < (ℓ+1)·2^-m ≤ r'`, then the least such `s`.
pub fn dyadic_window(r: &Rat, rp: &Rat) -> Result<(u32, Rat), StructureError> {
    if !(Rat::zero() < *r && r < rp) {
        return Err(StructureError::BadWindow(rat_str(r), rat_str(rp)));
    }
    for m in 0..1024u32 {
        let scale = crate::rational::pow2(m);
        let ell = (r * &scale).ceil();
        let s = &ell / &scale;
        let next = (&ell + Rat::from_integer(1.into())) / &scale;
        if next <= *rp {
            return Ok((m, s));
        }
    }
    Err(StructureError::WindowTooFine)
}

fn gauge_atom(x: &str) -> Formula {
    Formula::Atom(GAUGE.to_string(), vec![Term::var(x)])
}

/// Balanced sum of `count >= 1` clones of a formula.
fn balanced_sum(piece: &Formula, count: u64) -> Formula {
    if count == 1 {
        piece.clone()
    } else {
        let left = count / 2;
        Formula::add(balanced_sum(piece, count - left), balanced_sum(piece, left))
    }
}

/// Truncation of a formula at a positive dyadic rational.
fn truncate_at_rat(f: &Formula, q: &Rat) -> Formula {
    let (k, m) = dyadic_parts(q).expect("dyadic by construction");
    truncate_at(f, k, m)
}

/// `φ↓^{x ≤ r,r'}`: equal to `φ` where `ν(x) ≤ r`, zero where `ν(x) ≥ r'`,
/// encoded so the result is syntactically bounded and eventually constant
/// in `x`. Unbounded inputs are first truncated at 1. Pointwise the result
/// is `φ ∸ k·2^m·(ν(x) ∸ s)` with `k = ⌈B⌉` and `(m, s)` the dyadic
/// window; the multiple is realized as one gauge-subtraction step plus a
/// balanced sum of window pieces, keeping tree depth logarithmic.
pub fn build_down(
    f: &Formula,
    x: &str,
    r: &Rat,
    rp: &Rat,
) -> Result<Formula, StructureError> {
    let base = if analysis::classify(f)?.bounded {
        f.clone()
    } else {
        truncate_at(f, 1, 0)
    };
    let k = analysis::integer_bound(&base)?;
    let (m, s) = dyadic_window(r, rp)?;
    let copies = k
        .checked_mul(1u64.checked_shl(m).ok_or(StructureError::WindowTooFine)?)
        .ok_or(StructureError::WindowTooFine)?;

    // one legal gauge-subtraction step: (φ + (ν(x) ∧ s)) ∸ ν(x) = φ ∸ (ν(x) ∸ s)
    let step = Formula::sub(
        Formula::add(base, truncate_at_rat(&gauge_atom(x), &s)),
        gauge_atom(x),
    );
    let windowed = if copies == 1 {
        step
    } else {
        // remaining copies: ((ν(x) ∧ s₊) ∸ s), each bounded and eventually
        // constant, summed in balanced fashion
        let s_plus = &s + crate::rational::pow2(m).recip();
        let s_formula = {
            let (ks, ms) = dyadic_parts(&s).expect("dyadic");
            dyadic_const(ks, ms)
        };
        let piece = Formula::sub(truncate_at_rat(&gauge_atom(x), &s_plus), s_formula);
        Formula::sub(step, balanced_sum(&piece, copies - 1))
    };
    // the windowed formula never exceeds the original, so truncating at k
    // leaves every value unchanged while keeping the extracted syntactic
    // bound at k; without this, nested windows escalate their copy counts
    Ok(truncate_at(&windowed, k, 0))
}

/// `φ↑^{x ≤ r,r'} = k ∸ (k ∸ φ)↓^{x ≤ r,r'}`.
pub fn build_up(f: &Formula, x: &str, r: &Rat, rp: &Rat) -> Result<Formula, StructureError> {
    let base = if analysis::classify(f)?.bounded {
        f.clone()
    } else {
        truncate_at(f, 1, 0)
    };
    let k = analysis::integer_bound(&base)?;
    let k_const = dyadic_const(k, 0);
    let flipped = Formula::sub(k_const.clone(), base);
    Ok(Formula::sub(k_const, build_down(&flipped, x, r, rp)?))
}

/// `sup_x^{r,r'} φ = sup_x φ↓^{x ≤ r,r'}`.
pub fn sup_window(f: &Formula, x: &str, r: &Rat, rp: &Rat) -> Result<Formula, StructureError> {
    Ok(Formula::sup(x, build_down(f, x, r, rp)?))
}

/// `inf_x^{r,r'} φ = inf_x φ↑^{x ≤ r,r'}`.
pub fn inf_window(f: &Formula, x: &str, r: &Rat, rp: &Rat) -> Result<Formula, StructureError> {
    Ok(Formula::inf(x, build_up(f, x, r, rp)?))
}

// ---------------------------------------------------------------------------
// prenex normal form

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Quant {
    Sup,
    Inf,
}

impl Quant {
    fn flip(self) -> Quant {
        match self {
            Quant::Sup => Quant::Inf,
            Quant::Inf => Quant::Sup,
        }
    }
}

fn split(f: &Formula) -> (Vec<(Quant, String)>, Formula) {
    match f {
        Formula::Atom(..) | Formula::One => (Vec::new(), f.clone()),
        Formula::Half(a) => {
            let (p, m) = split(a);
            (p, Formula::half(m))
        }
        Formula::Add(a, b) => {
            let (mut pa, ma) = split(a);
            let (pb, mb) = split(b);
            pa.extend(pb);
            (pa, Formula::add(ma, mb))
        }
        Formula::Sub(a, b) => {
            let (mut pa, ma) = split(a);
            let (pb, mb) = split(b);
            // subtraction is antitone in its second argument, so
            // quantifiers pulled across it flip polarity
            pa.extend(pb.into_iter().map(|(q, v)| (q.flip(), v)));
            (pa, Formula::sub(ma, mb))
        }
        Formula::Sup(x, body) => {
            let (mut p, m) = split(body);
            p.insert(0, (Quant::Sup, x.clone()));
            (p, m)
        }
        Formula::Inf(x, body) => {
            let (mut p, m) = split(body);
            p.insert(0, (Quant::Inf, x.clone()));
            (p, m)
        }
    }
}

/// Prenex normal form: a quantifier prefix over a quantifier-free matrix
/// with evaluation preserved exactly. Bound variables are renamed apart
/// first; quantifiers in the second argument of a subtraction flip.
pub fn prenex(f: &Formula) -> Formula {
    let renamed = crate::syntax::rename_bound(f);
    let (prefix, matrix) = split(&renamed);
    let mut out = matrix;
    for (q, x) in prefix.into_iter().rev() {
        out = match q {
            Quant::Sup => Formula::sup(&x, out),
            Quant::Inf => Formula::inf(&x, out),
        };
    }
    out
}

// ---------------------------------------------------------------------------
// principal ultraproduct

/// Ultraproduct along the principal ultrafilter concentrated at `j`: every
/// limit collapses to coordinate `j`, so the product is the factor itself.
pub fn principal_ultraproduct(
    factors: &[GaugedStructure],
    j: usize,
) -> Result<GaugedStructure, StructureError> {
    if j >= factors.len() {
        return Err(StructureError::IndexOutOfRange(j));
    }
    let sig_text = factors[j]
        .signature
        .to_sexp_forms()
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    for other in factors {
        let other_text = other
            .signature
            .to_sexp_forms()
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        if other_text != sig_text {
            return Err(StructureError::SignatureMismatch);
        }
    }
    Ok(factors[j].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulus::ContinuityModulus;
    use crate::rational::{rat, ratio};
    use crate::syntax::{free_vars, parse_formula};

    fn rel_sig() -> Signature {
        Signature::new()
    }

    /// Two points at distance 1 with gauges (0, g).
    fn two_point(g: Rat) -> GaugedStructure {
        let d = rat_max(&rat(1), &g);
        GaugedStructure {
            signature: Arc::new(rel_sig()),
            points: vec!["a".into(), "b".into()],
            dist: vec![vec![rat(0), d.clone()], vec![d, rat(0)]],
            gauge: vec![rat(0), g],
            preds: BTreeMap::new(),
            funs: BTreeMap::new(),
        }
    }

    #[test]
    fn validate_single_point() {
        let m = GaugedStructure {
            signature: Arc::new(rel_sig()),
            points: vec!["a".into()],
            dist: vec![vec![rat(0)]],
            gauge: vec![rat(0)],
            preds: BTreeMap::new(),
            funs: BTreeMap::new(),
        };
        assert!(validate(&m).pass());
    }

    #[test]
    fn validate_catches_lipschitz_failure() {
        let m = GaugedStructure {
            signature: Arc::new(rel_sig()),
            points: vec!["a".into(), "b".into()],
            dist: vec![vec![rat(0), rat(1)], vec![rat(1), rat(0)]],
            gauge: vec![rat(0), rat(5)],
            preds: BTreeMap::new(),
            funs: BTreeMap::new(),
        };
        let report = validate(&m);
        assert!(report
            .failures
            .iter()
            .any(|f| matches!(f, ValidationFailure::GaugeNotLipschitz { .. })));
    }

    #[test]
    fn validate_catches_modulus_failure() {
        let sig = rel_sig()
            .with_pred("P", 1, ContinuityModulus::identity())
            .unwrap();
        let mut preds = BTreeMap::new();
        let mut table = BTreeMap::new();
        table.insert(vec![0usize], rat(0));
        table.insert(vec![1usize], rat(10));
        preds.insert("P".to_string(), table);
        let m = GaugedStructure {
            signature: Arc::new(sig),
            points: vec!["a".into(), "b".into()],
            dist: vec![vec![rat(0), rat(1)], vec![rat(1), rat(0)]],
            gauge: vec![rat(0), rat(1)],
            preds,
            funs: BTreeMap::new(),
        };
        let report = validate(&m);
        assert!(report
            .failures
            .iter()
            .any(|f| matches!(f, ValidationFailure::ModulusViolation { symbol, .. } if symbol == "P")));
    }

    #[test]
    fn eval_with_infinity_term() {
        // sup_x (1 ∸ ν(x)) on two points with gauges (0, n): the witness of
        // gauge 0 gives 1; the limit term contributes 0
        let m = two_point(rat(7));
        let f = parse_formula("(sup x (sub (const 1) (nu x)))", &rel_sig()).unwrap();
        assert_eq!(eval_formula(&m, &f, &Assignment::new()).unwrap(), rat(1));
        // the dual sentence vanishes for n >= 1 because of the limit term
        let g = parse_formula("(inf x (sub (const 1) (nu x)))", &rel_sig()).unwrap();
        assert_eq!(eval_formula(&m, &g, &Assignment::new()).unwrap(), rat(0));
    }

    #[test]
    fn eval_on_empty_structure_uses_limit_only() {
        let m = GaugedStructure::empty(Arc::new(rel_sig()));
        let f = parse_formula("(sup x (sub (const 1) (nu x)))", &rel_sig()).unwrap();
        assert_eq!(eval_formula(&m, &f, &Assignment::new()).unwrap(), rat(0));
    }

    #[test]
    fn eval_dyadic_constant() {
        let m = two_point(rat(1));
        let f = dyadic_const(3, 1);
        assert_eq!(eval_formula(&m, &f, &Assignment::new()).unwrap(), ratio(3, 2));
    }

    #[test]
    fn dyadic_window_examples() {
        // enumeration oracle over m = 0, 1, ...
        assert_eq!(dyadic_window(&rat(1), &rat(2)).unwrap(), (0, rat(1)));
        assert_eq!(dyadic_window(&ratio(1, 3), &ratio(2, 3)).unwrap(), (3, ratio(3, 8)));
        assert_eq!(dyadic_window(&ratio(1, 2), &rat(1)).unwrap(), (1, ratio(1, 2)));
        assert!(dyadic_window(&rat(2), &rat(1)).is_err());
        assert!(dyadic_window(&rat(0), &rat(1)).is_err());
    }

    #[test]
    fn build_down_boundary_behavior() {
        let sig = rel_sig();
        let phi = parse_formula("(sub (const 1) (half (nu y)))", &sig).unwrap();
        let down = build_down(&phi, "x", &rat(1), &rat(2)).unwrap();
        let a = crate::analysis::classify(&down).unwrap();
        assert!(a.bounded);
        assert!(a.is_ec("x"));

        // evaluation at nu(x) <= r equals eval(phi); at nu(x) >= r' equals 0
        for g in [rat(0), ratio(1, 2), rat(1), rat(2), rat(3)] {
            let m = two_point(g.clone());
            for xi in 0..2usize {
                let mut asg = Assignment::new();
                asg.insert("x".into(), xi);
                asg.insert("y".into(), 0);
                let v_down = eval_formula(&m, &down, &asg).unwrap();
                let v_phi = eval_formula(&m, &phi, &asg).unwrap();
                let nu_x = m.gauge[xi].clone();
                if nu_x <= rat(1) {
                    assert_eq!(v_down, v_phi);
                }
                if nu_x >= rat(2) {
                    assert_eq!(v_down, rat(0));
                }
                // windowed value never exceeds the original
                assert!(v_down <= v_phi);
            }
        }
    }

    #[test]
    fn build_down_multi_copy_window() {
        // window (1/3, 2/3) forces m = 3, so k·2^m = 8 copies
        let sig = rel_sig();
        let phi = parse_formula("(sub (const 1) (half (nu y)))", &sig).unwrap();
        let down = build_down(&phi, "x", &ratio(1, 3), &ratio(2, 3)).unwrap();
        let a = crate::analysis::classify(&down).unwrap();
        assert!(a.bounded && a.is_ec("x"));
        for g in [rat(0), ratio(1, 4), ratio(1, 3), ratio(1, 2), ratio(2, 3), rat(1)] {
            let m = two_point(g.clone());
            let mut asg = Assignment::new();
            asg.insert("x".into(), 1);
            asg.insert("y".into(), 0);
            let v_down = eval_formula(&m, &down, &asg).unwrap();
            let v_phi = eval_formula(&m, &phi, &asg).unwrap();
            // pointwise identity: φ ∸ K(ν ∸ s) with K = 8, s = 3/8
            let expected = monus(&v_phi, &(rat(8) * monus(&g, &ratio(3, 8))));
            assert_eq!(v_down, expected);
        }
    }

    #[test]
    fn sup_window_sandwich_on_far_structure() {
        let sig = rel_sig();
        let phi = parse_formula("(sub (const 1) (half (nu x)))", &sig).unwrap();
        // all points of gauge above r': value is 0
        let m = two_point(rat(5));
        let mut far = m.clone();
        far.gauge = vec![rat(4), rat(5)];
        far.dist = vec![vec![rat(0), rat(1)], vec![rat(1), rat(0)]];
        let w = sup_window(&phi, "x", &rat(1), &rat(2)).unwrap();
        assert_eq!(eval_formula(&far, &w, &Assignment::new()).unwrap(), rat(0));
    }

    #[test]
    fn prenex_shapes_and_equivalence() {
        let sig = rel_sig();
        let cases = [
            "(d x y)",
            "(add (const 1) (sup x (sub (const 1) (nu x))))",
            "(sub (const 1) (sup x (sub (const 1) (nu x))))",
            "(half (inf x (sub (const 1) (nu x))))",
            "(sub (sup x (sub (const 1) (nu x))) (inf x (sub (half (const 1)) (nu x))))",
        ];
        for text in cases {
            let f = parse_formula(text, &sig).unwrap();
            let p = prenex(&f);
            assert!(p.is_prenex(), "{p} not prenex");
            assert!(crate::analysis::well_formed(&p).0, "{p} ill-formed");
            for g in [rat(0), ratio(1, 2), rat(3)] {
                let m = two_point(g);
                for asg in all_assignments(&m, &free_vars(&f)) {
                    assert_eq!(
                        eval_formula(&m, &f, &asg).unwrap(),
                        eval_formula(&m, &p, &asg).unwrap(),
                        "prenex changed value of {text}"
                    );
                }
            }
        }
        // quantifier-free input is unchanged
        let f = parse_formula("(add (nu x) (d x y))", &sig).unwrap();
        assert_eq!(prenex(&f), f);
    }

    #[test]
    fn principal_ultraproduct_is_projection() {
        let m = two_point(rat(1));
        let n = two_point(rat(3));
        let u = principal_ultraproduct(&[m.clone(), n.clone()], 1).unwrap();
        assert_eq!(u.gauge, n.gauge);
        assert!(principal_ultraproduct(&[m.clone()], 3).is_err());
        let single = principal_ultraproduct(&[m.clone()], 0).unwrap();
        assert_eq!(single.points, m.points);
    }

    #[test]
    fn term_evaluation_composes_lookups() {
        let sig = Signature::new()
            .with_fun("f", 1, ContinuityModulus::identity())
            .unwrap()
            .with_fun("c", 0, ContinuityModulus::identity())
            .unwrap();
        let mut m = two_point(rat(1));
        m.signature = Arc::new(sig);
        let mut f_table = BTreeMap::new();
        f_table.insert(vec![0usize], 1usize);
        f_table.insert(vec![1usize], 1usize);
        m.funs.insert("f".into(), f_table);
        m.funs.insert("c".into(), BTreeMap::from([(vec![], 0usize)]));
        let mut asg = Assignment::new();
        asg.insert("x".into(), 0);
        // variable, constant, and double application
        assert_eq!(eval_term(&m, &Term::var("x"), &asg).unwrap(), 0);
        assert_eq!(eval_term(&m, &Term::app("c", vec![]), &asg).unwrap(), 0);
        let ffx = Term::app("f", vec![Term::app("f", vec![Term::var("x")])]);
        assert_eq!(eval_term(&m, &ffx, &asg).unwrap(), 1);
        assert!(eval_term(&m, &Term::var("w"), &asg).is_err());
    }

    #[test]
    fn structure_file_round_trip() {
        let text = r#"
(sig (pred P 1 id) (fun f 1 (std 1)))
(points a b)
(dist a b 1)
(gauge a 0)
(gauge b 1)
(pred P a 1/2)
(pred P b 1)
(fun f a b)
(fun f b b)
"#;
        let m = GaugedStructure::parse(text, None).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.dist[0][1], rat(1));
        let back = GaugedStructure::parse(&m.to_file_text(), None).unwrap();
        assert_eq!(back.dist, m.dist);
        assert_eq!(back.preds, m.preds);
        assert_eq!(back.funs, m.funs);

        // missing gauge is an incomplete table
        let bad = "(points a b) (dist a b 1) (gauge a 0)";
        assert!(matches!(
            GaugedStructure::parse(bad, None),
            Err(StructureError::IncompleteTable(_))
        ));
    }
}
