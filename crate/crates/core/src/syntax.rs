//! Signatures, terms, formulas, their s-expression syntax, and signature
//! extensions (named constants, function graphs).
//!
//! The connective system is fixed to `{1, x ∸ y, x + y, x/2}`; quantifier
//! legality (the body being eventually constant in the bound variable) is
//! the analysis module's job, not assumed here.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::modulus::ContinuityModulus;
use crate::rational::{parse_rat, pow2, rat_str, Rat};
use crate::sexp::{self, Sexp};

pub const DIST: &str = "d";
pub const GAUGE: &str = "nu";

#[derive(Clone, Debug)]
pub struct PredSymbol {
    pub name: String,
    pub arity: usize,
    pub modulus: ContinuityModulus,
}

#[derive(Clone, Debug)]
pub struct FunSymbol {
    pub name: String,
    pub arity: usize,
    pub modulus: ContinuityModulus,
}

/// A single-sorted unbounded continuous signature. The distinguished
/// binary distance `d` and unary gauge `nu` are always present and carry
/// their own moduli (standard for `d`, identity for `nu` by default).
#[derive(Clone, Debug)]
pub struct Signature {
    pub preds: Vec<PredSymbol>,
    pub funs: Vec<FunSymbol>,
    pub dist_modulus: ContinuityModulus,
    pub gauge_modulus: ContinuityModulus,
}

#[derive(Debug, Error)]
pub enum SyntaxError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("arity mismatch: {symbol} expects {expected} arguments, got {got}")]
    Arity { symbol: String, expected: usize, got: usize },
    #[error("name collision: {0:?} is already declared")]
    NameCollision(String),
    #[error("reserved name {0:?}")]
    ReservedName(String),
    #[error("constant in formula syntax must be dyadic, got {0}")]
    NonDyadicConstant(String),
}

impl Default for Signature {
    fn default() -> Self {
        Signature::new()
    }
}

impl Signature {
    /// The signature with only the distinguished symbols.
    pub fn new() -> Self {
        Signature {
            preds: Vec::new(),
            funs: Vec::new(),
            dist_modulus: ContinuityModulus::standard(2).expect("arity 2"),
            gauge_modulus: ContinuityModulus::identity(),
        }
    }

    pub fn with_pred(
        mut self,
        name: &str,
        arity: usize,
        modulus: ContinuityModulus,
    ) -> Result<Self, SyntaxError> {
        self.add_pred(name, arity, modulus)?;
        Ok(self)
    }

    pub fn with_fun(
        mut self,
        name: &str,
        arity: usize,
        modulus: ContinuityModulus,
    ) -> Result<Self, SyntaxError> {
        self.add_fun(name, arity, modulus)?;
        Ok(self)
    }

    pub fn add_pred(
        &mut self,
        name: &str,
        arity: usize,
        modulus: ContinuityModulus,
    ) -> Result<(), SyntaxError> {
        self.check_fresh(name)?;
        self.preds.push(PredSymbol { name: name.to_string(), arity, modulus });
        Ok(())
    }

    pub fn add_fun(
        &mut self,
        name: &str,
        arity: usize,
        modulus: ContinuityModulus,
    ) -> Result<(), SyntaxError> {
        self.check_fresh(name)?;
        self.funs.push(FunSymbol { name: name.to_string(), arity, modulus });
        Ok(())
    }

    fn check_fresh(&self, name: &str) -> Result<(), SyntaxError> {
        if name == DIST || name == GAUGE || RESERVED_HEADS.contains(&name) {
            return Err(SyntaxError::ReservedName(name.to_string()));
        }
        if self.pred(name).is_some() || self.fun(name).is_some() {
            return Err(SyntaxError::NameCollision(name.to_string()));
        }
        Ok(())
    }

    pub fn pred(&self, name: &str) -> Option<&PredSymbol> {
        self.preds.iter().find(|p| p.name == name)
    }

    pub fn fun(&self, name: &str) -> Option<&FunSymbol> {
        self.funs.iter().find(|f| f.name == name)
    }

    /// Arity and modulus of a predicate, covering the distinguished symbols.
    pub fn pred_info(&self, name: &str) -> Option<(usize, &ContinuityModulus)> {
        match name {
            DIST => Some((2, &self.dist_modulus)),
            GAUGE => Some((1, &self.gauge_modulus)),
            _ => self.pred(name).map(|p| (p.arity, &p.modulus)),
        }
    }

    pub fn is_relational(&self) -> bool {
        self.funs.is_empty()
    }

    pub fn to_sexp_forms(&self) -> Vec<Sexp> {
        let mut out = Vec::new();
        out.push(Sexp::list(vec![Sexp::atom("dist-modulus"), self.dist_modulus.to_sexp()]));
        out.push(Sexp::list(vec![Sexp::atom("gauge-modulus"), self.gauge_modulus.to_sexp()]));
        for p in &self.preds {
            out.push(Sexp::list(vec![
                Sexp::atom("pred"),
                Sexp::atom(&p.name),
                Sexp::atom(p.arity.to_string()),
                p.modulus.to_sexp(),
            ]));
        }
        for f in &self.funs {
            out.push(Sexp::list(vec![
                Sexp::atom("fun"),
                Sexp::atom(&f.name),
                Sexp::atom(f.arity.to_string()),
                f.modulus.to_sexp(),
            ]));
        }
        out
    }

    pub fn from_sexp_forms(forms: &[Sexp]) -> Result<Self, SyntaxError> {
        let mut sig = Signature::new();
        for form in forms {
            let items = form
                .as_list()
                .ok_or_else(|| SyntaxError::Parse(format!("expected a list form, got {form}")))?;
            let head = form
                .head()
                .ok_or_else(|| SyntaxError::Parse("empty signature form".into()))?;
            match head {
                "pred" | "fun" if items.len() == 4 => {
                    let name = items[1]
                        .as_atom()
                        .ok_or_else(|| SyntaxError::Parse("symbol name must be an atom".into()))?;
                    let arity: usize = items[2]
                        .as_atom()
                        .and_then(|a| a.parse().ok())
                        .ok_or_else(|| SyntaxError::Parse("arity must be a natural".into()))?;
                    let modulus = ContinuityModulus::from_sexp(&items[3])
                        .map_err(|e| SyntaxError::Parse(e.to_string()))?;
                    if head == "pred" {
                        sig.add_pred(name, arity, modulus)?;
                    } else {
                        sig.add_fun(name, arity, modulus)?;
                    }
                }
                "dist-modulus" if items.len() == 2 => {
                    sig.dist_modulus = ContinuityModulus::from_sexp(&items[1])
                        .map_err(|e| SyntaxError::Parse(e.to_string()))?;
                }
                "gauge-modulus" if items.len() == 2 => {
                    sig.gauge_modulus = ContinuityModulus::from_sexp(&items[1])
                        .map_err(|e| SyntaxError::Parse(e.to_string()))?;
                }
                _ => return Err(SyntaxError::Parse(format!("unknown signature form {form}"))),
            }
        }
        Ok(sig)
    }

    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        let forms = sexp::parse_many(text).map_err(|e| SyntaxError::Parse(e.to_string()))?;
        Self::from_sexp_forms(&forms)
    }
}

// ---------------------------------------------------------------------------
// terms and formulas

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    App(String, Vec<Term>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    /// Predicate applied to terms; covers the distinguished `d` and `nu`.
    Atom(String, Vec<Term>),
    One,
    Half(Box<Formula>),
    Add(Box<Formula>, Box<Formula>),
    /// Truncated subtraction `φ ∸ ψ`.
    Sub(Box<Formula>, Box<Formula>),
    Sup(String, Box<Formula>),
    Inf(String, Box<Formula>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::App(name.to_string(), args)
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    pub fn to_sexp(&self) -> Sexp {
        match self {
            Term::Var(v) => Sexp::atom(v),
            Term::App(f, args) => {
                let mut items = vec![Sexp::atom(f)];
                items.extend(args.iter().map(Term::to_sexp));
                Sexp::list(items)
            }
        }
    }
}

impl Formula {
    pub fn atom(pred: &str, terms: Vec<Term>) -> Formula {
        Formula::Atom(pred.to_string(), terms)
    }

    pub fn gauge_of_var(x: &str) -> Formula {
        Formula::Atom(GAUGE.to_string(), vec![Term::var(x)])
    }

    pub fn half(f: Formula) -> Formula {
        Formula::Half(Box::new(f))
    }

    pub fn add(a: Formula, b: Formula) -> Formula {
        Formula::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Formula, b: Formula) -> Formula {
        Formula::Sub(Box::new(a), Box::new(b))
    }

    pub fn sup(x: &str, body: Formula) -> Formula {
        Formula::Sup(x.to_string(), Box::new(body))
    }

    pub fn inf(x: &str, body: Formula) -> Formula {
        Formula::Inf(x.to_string(), Box::new(body))
    }

    /// `min(φ, ψ) = φ ∸ (φ ∸ ψ)`.
    pub fn min(a: Formula, b: Formula) -> Formula {
        Formula::sub(a.clone(), Formula::sub(a, b))
    }

    /// `max(φ, ψ) = φ + (ψ ∸ φ)`.
    pub fn max(a: Formula, b: Formula) -> Formula {
        Formula::add(a.clone(), Formula::sub(b, a))
    }

    /// `|φ - ψ| = (φ ∸ ψ) + (ψ ∸ φ)`.
    pub fn abs_diff(a: Formula, b: Formula) -> Formula {
        Formula::add(Formula::sub(a.clone(), b.clone()), Formula::sub(b, a))
    }

    /// The zero formula `1 ∸ 1`.
    pub fn zero() -> Formula {
        Formula::sub(Formula::One, Formula::One)
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Atom(..) | Formula::One => true,
            Formula::Half(f) => f.is_quantifier_free(),
            Formula::Add(a, b) | Formula::Sub(a, b) => {
                a.is_quantifier_free() && b.is_quantifier_free()
            }
            Formula::Sup(..) | Formula::Inf(..) => false,
        }
    }

    /// Quantifier prefix over a quantifier-free matrix.
    pub fn is_prenex(&self) -> bool {
        match self {
            Formula::Sup(_, body) | Formula::Inf(_, body) => body.is_prenex(),
            other => other.is_quantifier_free(),
        }
    }
}

/// Free variables; quantifiers bind.
pub fn free_vars(f: &Formula) -> BTreeSet<String> {
    fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match f {
            Formula::Atom(_, terms) => {
                let mut vars = BTreeSet::new();
                for t in terms {
                    t.collect_vars(&mut vars);
                }
                for v in vars {
                    if !bound.contains(&v) {
                        out.insert(v);
                    }
                }
            }
            Formula::One => {}
            Formula::Half(a) => go(a, bound, out),
            Formula::Add(a, b) | Formula::Sub(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            Formula::Sup(x, body) | Formula::Inf(x, body) => {
                bound.push(x.clone());
                go(body, bound, out);
                bound.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut Vec::new(), &mut out);
    out
}

/// Renames bound variables so they are pairwise distinct and distinct from
/// every free variable; evaluation is preserved. Binders that already
/// satisfy this are left untouched.
pub fn rename_bound(f: &Formula) -> Formula {
    fn fresh(base: &str, used: &mut BTreeSet<String>) -> String {
        if used.insert(base.to_string()) {
            return base.to_string();
        }
        let mut i = 1u32;
        loop {
            let cand = format!("{base}_{i}");
            if used.insert(cand.clone()) {
                return cand;
            }
            i += 1;
        }
    }

    fn rename_term(t: &Term, env: &[(String, String)]) -> Term {
        match t {
            Term::Var(v) => {
                for (from, to) in env.iter().rev() {
                    if from == v {
                        return Term::Var(to.clone());
                    }
                }
                Term::Var(v.clone())
            }
            Term::App(name, args) => {
                Term::App(name.clone(), args.iter().map(|a| rename_term(a, env)).collect())
            }
        }
    }

    fn go(f: &Formula, env: &mut Vec<(String, String)>, used: &mut BTreeSet<String>) -> Formula {
        match f {
            Formula::Atom(p, terms) => {
                Formula::Atom(p.clone(), terms.iter().map(|t| rename_term(t, env)).collect())
            }
            Formula::One => Formula::One,
            Formula::Half(a) => Formula::half(go(a, env, used)),
            Formula::Add(a, b) => Formula::add(go(a, env, used), go(b, env, used)),
            Formula::Sub(a, b) => Formula::sub(go(a, env, used), go(b, env, used)),
            Formula::Sup(x, body) | Formula::Inf(x, body) => {
                let new_name = fresh(x, used);
                env.push((x.clone(), new_name.clone()));
                let new_body = go(body, env, used);
                env.pop();
                match f {
                    Formula::Sup(..) => Formula::sup(&new_name, new_body),
                    _ => Formula::inf(&new_name, new_body),
                }
            }
        }
    }

    let mut used = free_vars(f);
    go(f, &mut Vec::new(), &mut used)
}

/// A formula tree built from `1`, `+`, `/2` (and `1 ∸ 1` for zero) whose
/// value is exactly `k/2^m` in every structure under every assignment.
pub fn dyadic_const(k: u64, m: u32) -> Formula {
    if k == 0 {
        return Formula::zero();
    }
    fn ones(k: u64) -> Formula {
        if k == 1 {
            Formula::One
        } else {
            let left = k / 2;
            Formula::add(ones(k - left), ones(left))
        }
    }
    let mut f = ones(k);
    for _ in 0..m {
        f = Formula::half(f);
    }
    f
}

/// Exact rational value of a dyadic constant formula parameter pair.
pub fn dyadic_value(k: u64, m: u32) -> Rat {
    Rat::new(BigInt::from(k), BigInt::one() << m)
}

/// `(k, m)` with `q = k/2^m`, for nonnegative dyadic `q`.
pub fn dyadic_parts(q: &Rat) -> Option<(u64, u32)> {
    let (k, m) = crate::rational::as_dyadic(q)?;
    let k: u64 = k.try_into().ok()?;
    Some((k, m))
}

/// Truncation `φ ∧ r = r ∸ (r ∸ φ)` at a dyadic `r = k/2^m`; the result is
/// syntactically bounded for any `φ`.
pub fn truncate_at(f: &Formula, k: u64, m: u32) -> Formula {
    let r = dyadic_const(k, m);
    Formula::sub(r.clone(), Formula::sub(r, f.clone()))
}

// ---------------------------------------------------------------------------
// parsing and printing

const RESERVED_HEADS: &[&str] =
    &["const", "half", "add", "sub", "sup", "inf", "min", "max", "abs-diff"];

fn parse_term(e: &Sexp, sig: &Signature) -> Result<Term, SyntaxError> {
    match e {
        Sexp::Atom(v) => Ok(Term::Var(v.clone())),
        Sexp::List(items) => {
            let head = e
                .head()
                .ok_or_else(|| SyntaxError::Parse("empty term form".into()))?;
            let f = sig
                .fun(head)
                .ok_or_else(|| SyntaxError::UnknownSymbol(head.to_string()))?;
            let args = &items[1..];
            if args.len() != f.arity {
                return Err(SyntaxError::Arity {
                    symbol: head.to_string(),
                    expected: f.arity,
                    got: args.len(),
                });
            }
            let args = args
                .iter()
                .map(|a| parse_term(a, sig))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Term::App(head.to_string(), args))
        }
    }
}

fn parse_formula_sexp(e: &Sexp, sig: &Signature) -> Result<Formula, SyntaxError> {
    let items = match e {
        Sexp::Atom(a) => {
            return Err(SyntaxError::Parse(format!("bare atom {a:?} is not a formula")))
        }
        Sexp::List(items) => items,
    };
    let head = e
        .head()
        .ok_or_else(|| SyntaxError::Parse("empty formula form".into()))?;
    let expect = |n: usize| -> Result<(), SyntaxError> {
        if items.len() != n + 1 {
            return Err(SyntaxError::Arity {
                symbol: head.to_string(),
                expected: n,
                got: items.len() - 1,
            });
        }
        Ok(())
    };
    match head {
        "const" => {
            expect(1)?;
            let text = items[1]
                .as_atom()
                .ok_or_else(|| SyntaxError::Parse("(const q) expects a rational".into()))?;
            let q = parse_rat(text).map_err(SyntaxError::Parse)?;
            let (k, m) =
                dyadic_parts(&q).ok_or_else(|| SyntaxError::NonDyadicConstant(rat_str(&q)))?;
            Ok(dyadic_const(k, m))
        }
        "half" => {
            expect(1)?;
            Ok(Formula::half(parse_formula_sexp(&items[1], sig)?))
        }
        "add" | "sub" | "min" | "max" | "abs-diff" => {
            expect(2)?;
            let a = parse_formula_sexp(&items[1], sig)?;
            let b = parse_formula_sexp(&items[2], sig)?;
            Ok(match head {
                "add" => Formula::add(a, b),
                "sub" => Formula::sub(a, b),
                "min" => Formula::min(a, b),
                "max" => Formula::max(a, b),
                _ => Formula::abs_diff(a, b),
            })
        }
        "sup" | "inf" => {
            expect(2)?;
            let var = items[1]
                .as_atom()
                .ok_or_else(|| SyntaxError::Parse("quantifier variable must be an atom".into()))?;
            let body = parse_formula_sexp(&items[2], sig)?;
            Ok(if head == "sup" {
                Formula::sup(var, body)
            } else {
                Formula::inf(var, body)
            })
        }
        pred => {
            let (arity, _) = sig
                .pred_info(pred)
                .ok_or_else(|| SyntaxError::UnknownSymbol(pred.to_string()))?;
            let args = &items[1..];
            if args.len() != arity {
                return Err(SyntaxError::Arity {
                    symbol: pred.to_string(),
                    expected: arity,
                    got: args.len(),
                });
            }
            let terms = args
                .iter()
                .map(|a| parse_term(a, sig))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Formula::Atom(pred.to_string(), terms))
        }
    }
}

/// Parses a formula s-expression against a signature, arity-checked.
pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula, SyntaxError> {
    let e = sexp::parse_one(text).map_err(|e| SyntaxError::Parse(e.to_string()))?;
    parse_formula_sexp(&e, sig)
}

impl Formula {
    pub fn to_sexp(&self) -> Sexp {
        match self {
            Formula::Atom(p, terms) => {
                let mut items = vec![Sexp::atom(p)];
                items.extend(terms.iter().map(Term::to_sexp));
                Sexp::list(items)
            }
            Formula::One => Sexp::list(vec![Sexp::atom("const"), Sexp::atom("1")]),
            Formula::Half(a) => Sexp::list(vec![Sexp::atom("half"), a.to_sexp()]),
            Formula::Add(a, b) => Sexp::list(vec![Sexp::atom("add"), a.to_sexp(), b.to_sexp()]),
            Formula::Sub(a, b) => Sexp::list(vec![Sexp::atom("sub"), a.to_sexp(), b.to_sexp()]),
            Formula::Sup(x, body) => {
                Sexp::list(vec![Sexp::atom("sup"), Sexp::atom(x), body.to_sexp()])
            }
            Formula::Inf(x, body) => {
                Sexp::list(vec![Sexp::atom("inf"), Sexp::atom(x), body.to_sexp()])
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexp())
    }
}

// ---------------------------------------------------------------------------
// signature extensions

/// Extends a signature with fresh zero-ary function symbols, each carrying
/// the modulus `id ∧ 1/ν(a)` of a named constant (just `id` when the gauge
/// vanishes).
pub fn name_constants(
    sig: &Signature,
    gauges: &[(String, Rat)],
) -> Result<Signature, SyntaxError> {
    let mut out = sig.clone();
    for (name, gauge) in gauges {
        let modulus = if gauge.is_zero() {
            ContinuityModulus::identity()
        } else {
            ContinuityModulus::min_of(vec![
                ContinuityModulus::identity(),
                ContinuityModulus::constant(gauge.recip())
                    .expect("positive reciprocal"),
            ])
            .expect("two children")
        };
        out.add_fun(name, 0, modulus)?;
    }
    Ok(out)
}

/// Name of the graph predicate replacing a function symbol.
pub fn graph_pred_name(fun: &str) -> String {
    format!("G_{fun}")
}

/// One of the four axiom schemes accompanying a function-graph replacement,
/// tied to a specific replaced function symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphAxiomKind {
    /// `∀ x̄ y z  G(x̄,y) ≤ G(x̄,z) + d(y,z)`
    TriangleUpper,
    /// `∀ x̄ y z  d(y,z) ≤ G(x̄,y) + G(x̄,z)`
    TriangleLower,
    /// `∀^{<1/ε} x̄ ∃^{≤ 1/δ(ε)} y  G(x̄,y) = 0`
    ApproximateExistence,
    /// `∀^{<1/ε} x̄ ȳ ∀^{< 1/δ(ε)+1} z ((δ(ε) ∸ d(x̄,ȳ)) ∧ (G(x̄,z) ∸ G(ȳ,z) ∸ ε)) = 0`
    Modulus,
}

#[derive(Clone, Debug)]
pub struct GraphAxiom {
    pub fun: String,
    pub arity: usize,
    pub fun_modulus: ContinuityModulus,
    pub kind: GraphAxiomKind,
}

/// Replaces every function symbol by its graph predicate
/// `G_f(x̄, y) = d(f(x̄), y)` and emits the four axiom schemes of the
/// replacement, to be instantiated at caller-supplied `ε` by the theories
/// module. The graph predicate's modulus is synthesized from the defining
/// formula.
pub fn graph_signature(sig: &Signature) -> Result<(Signature, Vec<GraphAxiom>), SyntaxError> {
    let mut out = Signature::new();
    out.dist_modulus = sig.dist_modulus.clone();
    out.gauge_modulus = sig.gauge_modulus.clone();
    for p in &sig.preds {
        out.add_pred(&p.name, p.arity, p.modulus.clone())?;
    }
    let mut axioms = Vec::new();
    for f in &sig.funs {
        let vars: Vec<Term> = (0..f.arity).map(|i| Term::var(&format!("x{i}"))).collect();
        let defining = Formula::Atom(
            DIST.to_string(),
            vec![Term::App(f.name.clone(), vars), Term::var("y")],
        );
        let modulus = crate::analysis::synthesize_modulus(sig, &defining)
            .map_err(|e| SyntaxError::Parse(format!("graph modulus for {}: {e}", f.name)))?;
        out.add_pred(&graph_pred_name(&f.name), f.arity + 1, modulus)?;
        for kind in [
            GraphAxiomKind::TriangleUpper,
            GraphAxiomKind::TriangleLower,
            GraphAxiomKind::ApproximateExistence,
            GraphAxiomKind::Modulus,
        ] {
            axioms.push(GraphAxiom {
                fun: f.name.clone(),
                arity: f.arity,
                fun_modulus: f.modulus.clone(),
                kind,
            });
        }
    }
    Ok((out, axioms))
}

/// `⋁_i d(x_i, y_i)` as a formula, per the Cartesian gauge-product metric.
pub fn tuple_dist_formula(xs: &[String], ys: &[String]) -> Formula {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    let mut acc: Option<Formula> = None;
    for (x, y) in xs.iter().zip(ys) {
        let d = Formula::Atom(DIST.to_string(), vec![Term::var(x), Term::var(y)]);
        acc = Some(match acc {
            None => d,
            Some(prev) => Formula::max(prev, d),
        });
    }
    acc.expect("nonempty")
}

/// Dyadic constant formula for an arbitrary nonnegative rational, rounded
/// in the requested direction to precision `2^-20` when the value is not
/// dyadic. Exact when the input is dyadic.
pub fn dyadic_formula_rounded(q: &Rat, round_up: bool) -> Formula {
    if let Some((k, m)) = dyadic_parts(q) {
        return dyadic_const(k, m);
    }
    let m = 20u32;
    let scaled = q * pow2(m);
    let k = if round_up { scaled.ceil() } else { scaled.floor() };
    let k: u64 = k.to_integer().try_into().unwrap_or(0);
    dyadic_const(k, m)
}
