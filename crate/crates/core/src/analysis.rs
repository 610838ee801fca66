//! Syntactic static analysis of formulas: boundedness with extracted bound,
//! eventual constancy with thresholds, limit formulas, quantifier
//! legality, and modulus synthesis.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use thiserror::Error;

use crate::modulus::{
    compose_modulus, normalize, pair_modulus, quantifier_modulus, ContinuityModulus,
};
use crate::rational::{ceil_rat, rat_max, Rat};
use crate::syntax::{free_vars, Formula, Signature, Term, GAUGE};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("ill-formed: the body of a quantifier over {var} is not eventually constant in {var}")]
    IllFormedQuantifier { var: String },
    #[error("formula is not syntactically bounded")]
    NotBounded,
    #[error("formula is not eventually constant in {0}")]
    NotEventuallyConstant(String),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("modulus synthesis: {0}")]
    Modulus(#[from] crate::modulus::ModulusError),
}

/// Everything the inductive rules extract from one formula.
#[derive(Clone, Debug)]
pub struct AnalysisResult {
    pub bounded: bool,
    /// Present iff bounded.
    pub bound: Option<Rat>,
    pub free: BTreeSet<String>,
    /// Free variables in which the formula is eventually constant, with the
    /// constancy threshold for each. Variables that are not free are
    /// trivially eventually constant with threshold 0 and are not listed.
    pub eventually_constant: BTreeMap<String, Rat>,
}

impl AnalysisResult {
    pub fn is_ec(&self, var: &str) -> bool {
        !self.free.contains(var) || self.eventually_constant.contains_key(var)
    }

    pub fn threshold(&self, var: &str) -> Option<Rat> {
        if !self.free.contains(var) {
            Some(Rat::zero())
        } else {
            self.eventually_constant.get(var).cloned()
        }
    }
}

/// True when the second argument of a subtraction is literally the gauge
/// symbol applied to the bare variable `x`, the shape that triggers the
/// dedicated eventual-constancy rule.
fn is_gauge_of(f: &Formula, x: &str) -> bool {
    matches!(f, Formula::Atom(p, args)
        if p == GAUGE && args.len() == 1 && matches!(&args[0], Term::Var(v) if v == x))
}

fn gauge_atom_var(f: &Formula) -> Option<&str> {
    match f {
        Formula::Atom(p, args) if p == GAUGE && args.len() == 1 => match &args[0] {
            Term::Var(v) => Some(v),
            Term::App(..) => None,
        },
        _ => None,
    }
}

/// Runs the inductive classification rules. Errors when some quantifier
/// body is not eventually constant in its bound variable.
pub fn classify(f: &Formula) -> Result<AnalysisResult, AnalysisError> {
    let free = free_vars(f);
    let (bound, ec) = classify_rec(f)?;
    let eventually_constant = ec
        .into_iter()
        .filter(|(v, _)| free.contains(v))
        .collect::<BTreeMap<_, _>>();
    Ok(AnalysisResult { bounded: bound.is_some(), bound, free, eventually_constant })
}

/// Returns `(bound, ec-thresholds)`; the map covers exactly those free
/// variables of the node in which it is eventually constant.
fn classify_rec(f: &Formula) -> Result<(Option<Rat>, BTreeMap<String, Rat>), AnalysisError> {
    match f {
        // No atomic formula is bounded; it is eventually constant exactly
        // in the variables that do not appear in it.
        Formula::Atom(..) => Ok((None, BTreeMap::new())),
        Formula::One => Ok((Some(Rat::from_integer(1.into())), BTreeMap::new())),
        Formula::Half(a) => {
            let (b, ec) = classify_rec(a)?;
            Ok((b.map(|q| q / Rat::from_integer(2.into())), ec))
        }
        Formula::Add(a, b) => {
            let fa = free_vars(a);
            let fb = free_vars(b);
            let (ba, eca) = classify_rec(a)?;
            let (bb, ecb) = classify_rec(b)?;
            let bound = match (ba, bb) {
                (Some(x), Some(y)) => Some(x + y),
                _ => None,
            };
            Ok((bound, merge_connective_ec(&[(&fa, &eca), (&fb, &ecb)])))
        }
        Formula::Sub(a, b) => {
            let fa = free_vars(a);
            let fb = free_vars(b);
            let (ba, eca) = classify_rec(a)?;
            let (_bb, ecb) = classify_rec(b)?;
            // bounded for any second argument once the first is
            let bound = ba.clone();
            let mut ec = merge_connective_ec(&[(&fa, &eca), (&fb, &ecb)]);
            // dedicated rule: (bounded) ∸ ν(x) is eventually constant in x
            if let (Some(b_left), Some(x)) = (&ba, gauge_atom_var(b)) {
                ec.entry(x.to_string()).or_insert_with(|| b_left.clone());
            }
            Ok((bound, ec))
        }
        Formula::Sup(x, body) | Formula::Inf(x, body) => {
            let fbody = free_vars(body);
            let (b, ec) = classify_rec(body)?;
            if fbody.contains(x) && !ec.contains_key(x) {
                return Err(AnalysisError::IllFormedQuantifier { var: x.clone() });
            }
            let mut out = ec;
            out.remove(x);
            Ok((b, out))
        }
    }
}

/// Connective rule: eventually constant in `x` iff every component is
/// (components in which `x` is not free count, with threshold 0);
/// threshold is the maximum over components.
fn merge_connective_ec(
    parts: &[(&BTreeSet<String>, &BTreeMap<String, Rat>)],
) -> BTreeMap<String, Rat> {
    let mut candidates: BTreeSet<String> = BTreeSet::new();
    for (free, ec) in parts {
        candidates.extend(ec.keys().cloned());
        candidates.extend(free.iter().cloned());
    }
    let mut out = BTreeMap::new();
    'vars: for v in candidates {
        let mut c = Rat::zero();
        for (free, ec) in parts {
            if !free.contains(&v) {
                continue; // threshold 0
            }
            match ec.get(&v) {
                Some(ci) => c = rat_max(&c, ci),
                None => continue 'vars,
            }
        }
        out.insert(v, c);
    }
    out
}

/// Syntactic bound `B` of a bounded formula.
pub fn bound(f: &Formula) -> Result<Rat, AnalysisError> {
    classify(f)?.bound.ok_or(AnalysisError::NotBounded)
}

/// Constancy threshold `C` of a formula eventually constant in `var`.
pub fn threshold(f: &Formula, var: &str) -> Result<Rat, AnalysisError> {
    let a = classify(f)?;
    a.threshold(var)
        .ok_or_else(|| AnalysisError::NotEventuallyConstant(var.to_string()))
}

/// The limit formula: what `f` evaluates to once the gauge of `var`
/// exceeds the threshold. Free variables of the result exclude `var`,
/// and its tree complexity never exceeds the input's.
pub fn limit_formula(f: &Formula, var: &str) -> Result<Formula, AnalysisError> {
    if !free_vars(f).contains(var) {
        return Ok(f.clone());
    }
    match f {
        Formula::Atom(..) => Err(AnalysisError::NotEventuallyConstant(var.to_string())),
        Formula::One => Ok(Formula::One),
        Formula::Half(a) => Ok(Formula::half(limit_formula(a, var)?)),
        Formula::Add(a, b) => {
            Ok(Formula::add(limit_formula(a, var)?, limit_formula(b, var)?))
        }
        Formula::Sub(a, b) => {
            if is_gauge_of(b, var) && classify(a)?.bounded {
                return Ok(Formula::zero());
            }
            Ok(Formula::sub(limit_formula(a, var)?, limit_formula(b, var)?))
        }
        Formula::Sup(x, body) => {
            debug_assert_ne!(x, var, "var free in Sup body implies x != var");
            Ok(Formula::sup(x, limit_formula(body, var)?))
        }
        Formula::Inf(x, body) => Ok(Formula::inf(x, limit_formula(body, var)?)),
    }
}

/// True iff every quantifier body is eventually constant in its bound
/// variable; diagnostics list each offending quantifier.
pub fn well_formed(f: &Formula) -> (bool, Vec<String>) {
    fn walk(f: &Formula, diags: &mut Vec<String>) {
        match f {
            Formula::Atom(..) | Formula::One => {}
            Formula::Half(a) => walk(a, diags),
            Formula::Add(a, b) | Formula::Sub(a, b) => {
                walk(a, diags);
                walk(b, diags);
            }
            Formula::Sup(x, body) | Formula::Inf(x, body) => {
                match classify(body) {
                    Ok(a) => {
                        if !a.is_ec(x) {
                            diags.push(format!(
                                "quantifier body {body} is not eventually constant in {x}"
                            ));
                        }
                    }
                    Err(e) => diags.push(e.to_string()),
                }
                walk(body, diags);
            }
        }
    }
    let mut diags = Vec::new();
    walk(f, &mut diags);
    (diags.is_empty(), diags)
}

// ---------------------------------------------------------------------------
// modulus synthesis

fn term_modulus(sig: &Signature, t: &Term) -> Result<ContinuityModulus, AnalysisError> {
    match t {
        Term::Var(_) => Ok(ContinuityModulus::identity()),
        Term::App(name, args) => {
            let sym = sig
                .fun(name)
                .ok_or_else(|| AnalysisError::UnknownSymbol(name.clone()))?;
            let own = normalize(&sym.modulus);
            if args.is_empty() {
                return Ok(own);
            }
            let parts = args
                .iter()
                .map(|a| term_modulus(sig, a))
                .collect::<Result<Vec<_>, _>>()?;
            let tuple = pair_modulus(&parts)?;
            Ok(compose_modulus(&tuple, &own)?)
        }
    }
}

/// Modulus of a tuple of terms under the Cartesian gauge product.
fn terms_modulus(sig: &Signature, terms: &[Term]) -> Result<ContinuityModulus, AnalysisError> {
    let parts = terms
        .iter()
        .map(|t| term_modulus(sig, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(pair_modulus(&parts)?)
}

/// Synthesizes a continuity modulus (below the identity) for a term.
pub fn synthesize_term_modulus(
    sig: &Signature,
    t: &Term,
) -> Result<ContinuityModulus, AnalysisError> {
    term_modulus(sig, t)
}

/// Synthesizes a continuity modulus (below the identity) for a formula,
/// applying the pairing, composition and quantifier rules of the calculus.
pub fn synthesize_modulus(
    sig: &Signature,
    f: &Formula,
) -> Result<ContinuityModulus, AnalysisError> {
    match f {
        Formula::Atom(p, terms) => {
            let (_, delta) = sig
                .pred_info(p)
                .ok_or_else(|| AnalysisError::UnknownSymbol(p.clone()))?;
            let own = normalize(delta);
            if terms.is_empty() {
                return Ok(own);
            }
            let tuple = terms_modulus(sig, terms)?;
            Ok(compose_modulus(&tuple, &own)?)
        }
        // constant value 1 in the gauged reals: any δ ≤ id ∧ 1 is sound
        Formula::One => Ok(ContinuityModulus::clamp_to(
            Rat::from_integer(1.into()),
            ContinuityModulus::identity(),
        )?),
        Formula::Half(a) => {
            let inner = synthesize_modulus(sig, a)?;
            let conn = normalize(&ContinuityModulus::standard(1)?);
            Ok(compose_modulus(&inner, &conn)?)
        }
        Formula::Add(a, b) | Formula::Sub(a, b) => {
            let da = synthesize_modulus(sig, a)?;
            let db = synthesize_modulus(sig, b)?;
            let tuple = pair_modulus(&[da, db])?;
            let conn = normalize(&ContinuityModulus::standard(2)?);
            Ok(compose_modulus(&tuple, &conn)?)
        }
        Formula::Sup(x, body) | Formula::Inf(x, body) => {
            let a = classify(body)?;
            if !a.is_ec(x) {
                return Err(AnalysisError::IllFormedQuantifier { var: x.clone() });
            }
            let c = a.threshold(x).expect("eventually constant");
            let body_delta = synthesize_modulus(sig, body)?;
            let limit = limit_formula(body, x)?;
            let limit_delta = synthesize_modulus(sig, &limit)?;
            Ok(quantifier_modulus(&body_delta, &limit_delta, &c))
        }
    }
}

/// Least integer upper bound `k = ⌈B⌉` used by the restricted-quantifier
/// construction; at least 1.
pub fn integer_bound(f: &Formula) -> Result<u64, AnalysisError> {
    let b = bound(f)?;
    let k = ceil_rat(&b);
    let k: u64 = k.to_integer().try_into().unwrap_or(u64::MAX);
    Ok(k.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};
    use crate::syntax::{dyadic_const, parse_formula, truncate_at};

    fn sig() -> Signature {
        Signature::new()
            .with_pred("P", 1, ContinuityModulus::identity())
            .unwrap()
            .with_fun("f", 1, ContinuityModulus::standard(1).unwrap())
            .unwrap()
    }

    #[test]
    fn atomic_classification() {
        let s = sig();
        let f = parse_formula("(d x y)", &s).unwrap();
        let a = classify(&f).unwrap();
        assert!(!a.bounded);
        assert!(a.is_ec("z"));
        assert!(!a.is_ec("x"));
        assert!(!a.is_ec("y"));
    }

    #[test]
    fn sub_gauge_rule() {
        let s = sig();
        let f = parse_formula("(sub (const 1) (nu x))", &s).unwrap();
        let a = classify(&f).unwrap();
        assert!(a.bounded);
        assert_eq!(a.bound, Some(rat(1)));
        assert!(a.is_ec("x"));
        assert_eq!(a.threshold("x"), Some(rat(1)));
        assert_eq!(limit_formula(&f, "x").unwrap(), Formula::zero());
        // gauge of a compound term does not trigger the rule
        let g = parse_formula("(sub (const 1) (nu (f x)))", &s).unwrap();
        assert!(classify(&g).unwrap().bounded);
        assert!(!classify(&g).unwrap().is_ec("x"));
    }

    #[test]
    fn ill_formed_quantifier() {
        let s = sig();
        let f = parse_formula("(sup x (nu x))", &s).unwrap();
        assert!(matches!(
            classify(&f),
            Err(AnalysisError::IllFormedQuantifier { .. })
        ));
        let (ok, diags) = well_formed(&f);
        assert!(!ok);
        assert_eq!(diags.len(), 1);
        let g = parse_formula("(sup x (d x y))", &s).unwrap();
        assert!(!well_formed(&g).0);
        let h = parse_formula("(add (nu x) (nu y))", &s).unwrap();
        assert!(well_formed(&h).0);
    }

    #[test]
    fn bounds() {
        assert_eq!(bound(&Formula::One).unwrap(), rat(1));
        let s = sig();
        let phi = parse_formula("(nu x)", &s).unwrap();
        assert_eq!(bound(&truncate_at(&phi, 1, 0)).unwrap(), rat(1));
        assert_eq!(bound(&truncate_at(&phi, 1, 1)).unwrap(), ratio(1, 2));
        assert_eq!(bound(&truncate_at(&phi, 2, 0)).unwrap(), rat(2));
        let half_two = Formula::half(Formula::add(Formula::One, Formula::One));
        assert_eq!(bound(&half_two).unwrap(), rat(1));
        assert!(bound(&phi).is_err());
    }

    #[test]
    fn thresholds_and_limits() {
        let s = sig();
        // x not free: threshold 0; limit is the formula itself
        let f = parse_formula("(sub (const 1) (nu y))", &s).unwrap();
        assert_eq!(threshold(&f, "x").unwrap(), rat(0));
        assert_eq!(limit_formula(&f, "x").unwrap(), f);
        // max over components: max(1, 3/2) = 3/2
        let g = Formula::add(
            Formula::sub(Formula::One, Formula::gauge_of_var("x")),
            Formula::sub(dyadic_const(3, 1), Formula::gauge_of_var("x")),
        );
        assert_eq!(threshold(&g, "x").unwrap(), ratio(3, 2));
        // limit under a quantifier over another variable
        let h = Formula::sup(
            "z",
            Formula::sub(Formula::One, Formula::gauge_of_var("x")),
        );
        let lim = limit_formula(&h, "x").unwrap();
        assert_eq!(lim, Formula::sup("z", Formula::zero()));
        assert!(threshold(&parse_formula("(nu x)", &s).unwrap(), "x").is_err());
    }

    #[test]
    fn overlap_coherence() {
        // connective route and dedicated route agree where both apply:
        // for Sub with both sides bounded, B is the left bound either way
        let a = dyadic_const(3, 1);
        let b = dyadic_const(1, 1);
        let f = Formula::sub(a.clone(), b.clone());
        let via_rule = bound(&f).unwrap();
        // corner of the box [0,B_a] x [0,B_b] under x ∸ y
        let corner = bound(&a).unwrap();
        assert_eq!(via_rule, corner);
        // x not free: the connective route over components gives 0 as well
        assert_eq!(threshold(&f, "x").unwrap(), rat(0));
    }

    #[test]
    fn synthesized_moduli() {
        let s = sig();
        // variable term: identity
        let t = crate::syntax::Term::var("x");
        let m = synthesize_term_modulus(&s, &t).unwrap();
        assert_eq!(m.eval(&rat(5)).unwrap(), rat(5));
        // gauge atom evaluates like the identity pointwise
        let f = parse_formula("(nu x)", &s).unwrap();
        let m = synthesize_modulus(&s, &f).unwrap();
        assert!(m.below_identity());
        for e in [ratio(1, 2), rat(1), rat(3)] {
            assert_eq!(m.eval(&e).unwrap(), e);
        }
        // quantifier rule applies with the threshold as the clamp
        let g = parse_formula("(sup x (sub (const 1) (nu x)))", &s).unwrap();
        let mg = synthesize_modulus(&s, &g).unwrap();
        assert!(mg.below_identity());
        // C = 1 never clamps below the identity at eps <= 1
        assert_eq!(mg.eval(&ratio(1, 2)).unwrap(), ratio(1, 4));
    }

    #[test]
    fn integer_bound_rounds_up() {
        assert_eq!(integer_bound(&dyadic_const(3, 1)).unwrap(), 2);
        assert_eq!(integer_bound(&Formula::One).unwrap(), 1);
    }
}
