//! Exact calculus of uniform continuity moduli.
//!
//! A modulus is a closed expression tree denoting a continuous increasing
//! function `(0,∞) → (0,∞)`, so evaluation at rationals is exact, suprema
//! are computable, and the pairing/composition/quantifier rules of the
//! gauged-space calculus can be applied structurally. Every node kind is
//! continuous, hence in particular left-continuous.

use std::fmt;

use num_traits::Zero;
use thiserror::Error;

use crate::rational::{rat_min, ExtendedValue, Rat};
use crate::sexp::{self, Sexp};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Node {
    Identity,
    /// Constant positive value.
    Constant(Rat),
    /// `c · child(ε)` for positive `c`.
    Scale(Rat, Box<ContinuityModulus>),
    /// Pointwise minimum of a nonempty list.
    Min(Vec<ContinuityModulus>),
    /// `outer(inner(ε))`.
    Compose(Box<ContinuityModulus>, Box<ContinuityModulus>),
    /// `min(c, child(ε))` for positive `c`.
    ClampTo(Rat, Box<ContinuityModulus>),
    /// `ε ↦ ε/n`, the standard modulus of an `n`-ary symbol.
    StandardArity(u32),
}

/// A uniform continuity modulus as an exactly evaluable expression tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContinuityModulus {
    node: Node,
    below_identity: bool,
}

#[derive(Debug, Error)]
pub enum ModulusError {
    #[error("modulus must be evaluated at a positive epsilon, got {0}")]
    NonpositiveEpsilon(String),
    #[error("pair_modulus requires a nonempty list")]
    EmptyPair,
    #[error("compose_modulus requires both arguments below the identity")]
    NotBelowIdentity,
    #[error("modulus parameter must be positive, got {0}")]
    NonpositiveParameter(String),
    #[error("standard modulus arity must be >= 1")]
    ZeroArity,
    #[error("malformed table: {0}")]
    MalformedTable(String),
    #[error("modulus syntax: {0}")]
    Parse(String),
}

impl ContinuityModulus {
    fn make(node: Node) -> Self {
        let below_identity = match &node {
            Node::Identity => true,
            Node::Constant(_) => false,
            Node::Scale(c, ch) => *c <= crate::rational::rat(1) && ch.below_identity,
            Node::Min(children) => children.iter().any(|c| c.below_identity),
            Node::Compose(outer, inner) => outer.below_identity && inner.below_identity,
            Node::ClampTo(_, ch) => ch.below_identity,
            Node::StandardArity(_) => true,
        };
        ContinuityModulus { node, below_identity }
    }

    pub fn identity() -> Self {
        Self::make(Node::Identity)
    }

    pub fn constant(c: Rat) -> Result<Self, ModulusError> {
        if c <= Rat::zero() {
            return Err(ModulusError::NonpositiveParameter(crate::rational::rat_str(&c)));
        }
        Ok(Self::make(Node::Constant(c)))
    }

    pub fn scale(c: Rat, child: ContinuityModulus) -> Result<Self, ModulusError> {
        if c <= Rat::zero() {
            return Err(ModulusError::NonpositiveParameter(crate::rational::rat_str(&c)));
        }
        Ok(Self::make(Node::Scale(c, Box::new(child))))
    }

    pub fn clamp_to(c: Rat, child: ContinuityModulus) -> Result<Self, ModulusError> {
        if c <= Rat::zero() {
            return Err(ModulusError::NonpositiveParameter(crate::rational::rat_str(&c)));
        }
        Ok(Self::make(Node::ClampTo(c, Box::new(child))))
    }

    pub fn standard(arity: u32) -> Result<Self, ModulusError> {
        if arity == 0 {
            return Err(ModulusError::ZeroArity);
        }
        Ok(Self::make(Node::StandardArity(arity)))
    }

    /// Pointwise minimum; nested `Min` children are flattened.
    pub fn min_of(children: Vec<ContinuityModulus>) -> Result<Self, ModulusError> {
        if children.is_empty() {
            return Err(ModulusError::EmptyPair);
        }
        let mut flat = Vec::with_capacity(children.len());
        for ch in children {
            match ch.node {
                Node::Min(inner) => flat.extend(inner),
                _ => flat.push(ch),
            }
        }
        if flat.len() == 1 {
            return Ok(flat.pop().expect("len checked"));
        }
        Ok(Self::make(Node::Min(flat)))
    }

    pub fn below_identity(&self) -> bool {
        self.below_identity
    }

    /// Exact value of the denoted function at positive `eps`.
    pub fn eval(&self, eps: &Rat) -> Result<Rat, ModulusError> {
        if *eps <= Rat::zero() {
            return Err(ModulusError::NonpositiveEpsilon(crate::rational::rat_str(eps)));
        }
        Ok(self.eval_unchecked(eps))
    }

    fn eval_unchecked(&self, eps: &Rat) -> Rat {
        match &self.node {
            Node::Identity => eps.clone(),
            Node::Constant(c) => c.clone(),
            Node::Scale(c, ch) => c * ch.eval_unchecked(eps),
            Node::Min(children) => {
                let mut best = children[0].eval_unchecked(eps);
                for ch in &children[1..] {
                    let v = ch.eval_unchecked(eps);
                    if v < best {
                        best = v;
                    }
                }
                best
            }
            Node::Compose(outer, inner) => outer.eval_unchecked(&inner.eval_unchecked(eps)),
            Node::ClampTo(c, ch) => rat_min(c, &ch.eval_unchecked(eps)),
            Node::StandardArity(n) => eps / Rat::from_integer((*n).into()),
        }
    }

    /// Supremum of the denoted function over `(0, ∞)`.
    pub fn sup(&self) -> ExtendedValue {
        match &self.node {
            Node::Identity | Node::StandardArity(_) => ExtendedValue::Infinity,
            Node::Constant(c) => ExtendedValue::finite(c.clone()),
            Node::Scale(c, ch) => ch.sup().scale(c),
            Node::Min(children) => {
                let mut best = children[0].sup();
                for ch in &children[1..] {
                    best = best.min(ch.sup());
                }
                best
            }
            Node::Compose(outer, inner) => match inner.sup() {
                // Left continuity of the outer function makes the value at
                // the inner supremum correct whether or not it is attained.
                ExtendedValue::Finite(s) => ExtendedValue::finite(outer.eval_unchecked(&s)),
                ExtendedValue::Infinity => outer.sup(),
            },
            Node::ClampTo(c, ch) => ExtendedValue::finite(c.clone()).min(ch.sup()),
        }
    }

    /// Supremum of the denoted function over `(0, bound)`, with
    /// `bound = ∞` meaning the global supremum. Left continuity collapses
    /// the open-interval supremum to evaluation at the endpoint.
    pub fn sup_below(&self, bound: &ExtendedValue) -> ExtendedValue {
        match bound {
            ExtendedValue::Finite(b) => ExtendedValue::finite(self.eval_unchecked(b)),
            ExtendedValue::Infinity => self.sup(),
        }
    }
}

/// Truncation at the identity, `ε ∧ δ(ε)`.
///
/// The calculus' normalisation is `ε ∧ sup_{0<ε'<ε} δ(ε')`; every
/// representable modulus is continuous, so the inner supremum is just
/// `δ(ε)` and the operation reduces to a pointwise minimum with the
/// identity. The result always has `below_identity`.
pub fn normalize(delta: &ContinuityModulus) -> ContinuityModulus {
    if delta.below_identity {
        return delta.clone();
    }
    ContinuityModulus::min_of(vec![ContinuityModulus::identity(), delta.clone()])
        .expect("two children")
}

/// Modulus of a tuple of maps: the pointwise minimum of the components.
pub fn pair_modulus(deltas: &[ContinuityModulus]) -> Result<ContinuityModulus, ModulusError> {
    ContinuityModulus::min_of(deltas.to_vec())
}

/// Modulus of a composite `g ∘ f` where `f` is applied first:
/// `δ_f ∘ δ_g ∘ δ_f`. Both inputs must lie below the identity.
pub fn compose_modulus(
    delta_f: &ContinuityModulus,
    delta_g: &ContinuityModulus,
) -> Result<ContinuityModulus, ModulusError> {
    if !delta_f.below_identity || !delta_g.below_identity {
        return Err(ModulusError::NotBelowIdentity);
    }
    let inner = ContinuityModulus::make(Node::Compose(
        Box::new(delta_g.clone()),
        Box::new(delta_f.clone()),
    ));
    Ok(ContinuityModulus::make(Node::Compose(
        Box::new(delta_f.clone()),
        Box::new(inner),
    )))
}

/// Modulus of a quantified map whose body respects `delta_f`, whose limit
/// respects `delta_g`, and which is eventually equal beyond gauge `c`:
/// `δ_g(ε) ∧ δ_f(ε ∧ 1/c)`. With `c = 0` the clamp vanishes.
pub fn quantifier_modulus(
    delta_f: &ContinuityModulus,
    delta_g: &ContinuityModulus,
    c: &Rat,
) -> ContinuityModulus {
    let window = if c.is_zero() {
        ContinuityModulus::identity()
    } else {
        ContinuityModulus::clamp_to(c.recip(), ContinuityModulus::identity())
            .expect("positive reciprocal")
    };
    let branch = ContinuityModulus::make(Node::Compose(
        Box::new(delta_f.clone()),
        Box::new(window),
    ));
    ContinuityModulus::min_of(vec![delta_g.clone(), branch]).expect("two children")
}

// ---------------------------------------------------------------------------
// serialization

impl ContinuityModulus {
    pub fn to_sexp(&self) -> Sexp {
        match &self.node {
            Node::Identity => Sexp::atom("id"),
            Node::Constant(c) => Sexp::list(vec![
                Sexp::atom("const"),
                Sexp::atom(crate::rational::rat_str(c)),
            ]),
            Node::Scale(c, ch) => Sexp::list(vec![
                Sexp::atom("scale"),
                Sexp::atom(crate::rational::rat_str(c)),
                ch.to_sexp(),
            ]),
            Node::Min(children) => {
                let mut items = vec![Sexp::atom("min")];
                items.extend(children.iter().map(|c| c.to_sexp()));
                Sexp::list(items)
            }
            Node::Compose(outer, inner) => {
                Sexp::list(vec![Sexp::atom("compose"), outer.to_sexp(), inner.to_sexp()])
            }
            Node::ClampTo(c, ch) => Sexp::list(vec![
                Sexp::atom("clamp"),
                Sexp::atom(crate::rational::rat_str(c)),
                ch.to_sexp(),
            ]),
            Node::StandardArity(n) => {
                Sexp::list(vec![Sexp::atom("std"), Sexp::atom(n.to_string())])
            }
        }
    }

    pub fn from_sexp(e: &Sexp) -> Result<Self, ModulusError> {
        let bad = |msg: String| ModulusError::Parse(msg);
        match e {
            Sexp::Atom(a) if a == "id" => Ok(Self::identity()),
            Sexp::Atom(a) => Err(bad(format!("unknown modulus atom {a:?}"))),
            Sexp::List(items) => {
                let head = e.head().ok_or_else(|| bad("empty modulus form".into()))?;
                let arg_rat = |i: usize| -> Result<Rat, ModulusError> {
                    let a = items
                        .get(i)
                        .and_then(Sexp::as_atom)
                        .ok_or_else(|| bad(format!("({head} ...) expects a rational")))?;
                    crate::rational::parse_rat(a).map_err(bad)
                };
                match head {
                    "const" if items.len() == 2 => Self::constant(arg_rat(1)?),
                    "scale" if items.len() == 3 => {
                        Self::scale(arg_rat(1)?, Self::from_sexp(&items[2])?)
                    }
                    "clamp" if items.len() == 3 => {
                        Self::clamp_to(arg_rat(1)?, Self::from_sexp(&items[2])?)
                    }
                    "min" if items.len() >= 2 => {
                        let children = items[1..]
                            .iter()
                            .map(Self::from_sexp)
                            .collect::<Result<Vec<_>, _>>()?;
                        Self::min_of(children)
                    }
                    "compose" if items.len() == 3 => {
                        let outer = Self::from_sexp(&items[1])?;
                        let inner = Self::from_sexp(&items[2])?;
                        Ok(Self::make(Node::Compose(Box::new(outer), Box::new(inner))))
                    }
                    "std" if items.len() == 2 => {
                        let n: u32 = items[1]
                            .as_atom()
                            .and_then(|a| a.parse().ok())
                            .ok_or_else(|| bad("(std n) expects a natural".into()))?;
                        Self::standard(n)
                    }
                    _ => Err(bad(format!("unknown modulus form {e}"))),
                }
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, ModulusError> {
        let e = sexp::parse_one(text).map_err(|e| ModulusError::Parse(e.to_string()))?;
        Self::from_sexp(&e)
    }
}

impl fmt::Display for ContinuityModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexp())
    }
}

// ---------------------------------------------------------------------------
// respects_check

/// A finite map between finite gauged spaces, presented by tables.
///
/// Entry `i` of the domain is mapped to entry `i` of the image side; the
/// image side may repeat points. For predicates the image space is `ℝ⁺`
/// with distance `|x - y|` and gauge `|x|`.
#[derive(Clone, Debug)]
pub struct FiniteMap {
    pub dom_dist: Vec<Vec<Rat>>,
    pub dom_gauge: Vec<Rat>,
    pub img_dist: Vec<Vec<Rat>>,
    pub img_gauge: Vec<Rat>,
}

impl FiniteMap {
    /// Image side built from a vector of `ℝ⁺` values gauged as `(|x-y|, |x|)`.
    pub fn predicate_image(dom_dist: Vec<Vec<Rat>>, dom_gauge: Vec<Rat>, values: &[Rat]) -> Self {
        let n = values.len();
        let mut img_dist = vec![vec![Rat::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let d = &values[i] - &values[j];
                img_dist[i][j] = if d < Rat::zero() { -d } else { d };
            }
        }
        FiniteMap { dom_dist, dom_gauge, img_dist, img_gauge: values.to_vec() }
    }

    fn validate(&self) -> Result<usize, ModulusError> {
        let n = self.dom_gauge.len();
        let square = |m: &Vec<Vec<Rat>>, what: &str| -> Result<(), ModulusError> {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(ModulusError::MalformedTable(format!("{what} is not {n}x{n}")));
            }
            Ok(())
        };
        square(&self.dom_dist, "domain distance table")?;
        square(&self.img_dist, "image distance table")?;
        if self.img_gauge.len() != n {
            return Err(ModulusError::MalformedTable("image gauge length mismatch".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if self.dom_dist[i][j] < Rat::zero() || self.img_dist[i][j] < Rat::zero() {
                    return Err(ModulusError::MalformedTable("negative distance".into()));
                }
                if self.dom_dist[i][j] != self.dom_dist[j][i]
                    || self.img_dist[i][j] != self.img_dist[j][i]
                {
                    return Err(ModulusError::MalformedTable("asymmetric distance".into()));
                }
            }
            if self.dom_gauge[i] < Rat::zero() || self.img_gauge[i] < Rat::zero() {
                return Err(ModulusError::MalformedTable("negative gauge".into()));
            }
        }
        Ok(n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clause {
    Distance,
    Gauge,
}

#[derive(Clone, Debug)]
pub struct Violation {
    pub source: usize,
    pub target: usize,
    pub clause: Clause,
    /// A concrete `ε` witnessing the failure of the two-clause condition.
    pub epsilon: Rat,
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub pass: bool,
    pub violation: Option<Violation>,
}

/// Exact decision of the two-clause condition for `table` against `delta`.
///
/// For each ordered pair `(x, y)`:
/// the distance clause fails iff `d_X(x,y) < δ(ε*)` with
/// `ε* = min(d_Y(fx, fy), 1/(ν(x) ∨ ν(y)))` and `ε* > 0`;
/// the gauge clause fails iff `ν_Y(fx) > 0` and
/// `sup_{ε < ε̂} δ(ε) > max(d_X(x,y), 1/ν_Y(fx))` with
/// `ε̂ = 1/(ν(x) ∨ ν(y))`. Both rest on monotonicity and left continuity.
pub fn respects_check(
    table: &FiniteMap,
    delta: &ContinuityModulus,
) -> Result<CheckReport, ModulusError> {
    let n = table.validate()?;
    for i in 0..n {
        for j in 0..n {
            let nu_pair = crate::rational::rat_max(&table.dom_gauge[i], &table.dom_gauge[j]);
            let eps_hat = ExtendedValue::recip_of(&nu_pair);

            // distance clause
            let dy = &table.img_dist[i][j];
            let eps_star = ExtendedValue::finite(dy.clone()).min(eps_hat.clone());
            if let ExtendedValue::Finite(es) = &eps_star {
                if *es > Rat::zero() && table.dom_dist[i][j] < delta.eval(es)? {
                    let eps = witness_below(delta, es, &table.dom_dist[i][j]);
                    return Ok(CheckReport {
                        pass: false,
                        violation: Some(Violation {
                            source: i,
                            target: j,
                            clause: Clause::Distance,
                            epsilon: eps,
                        }),
                    });
                }
            }

            // gauge clause, for the image of the source element
            let nu_y = &table.img_gauge[i];
            if *nu_y > Rat::zero() {
                let threshold = crate::rational::rat_max(&table.dom_dist[i][j], &nu_y.recip());
                if delta.sup_below(&eps_hat) > ExtendedValue::finite(threshold.clone()) {
                    let eps = match &eps_hat {
                        ExtendedValue::Finite(eh) => witness_below(delta, eh, &threshold),
                        ExtendedValue::Infinity => witness_unbounded(delta, &threshold),
                    };
                    return Ok(CheckReport {
                        pass: false,
                        violation: Some(Violation {
                            source: i,
                            target: j,
                            clause: Clause::Gauge,
                            epsilon: eps,
                        }),
                    });
                }
            }
        }
    }
    Ok(CheckReport { pass: true, violation: None })
}

/// Finds `ε < cap` with `δ(ε) > floor`; exists by continuity whenever
/// `δ(cap) > floor`.
fn witness_below(delta: &ContinuityModulus, cap: &Rat, floor: &Rat) -> Rat {
    let half = crate::rational::ratio(1, 2);
    let mut shrink = half.clone();
    for _ in 0..256 {
        let eps = cap * (crate::rational::rat(1) - &shrink);
        if eps > Rat::zero() && delta.eval(&eps).map(|v| v > *floor).unwrap_or(false) {
            return eps;
        }
        shrink = &shrink * &half;
    }
    cap.clone()
}

/// Finds an unbounded-side witness: any `ε` with `δ(ε) > floor`.
fn witness_unbounded(delta: &ContinuityModulus, floor: &Rat) -> Rat {
    let mut eps = crate::rational::rat(1);
    for _ in 0..256 {
        if delta.eval(&eps).map(|v| v > *floor).unwrap_or(false) {
            return eps;
        }
        eps = eps * crate::rational::rat(2);
    }
    eps
}

/// A modulus the given table provably respects: `min(id, ε/L, 1/g)` with
/// `L` the observed Lipschitz constant and `g` the largest image gauge.
/// Under it the distance clause holds because `d_X < ε/L` forces
/// `d_Y ≤ L·d_X < ε`, and the gauge clause because `sup δ ≤ 1/g`.
pub fn derived_modulus(table: &FiniteMap) -> ContinuityModulus {
    let n = table.dom_gauge.len();
    let one = crate::rational::rat(1);
    let mut lip = one.clone();
    let mut g = Rat::zero();
    for i in 0..n {
        if table.img_gauge[i] > g {
            g = table.img_gauge[i].clone();
        }
        for j in 0..n {
            let dx = &table.dom_dist[i][j];
            if dx > &Rat::zero() {
                let ratio = &table.img_dist[i][j] / dx;
                if ratio > lip {
                    lip = ratio;
                }
            }
        }
    }
    let mut parts = vec![
        ContinuityModulus::identity(),
        ContinuityModulus::scale(lip.recip(), ContinuityModulus::identity())
            .expect("positive Lipschitz constant"),
    ];
    if !g.is_zero() {
        parts.push(ContinuityModulus::constant(g.recip()).expect("positive gauge bound"));
    }
    ContinuityModulus::min_of(parts).expect("nonempty")
}

/// Independent dense-grid cross-check: samples candidate `ε` values derived
/// from the table data and tests the two-clause condition directly from its
/// definition. FAIL results are definitive; PASS means no sampled witness.
pub fn grid_check(table: &FiniteMap, delta: &ContinuityModulus) -> Result<CheckReport, ModulusError> {
    let n = table.validate()?;
    let mut seeds: Vec<Rat> = vec![
        crate::rational::ratio(1, 4),
        crate::rational::ratio(1, 2),
        crate::rational::rat(1),
        crate::rational::rat(2),
        crate::rational::rat(4),
        crate::rational::rat(64),
    ];
    for i in 0..n {
        for j in 0..n {
            if table.img_dist[i][j] > Rat::zero() {
                seeds.push(table.img_dist[i][j].clone());
            }
        }
        if table.dom_gauge[i] > Rat::zero() {
            seeds.push(table.dom_gauge[i].recip());
        }
        if table.img_gauge[i] > Rat::zero() {
            seeds.push(table.img_gauge[i].recip());
        }
    }
    let one = crate::rational::rat(1);
    let mut candidates = Vec::new();
    for s in &seeds {
        candidates.push(s.clone());
        let mut step = crate::rational::ratio(1, 2);
        for _ in 0..48 {
            let below = s * (&one - &step);
            if below > Rat::zero() {
                candidates.push(below);
            }
            candidates.push(s * (&one + &step));
            step = step * crate::rational::ratio(1, 2);
        }
    }

    for eps in &candidates {
        let value = delta.eval(eps)?;
        let inv_eps = eps.recip();
        let inv_value = value.recip();
        for i in 0..n {
            for j in 0..n {
                let hyp_gauge =
                    table.dom_gauge[i] < inv_eps && table.dom_gauge[j] < inv_eps;
                if !hyp_gauge || table.dom_dist[i][j] >= value {
                    continue;
                }
                if table.img_dist[i][j] > *eps {
                    return Ok(CheckReport {
                        pass: false,
                        violation: Some(Violation {
                            source: i,
                            target: j,
                            clause: Clause::Distance,
                            epsilon: eps.clone(),
                        }),
                    });
                }
                if table.img_gauge[i] > inv_value {
                    return Ok(CheckReport {
                        pass: false,
                        violation: Some(Violation {
                            source: i,
                            target: j,
                            clause: Clause::Gauge,
                            epsilon: eps.clone(),
                        }),
                    });
                }
            }
        }
    }
    Ok(CheckReport { pass: true, violation: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};

    fn std(n: u32) -> ContinuityModulus {
        ContinuityModulus::standard(n).unwrap()
    }

    #[test]
    fn eval_identity_and_standard() {
        assert_eq!(ContinuityModulus::identity().eval(&rat(3)).unwrap(), rat(3));
        assert_eq!(std(2).eval(&rat(6)).unwrap(), rat(3));
        assert!(std(2).eval(&rat(0)).is_err());
    }

    #[test]
    fn eval_composed_scales() {
        // direct arithmetic oracle: 8 * 1/2 * 1/2 = 2
        let half = ContinuityModulus::scale(ratio(1, 2), ContinuityModulus::identity()).unwrap();
        let composed = ContinuityModulus::from_sexp(
            &crate::sexp::parse_one("(compose (scale 1/2 id) (scale 1/2 id))").unwrap(),
        )
        .unwrap();
        assert_eq!(composed.eval(&rat(8)).unwrap(), rat(2));
        assert_eq!(half.eval(&rat(8)).unwrap(), rat(4));
    }

    #[test]
    fn sup_cases() {
        assert_eq!(ContinuityModulus::identity().sup(), ExtendedValue::Infinity);
        let clamped =
            ContinuityModulus::clamp_to(ratio(1, 2), ContinuityModulus::identity()).unwrap();
        assert_eq!(clamped.sup(), ExtendedValue::finite(ratio(1, 2)));
        // limit of min(eps, 5) as eps grows
        let m = ContinuityModulus::min_of(vec![
            ContinuityModulus::identity(),
            ContinuityModulus::constant(rat(5)).unwrap(),
        ])
        .unwrap();
        assert_eq!(m.sup(), ExtendedValue::finite(rat(5)));
    }

    #[test]
    fn normalize_truncates_at_identity() {
        let three = ContinuityModulus::scale(rat(3), ContinuityModulus::identity()).unwrap();
        let n = normalize(&three);
        assert!(n.below_identity());
        assert_eq!(n.eval(&rat(1)).unwrap(), rat(1));
        // pointwise min oracle for a constant
        let c2 = normalize(&ContinuityModulus::constant(rat(2)).unwrap());
        assert_eq!(c2.eval(&ratio(1, 2)).unwrap(), ratio(1, 2));
        assert_eq!(c2.eval(&rat(4)).unwrap(), rat(2));
        // identity is untouched pointwise
        let id = normalize(&ContinuityModulus::identity());
        for e in [ratio(1, 3), rat(1), rat(7)] {
            assert_eq!(id.eval(&e).unwrap(), e);
        }
    }

    #[test]
    fn pair_takes_minimum() {
        let p = pair_modulus(&[std(2), std(3)]).unwrap();
        assert_eq!(p.eval(&rat(6)).unwrap(), rat(2));
        assert!(pair_modulus(&[]).is_err());
        let single = pair_modulus(&[ContinuityModulus::identity()]).unwrap();
        assert_eq!(single.eval(&rat(5)).unwrap(), rat(5));
        // below_identity holds when some component has it
        let mixed =
            pair_modulus(&[ContinuityModulus::identity(), ContinuityModulus::constant(rat(1)).unwrap()])
                .unwrap();
        assert!(mixed.below_identity());
    }

    #[test]
    fn compose_chains() {
        let id = ContinuityModulus::identity();
        let c = compose_modulus(&id, &id).unwrap();
        assert_eq!(c.eval(&rat(9)).unwrap(), rat(9));
        let half = normalize(&ContinuityModulus::scale(ratio(1, 2), ContinuityModulus::identity()).unwrap());
        // 8 -> 4 -> 2 -> 1
        let h = compose_modulus(&half, &half).unwrap();
        assert_eq!(h.eval(&rat(8)).unwrap(), rat(1));
        // 4 -> 2 -> 2 -> 1
        let g = compose_modulus(&half, &id).unwrap();
        assert_eq!(g.eval(&rat(4)).unwrap(), rat(1));
        let unnormalized = ContinuityModulus::constant(rat(2)).unwrap();
        assert!(compose_modulus(&unnormalized, &id).is_err());
    }

    #[test]
    fn quantifier_rule() {
        let id = ContinuityModulus::identity();
        let q = quantifier_modulus(&id, &id, &rat(1));
        assert_eq!(q.eval(&rat(2)).unwrap(), rat(1));
        let unclamped = quantifier_modulus(&id, &id, &rat(0));
        for e in [ratio(1, 2), rat(1), rat(3)] {
            assert_eq!(unclamped.eval(&e).unwrap(), e);
        }
        // min(1, (1 ∧ 1/2)/2) = 1/4
        let q2 = quantifier_modulus(&std(2), &id, &rat(2));
        assert_eq!(q2.eval(&rat(1)).unwrap(), ratio(1, 4));
        assert!(q2.below_identity());
    }

    #[test]
    fn serialization_round_trip() {
        for text in [
            "id",
            "(const 5/2)",
            "(scale 1/2 id)",
            "(min id (const 5))",
            "(compose (scale 1/2 id) (scale 1/2 id))",
            "(clamp 1 id)",
            "(std 3)",
        ] {
            let m = ContinuityModulus::parse(text).unwrap();
            assert_eq!(m.to_sexp().to_string(), text);
        }
        assert!(ContinuityModulus::parse("(const 0)").is_err());
        assert!(ContinuityModulus::parse("(std 0)").is_err());
    }

    fn identity_table(gauges: Vec<Rat>, dist: Vec<Vec<Rat>>) -> FiniteMap {
        FiniteMap {
            dom_dist: dist.clone(),
            dom_gauge: gauges.clone(),
            img_dist: dist,
            img_gauge: gauges,
        }
    }

    #[test]
    fn respects_identity_map() {
        let dist = vec![
            vec![rat(0), rat(1)],
            vec![rat(1), rat(0)],
        ];
        let t = identity_table(vec![rat(0), rat(1)], dist);
        let r = respects_check(&t, &ContinuityModulus::identity()).unwrap();
        assert!(r.pass);
        assert!(grid_check(&t, &ContinuityModulus::identity()).unwrap().pass);
    }

    #[test]
    fn respects_constant_map_with_named_constant_modulus() {
        // constant map to a point with gauge 2; delta_a = id ∧ 1/2
        let n = 3;
        let dom_dist = vec![
            vec![rat(0), rat(1), rat(2)],
            vec![rat(1), rat(0), rat(1)],
            vec![rat(2), rat(1), rat(0)],
        ];
        let dom_gauge = vec![rat(0), rat(1), rat(2)];
        let img_dist = vec![vec![rat(0); n]; n];
        let img_gauge = vec![rat(2); n];
        let t = FiniteMap { dom_dist, dom_gauge, img_dist, img_gauge };
        let delta = ContinuityModulus::min_of(vec![
            ContinuityModulus::identity(),
            ContinuityModulus::constant(ratio(1, 2)).unwrap(),
        ])
        .unwrap();
        assert!(respects_check(&t, &delta).unwrap().pass);
        assert!(grid_check(&t, &delta).unwrap().pass);
        // the identity alone fails the gauge clause: sup δ = ∞ > 1/2
        let r = respects_check(&t, &ContinuityModulus::identity()).unwrap();
        assert!(!r.pass);
        assert_eq!(r.violation.unwrap().clause, Clause::Gauge);
    }

    #[test]
    fn respects_detects_distance_blowup() {
        // two points at domain distance 0... distance 1/8, images at distance 1
        let dom_dist = vec![
            vec![rat(0), ratio(1, 8)],
            vec![ratio(1, 8), rat(0)],
        ];
        let dom_gauge = vec![rat(0), rat(0)];
        let img_dist = vec![
            vec![rat(0), rat(1)],
            vec![rat(1), rat(0)],
        ];
        let img_gauge = vec![rat(0), rat(0)];
        let t = FiniteMap { dom_dist, dom_gauge, img_dist, img_gauge };
        let r = respects_check(&t, &ContinuityModulus::identity()).unwrap();
        assert!(!r.pass);
        let v = r.violation.unwrap();
        assert_eq!(v.clause, Clause::Distance);
        assert!(v.epsilon < rat(1));
        // grid oracle agrees
        assert!(!grid_check(&t, &ContinuityModulus::identity()).unwrap().pass);
    }

    #[test]
    fn malformed_tables_rejected() {
        let t = FiniteMap {
            dom_dist: vec![vec![rat(0)]],
            dom_gauge: vec![rat(0), rat(1)],
            img_dist: vec![vec![rat(0)]],
            img_gauge: vec![rat(0)],
        };
        assert!(respects_check(&t, &ContinuityModulus::identity()).is_err());
    }
}
