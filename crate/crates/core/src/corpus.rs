//! Deterministic randomized corpora: validated gauged structures, bounded
//! well-formed formulas, and random finite maps with moduli. The same
//! generators back the acceptance suite and the CLI selftest, so no
//! external data is needed.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::Zero;

use crate::modulus::{derived_modulus, ContinuityModulus, FiniteMap};
use crate::rational::{rat_max, rat_min, Rat};
use crate::structure::{function_table, predicate_table, GaugedStructure};
use crate::syntax::{dyadic_const, graph_pred_name, truncate_at, Formula, Signature, Term};

/// SplitMix64; deterministic across platforms and releases.
#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n.max(1)
    }

    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.below(den) < num
    }

    /// A rational `k/den` with `k` uniform in `[lo, hi]`.
    pub fn ratio_in(&mut self, lo: i64, hi: i64, den: i64) -> Rat {
        let span = (hi - lo + 1) as u64;
        let k = lo + self.below(span) as i64;
        crate::rational::ratio(k, den)
    }
}

/// Names and arities shared by every corpus structure: a unary and a
/// binary predicate and a unary function; moduli are derived per
/// structure from the generated tables.
pub fn corpus_symbols() -> Vec<(&'static str, usize, bool)> {
    vec![("P", 1, false), ("R", 2, false), ("f", 1, true)]
}

/// A random validated structure with at most `max_points` points.
/// `high_gauge` shifts gauges (and distances) upwards so that constancy
/// thresholds are exceeded by real points.
pub fn corpus_structure(rng: &mut Rng, max_points: usize, high_gauge: bool) -> GaugedStructure {
    let n = 1 + rng.below(max_points as u64) as usize;
    let points: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();

    // raw symmetric distances, then the min-plus closure for the triangle
    // inequality; positive entries stay positive
    let (dlo, dhi, dden) = if high_gauge { (4, 128, 4) } else { (1, 16, 4) };
    let mut dist = vec![vec![Rat::zero(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let q = rng.ratio_in(dlo, dhi, dden);
            dist[i][j] = q.clone();
            dist[j][i] = q;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let via = &dist[i][k] + &dist[k][j];
                if via < dist[i][j] {
                    dist[i][j] = via;
                }
            }
        }
    }

    // raw gauges repaired to 1-Lipschitz by the lower McShane envelope
    let (glo, ghi, gden) = if high_gauge { (0, 192, 8) } else { (0, 32, 8) };
    let raw: Vec<Rat> = (0..n).map(|_| rng.ratio_in(glo, ghi, gden)).collect();
    let gauge: Vec<Rat> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| &raw[j] + &dist[i][j])
                .fold(raw[i].clone(), |a, b| rat_min(&a, &b))
        })
        .collect();

    let mut preds: BTreeMap<String, BTreeMap<Vec<usize>, Rat>> = BTreeMap::new();
    let mut funs: BTreeMap<String, BTreeMap<Vec<usize>, usize>> = BTreeMap::new();
    for (name, arity, is_fun) in corpus_symbols() {
        if is_fun {
            let mut table = BTreeMap::new();
            for t in tuples(n, arity) {
                table.insert(t, rng.below(n as u64) as usize);
            }
            funs.insert(name.to_string(), table);
        } else {
            let mut table = BTreeMap::new();
            for t in tuples(n, arity) {
                table.insert(t, rng.ratio_in(0, 24, 8));
            }
            preds.insert(name.to_string(), table);
        }
    }

    // assemble with a placeholder signature, then derive symbol moduli
    // from the finished tables
    let mut m = GaugedStructure {
        signature: Arc::new(placeholder_signature()),
        points,
        dist,
        gauge,
        preds,
        funs,
    };
    let mut sig = Signature::new();
    sig.dist_modulus = derived_modulus(&predicate_table(&m, crate::syntax::DIST, 2));
    for (name, arity, is_fun) in corpus_symbols() {
        let table = if is_fun {
            function_table(&m, name, arity)
        } else {
            predicate_table(&m, name, arity)
        };
        let delta = derived_modulus(&table);
        if is_fun {
            sig.add_fun(name, arity, delta).expect("fresh");
        } else {
            sig.add_pred(name, arity, delta).expect("fresh");
        }
    }
    m.signature = Arc::new(sig);
    debug_assert!(crate::structure::validate(&m).pass());
    m
}

fn placeholder_signature() -> Signature {
    let mut sig = Signature::new();
    for (name, arity, is_fun) in corpus_symbols() {
        if is_fun {
            sig.add_fun(name, arity, ContinuityModulus::identity()).expect("fresh");
        } else {
            sig.add_pred(name, arity, ContinuityModulus::identity()).expect("fresh");
        }
    }
    sig
}

fn tuples(n: usize, arity: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        let mut next = Vec::with_capacity(out.len() * n);
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
// formulas

struct FormulaGen<'a> {
    rng: &'a mut Rng,
    fresh: u32,
}

impl FormulaGen<'_> {
    fn term(&mut self, vars: &[String]) -> Term {
        let v = vars[self.rng.below(vars.len() as u64) as usize].clone();
        if self.rng.chance(1, 4) {
            Term::app("f", vec![Term::Var(v)])
        } else {
            Term::Var(v)
        }
    }

    fn atom(&mut self, vars: &[String]) -> Formula {
        match self.rng.below(4) {
            0 => Formula::Atom("P".into(), vec![self.term(vars)]),
            1 => Formula::Atom("R".into(), vec![self.term(vars), self.term(vars)]),
            2 => Formula::Atom("d".into(), vec![self.term(vars), self.term(vars)]),
            _ => Formula::Atom("nu".into(), vec![self.term(vars)]),
        }
    }

    /// Any formula, bounded or not.
    fn any(&mut self, depth: u32, vars: &[String]) -> Formula {
        if depth == 0 || self.rng.chance(1, 3) {
            return if self.rng.chance(1, 5) { Formula::One } else { self.atom(vars) };
        }
        match self.rng.below(4) {
            0 => Formula::half(self.any(depth - 1, vars)),
            1 => Formula::add(self.any(depth - 1, vars), self.any(depth - 1, vars)),
            2 => Formula::sub(self.any(depth - 1, vars), self.any(depth - 1, vars)),
            _ => self.bounded(depth - 1, vars),
        }
    }

    /// A syntactically bounded formula.
    fn bounded(&mut self, depth: u32, vars: &[String]) -> Formula {
        if depth == 0 {
            return match self.rng.below(3) {
                0 => Formula::One,
                1 => dyadic_const(self.rng.below(4), self.rng.below(3) as u32),
                _ => truncate_at(&self.atom(vars), 1 + self.rng.below(2), self.rng.below(2) as u32),
            };
        }
        match self.rng.below(6) {
            0 => Formula::half(self.bounded(depth - 1, vars)),
            1 => Formula::add(self.bounded(depth - 1, vars), self.bounded(depth - 1, vars)),
            2 => Formula::sub(self.bounded(depth - 1, vars), self.any(depth - 1, vars)),
            3 => {
                // bounded ∸ gauge-of-variable: eventually constant shape
                let v = vars[self.rng.below(vars.len() as u64) as usize].clone();
                Formula::sub(self.bounded(depth - 1, vars), Formula::gauge_of_var(&v))
            }
            4 => truncate_at(
                &self.any(depth - 1, vars),
                1 + self.rng.below(3),
                self.rng.below(2) as u32,
            ),
            _ => {
                let x = format!("q{}", self.fresh);
                self.fresh += 1;
                let body = self.ec_body(depth - 1, vars, &x);
                if self.rng.chance(1, 2) {
                    Formula::sup(&x, body)
                } else {
                    Formula::inf(&x, body)
                }
            }
        }
    }

    /// A bounded body eventually constant in `x` (and usually using it).
    fn ec_body(&mut self, depth: u32, vars: &[String], x: &str) -> Formula {
        let mut with_x: Vec<String> = vars.to_vec();
        with_x.push(x.to_string());
        let core = Formula::sub(
            self.bounded(depth.saturating_sub(1), &with_x),
            Formula::gauge_of_var(x),
        );
        match self.rng.below(4) {
            0 => core,
            1 => Formula::half(core),
            2 => Formula::add(core, self.bounded(depth.saturating_sub(1), vars)),
            // vacuous quantification is legal too
            _ => self.bounded(depth.saturating_sub(1), vars),
        }
    }
}

/// A random syntactically bounded, well-formed formula whose free
/// variables lie among `y`, `z`.
pub fn corpus_formula(rng: &mut Rng, depth: u32) -> Formula {
    let vars = match rng.below(3) {
        0 => vec!["y".to_string()],
        1 => vec!["y".to_string(), "z".to_string()],
        _ => vec!["z".to_string()],
    };
    corpus_formula_with_vars(rng, depth, &vars)
}

/// Same generator with a caller-chosen free-variable pool.
pub fn corpus_formula_with_vars(rng: &mut Rng, depth: u32, vars: &[String]) -> Formula {
    let mut gen = FormulaGen { rng, fresh: 0 };
    let f = gen.bounded(depth, vars);
    debug_assert!(crate::analysis::classify(&f).map(|a| a.bounded).unwrap_or(false));
    f
}

/// An arbitrary (possibly unbounded) formula over the corpus symbols,
/// for syntax-level round trips.
pub fn corpus_any_formula(rng: &mut Rng, depth: u32) -> Formula {
    let vars = vec!["y".to_string(), "z".to_string()];
    let mut gen = FormulaGen { rng, fresh: 0 };
    gen.any(depth, &vars)
}

// ---------------------------------------------------------------------------
// random finite maps and moduli for the respects cross-validation

/// A random finite map between small gauged spaces (predicate-style image
/// with probability 1/2, point-style otherwise).
pub fn corpus_finite_map(rng: &mut Rng, max_size: usize) -> FiniteMap {
    let n = 2 + rng.below(max_size.max(3) as u64 - 1) as usize;
    let metric = |rng: &mut Rng, n: usize| -> Vec<Vec<Rat>> {
        let mut d = vec![vec![Rat::zero(); n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let q = rng.ratio_in(1, 16, 4);
                d[i][j] = q.clone();
                d[j][i] = q;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let via = &d[i][k] + &d[k][j];
                        if via < d[i][j] {
                            d[i][j] = via;
                        }
                    }
                }
            }
        }
        d
    };
    let dom_dist = metric(rng, n);
    let dom_gauge: Vec<Rat> = (0..n).map(|_| rng.ratio_in(0, 16, 4)).collect();
    if rng.chance(1, 2) {
        let values: Vec<Rat> = (0..n).map(|_| rng.ratio_in(0, 16, 4)).collect();
        FiniteMap::predicate_image(dom_dist, dom_gauge, &values)
    } else {
        let img_dist = metric(rng, n);
        let img_gauge: Vec<Rat> = (0..n).map(|_| rng.ratio_in(0, 16, 4)).collect();
        FiniteMap { dom_dist, dom_gauge, img_dist, img_gauge }
    }
}

/// A random modulus expression tree.
pub fn corpus_modulus(rng: &mut Rng, depth: u32) -> ContinuityModulus {
    if depth == 0 {
        return match rng.below(3) {
            0 => ContinuityModulus::identity(),
            1 => ContinuityModulus::constant(rng.ratio_in(1, 8, 2)).expect("positive"),
            _ => ContinuityModulus::standard(1 + rng.below(3) as u32).expect("arity"),
        };
    }
    match rng.below(4) {
        0 => ContinuityModulus::scale(rng.ratio_in(1, 6, 2), corpus_modulus(rng, depth - 1))
            .expect("positive"),
        1 => ContinuityModulus::min_of(vec![
            corpus_modulus(rng, depth - 1),
            corpus_modulus(rng, depth - 1),
        ])
        .expect("nonempty"),
        2 => ContinuityModulus::clamp_to(rng.ratio_in(1, 8, 2), corpus_modulus(rng, depth - 1))
            .expect("positive"),
        _ => {
            let f = crate::modulus::normalize(&corpus_modulus(rng, depth - 1));
            let g = crate::modulus::normalize(&corpus_modulus(rng, depth - 1));
            crate::modulus::compose_modulus(&f, &g).expect("both normalized")
        }
    }
}

// ---------------------------------------------------------------------------
// relationalization (graph transform applied to tables)

/// Replaces every function table by its graph predicate table
/// `G_f(ā, b) = d(f(ā), b)` over the transformed signature, making the
/// structure consumable by emboundment.
pub fn relationalize(m: &GaugedStructure) -> GaugedStructure {
    let (rel_sig, _) = crate::syntax::graph_signature(&m.signature)
        .expect("graph transform of a valid signature");
    let mut preds = m.preds.clone();
    for f in &m.signature.funs {
        let mut table = BTreeMap::new();
        for (args, &img) in &m.funs[&f.name] {
            for j in 0..m.len() {
                let mut key = args.clone();
                key.push(j);
                table.insert(key, m.dist[img][j].clone());
            }
        }
        preds.insert(graph_pred_name(&f.name), table);
    }
    let mut out = m.clone();
    out.preds = preds;
    out.funs.clear();
    out.signature = Arc::new(rel_sig);
    out
}

/// Distinct gauge values of a structure, ascending.
pub fn gauge_levels(m: &GaugedStructure) -> Vec<Rat> {
    let mut v = m.gauge.clone();
    v.sort();
    v.dedup();
    v
}

/// Convenience: the maximum gauge (0 on empty structures).
pub fn max_gauge(m: &GaugedStructure) -> Rat {
    m.gauge.iter().fold(Rat::zero(), |a, b| rat_max(&a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structures_validate() {
        let mut rng = Rng::new(7);
        for i in 0..30 {
            let m = corpus_structure(&mut rng, 6, i % 5 == 0);
            assert!(crate::structure::validate(&m).pass(), "structure {i} invalid");
            assert!(m.len() >= 1 && m.len() <= 6);
        }
    }

    #[test]
    fn formulas_are_bounded_and_well_formed() {
        let mut rng = Rng::new(11);
        for _ in 0..200 {
            let f = corpus_formula(&mut rng, 3);
            let a = crate::analysis::classify(&f).expect("well-formed");
            assert!(a.bounded);
            assert!(crate::analysis::well_formed(&f).0);
            for v in a.free.iter() {
                assert!(v == "y" || v == "z", "unexpected free variable {v}");
            }
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        let fa = corpus_formula(&mut a, 3);
        let fb = corpus_formula(&mut b, 3);
        assert_eq!(fa, fb);
        let sa = corpus_structure(&mut a, 5, false);
        let sb = corpus_structure(&mut b, 5, false);
        assert_eq!(sa.dist, sb.dist);
        assert_eq!(sa.gauge, sb.gauge);
    }

    #[test]
    fn relationalized_structures_validate_and_embound() {
        let mut rng = Rng::new(23);
        for _ in 0..10 {
            let m = corpus_structure(&mut rng, 4, false);
            let rel = relationalize(&m);
            assert!(rel.signature.is_relational());
            assert!(crate::structure::validate(&rel).pass());
            let e = crate::embound::embound(&rel).expect("embounds");
            assert!(crate::embound::validate_embounded(&e).pass());
        }
    }

    #[test]
    fn moduli_are_monotone_on_grids() {
        let mut rng = Rng::new(5);
        for _ in 0..40 {
            let m = corpus_modulus(&mut rng, 3);
            let mut grid: Vec<Rat> = (1..=12).map(|k| crate::rational::ratio(k, 3)).collect();
            grid.push(crate::rational::ratio(1, 7));
            grid.sort();
            let mut last: Option<Rat> = None;
            for e in &grid {
                let v = m.eval(e).unwrap();
                if let Some(prev) = last {
                    assert!(prev <= v, "modulus {m} not monotone");
                }
                last = Some(v);
            }
        }
    }
}
