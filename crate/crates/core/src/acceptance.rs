//! The acceptance criteria as reusable property suites over the
//! deterministic corpora. The integration test target runs them at full
//! scale; the CLI `selftest` runs the same code at a reduced scale, so no
//! external data is required either way.

use std::collections::BTreeSet;

use num_traits::{One, Zero};

use crate::analysis;
use crate::banach_mazur::{
    self, build_perturbation, certify_delta, eps_iso_check, grid_min_norm, op_norm,
    simplex_min_norm, vec_norm, LinearMap, NormKind, NormedSpace,
};
use crate::corpus::{
    corpus_finite_map, corpus_formula, corpus_formula_with_vars, corpus_modulus,
    corpus_structure, relationalize, Rng,
};
use crate::embound;
use crate::modulus::{grid_check, respects_check, FiniteMap};
use crate::rational::{monus, rat, rat_max, rat_min, rat_str, ratio, Rat};
use crate::structure::{
    all_assignments, build_down, build_up, dyadic_window, eval_formula, inf_window, prenex,
    principal_ultraproduct, sup_window, validate, Assignment, GaugedStructure,
};
use crate::syntax::{free_vars, Formula, Term};
use crate::theories::{
    self, check_graph_axioms, check_theory, instantiate_scheme, load_theory, measure_algebra,
    measure_algebra_signature, Caps, CheckParams,
};

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CriterionResult {
    fn ok(name: &'static str, detail: String) -> Self {
        CriterionResult { name, pass: true, detail }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        CriterionResult { name, pass: false, detail }
    }
}

/// Suite sizes; the acceptance scale satisfies every stated minimum.
#[derive(Clone, Debug)]
pub struct Scale {
    pub formulas: usize,
    pub structures: usize,
    pub modulus_tables: usize,
    pub window_draws: usize,
    pub bm_trials: usize,
    pub grid_agreements: usize,
    pub weight_values: Vec<Rat>,
    pub weight_len_cap: usize,
    pub seed: u64,
}

impl Scale {
    pub fn acceptance() -> Self {
        Scale {
            formulas: 500,
            structures: 100,
            modulus_tables: 1000,
            window_draws: 500,
            bm_trials: 1000,
            grid_agreements: 40,
            weight_values: (1..=8).map(|k| ratio(k, 8)).collect(),
            weight_len_cap: 3,
            seed: 0xA11CE,
        }
    }

    pub fn selftest() -> Self {
        Scale {
            formulas: 80,
            structures: 25,
            modulus_tables: 150,
            window_draws: 80,
            bm_trials: 60,
            grid_agreements: 8,
            weight_values: vec![ratio(1, 2), rat(1)],
            weight_len_cap: 2,
            seed: 0xA11CE,
        }
    }
}

pub struct TestCorpus {
    pub structures: Vec<GaugedStructure>,
    pub formulas: Vec<Formula>,
}

pub fn build_corpus(scale: &Scale) -> TestCorpus {
    let mut rng = Rng::new(scale.seed);
    let structures = (0..scale.structures)
        .map(|i| corpus_structure(&mut rng, 6, i % 7 == 3))
        .collect();
    let formulas = (0..scale.formulas).map(|_| corpus_formula(&mut rng, 3)).collect();
    TestCorpus { structures, formulas }
}

fn capped_assignments(
    m: &GaugedStructure,
    vars: &BTreeSet<String>,
    cap: usize,
) -> Vec<Assignment> {
    let mut all = all_assignments(m, vars);
    all.truncate(cap);
    all
}

// ---------------------------------------------------------------------------
// 1. bound soundness

pub fn bound_soundness(corpus: &TestCorpus) -> CriterionResult {
    let name = "1-bound-soundness";
    let mut checks = 0usize;
    for (i, f) in corpus.formulas.iter().enumerate() {
        let b = match analysis::bound(f) {
            Ok(b) => b,
            Err(e) => return CriterionResult::fail(name, format!("formula {i}: {e}")),
        };
        let fv = free_vars(f);
        for k in 0..3 {
            let m = &corpus.structures[(i * 3 + k) % corpus.structures.len()];
            for asg in capped_assignments(m, &fv, 16) {
                match eval_formula(m, f, &asg) {
                    Ok(v) => {
                        checks += 1;
                        if v > b {
                            return CriterionResult::fail(
                                name,
                                format!(
                                    "eval {} exceeds bound {} for formula {i}",
                                    rat_str(&v),
                                    rat_str(&b)
                                ),
                            );
                        }
                    }
                    Err(e) => return CriterionResult::fail(name, format!("formula {i}: {e}")),
                }
            }
        }
    }
    CriterionResult::ok(
        name,
        format!(
            "{checks} exact comparisons over {} formulas x {} structures",
            corpus.formulas.len(),
            corpus.structures.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. constancy soundness

pub fn constancy_soundness(corpus: &TestCorpus) -> CriterionResult {
    let name = "2-constancy-soundness";
    let mut checks = 0usize;
    for (i, f) in corpus.formulas.iter().enumerate() {
        let a = match analysis::classify(f) {
            Ok(a) => a,
            Err(e) => return CriterionResult::fail(name, format!("formula {i}: {e}")),
        };
        for (x, c) in &a.eventually_constant {
            let limit = match analysis::limit_formula(f, x) {
                Ok(l) => l,
                Err(e) => return CriterionResult::fail(name, format!("formula {i}: {e}")),
            };
            let mut rest = a.free.clone();
            rest.remove(x);
            for k in 0..4 {
                let m = &corpus.structures[(i * 5 + k * 17) % corpus.structures.len()];
                let witnesses: Vec<usize> =
                    (0..m.len()).filter(|&b| m.gauge[b] >= *c).collect();
                if witnesses.is_empty() {
                    continue;
                }
                for asg in capped_assignments(m, &rest, 8) {
                    let limit_value = match eval_formula(m, &limit, &asg) {
                        Ok(v) => v,
                        Err(e) => {
                            return CriterionResult::fail(name, format!("formula {i}: {e}"))
                        }
                    };
                    for &b in &witnesses {
                        let mut with_b = asg.clone();
                        with_b.insert(x.clone(), b);
                        let v = match eval_formula(m, f, &with_b) {
                            Ok(v) => v,
                            Err(e) => {
                                return CriterionResult::fail(name, format!("formula {i}: {e}"))
                            }
                        };
                        checks += 1;
                        if v != limit_value {
                            return CriterionResult::fail(
                                name,
                                format!(
                                    "formula {i}: value {} at gauge {} differs from limit {}",
                                    rat_str(&v),
                                    rat_str(&m.gauge[b]),
                                    rat_str(&limit_value)
                                ),
                            );
                        }
                    }
                }
            }
        }
    }
    if checks == 0 {
        return CriterionResult::fail(name, "no constancy instance was exercised".into());
    }
    CriterionResult::ok(name, format!("{checks} exact substitution identities"))
}

// ---------------------------------------------------------------------------
// 3. modulus soundness

fn eval_table(
    m: &GaugedStructure,
    f: &Formula,
) -> Result<FiniteMap, crate::structure::StructureError> {
    let fv = free_vars(f);
    let assignments = all_assignments(m, &fv);
    let vars: Vec<&String> = fv.iter().collect();
    let k = assignments.len();
    let mut dom_dist = vec![vec![Rat::zero(); k]; k];
    let mut dom_gauge = vec![Rat::zero(); k];
    let mut values = Vec::with_capacity(k);
    for (i, a) in assignments.iter().enumerate() {
        let mut g = Rat::zero();
        for v in &vars {
            g = rat_max(&g, &m.gauge[a[*v]]);
        }
        dom_gauge[i] = g;
        values.push(eval_formula(m, f, a)?);
        for (j, b) in assignments.iter().enumerate() {
            let mut d = Rat::zero();
            for v in &vars {
                d = rat_max(&d, &m.dist[a[*v]][b[*v]]);
            }
            dom_dist[i][j] = d;
        }
    }
    Ok(FiniteMap::predicate_image(dom_dist, dom_gauge, &values))
}

pub fn modulus_soundness(corpus: &TestCorpus, scale: &Scale) -> CriterionResult {
    let name = "3-modulus-soundness";
    let mut formula_checks = 0usize;
    for (i, f) in corpus.formulas.iter().enumerate() {
        for k in 0..2 {
            let m = &corpus.structures[(i * 2 + k * 31) % corpus.structures.len()];
            if m.is_empty() {
                continue;
            }
            let delta = match analysis::synthesize_modulus(&m.signature, f) {
                Ok(d) => d,
                Err(e) => return CriterionResult::fail(name, format!("formula {i}: {e}")),
            };
            if !delta.below_identity() {
                return CriterionResult::fail(name, format!("formula {i}: modulus above id"));
            }
            let table = match eval_table(m, f) {
                Ok(t) => t,
                Err(e) => return CriterionResult::fail(name, format!("formula {i}: {e}")),
            };
            match respects_check(&table, &delta) {
                Ok(r) if r.pass => formula_checks += 1,
                Ok(r) => {
                    return CriterionResult::fail(
                        name,
                        format!("formula {i} fails its synthesized modulus: {:?}", r.violation),
                    )
                }
                Err(e) => return CriterionResult::fail(name, format!("formula {i}: {e}")),
            }
        }
    }

    // cross-validation of the closed-form criterion against the grid
    let mut rng = Rng::new(scale.seed ^ 0x5EED);
    let mut agreements = 0usize;
    for t in 0..scale.modulus_tables {
        let table = corpus_finite_map(&mut rng, 4);
        let delta = corpus_modulus(&mut rng, 2);
        let closed = match respects_check(&table, &delta) {
            Ok(r) => r.pass,
            Err(e) => return CriterionResult::fail(name, format!("table {t}: {e}")),
        };
        let grid = match grid_check(&table, &delta) {
            Ok(r) => r.pass,
            Err(e) => return CriterionResult::fail(name, format!("table {t}: {e}")),
        };
        if closed != grid {
            return CriterionResult::fail(
                name,
                format!("table {t}: closed-form {closed} vs grid {grid} for {delta}"),
            );
        }
        agreements += 1;
    }
    CriterionResult::ok(
        name,
        format!("{formula_checks} synthesized moduli verified; {agreements} grid agreements"),
    )
}

// ---------------------------------------------------------------------------
// 4. restricted-quantifier sandwich

pub fn window_sandwich(corpus: &TestCorpus, scale: &Scale) -> CriterionResult {
    let name = "4-window-sandwich";
    let mut rng = Rng::new(scale.seed ^ 0x717D0);
    let x = "x".to_string();
    let mut draws = 0usize;
    while draws < scale.window_draws {
        let m = &corpus.structures[rng.below(corpus.structures.len() as u64) as usize];
        let vars = if rng.chance(1, 2) {
            vec![x.clone()]
        } else {
            vec![x.clone(), "y".to_string()]
        };
        let f = corpus_formula_with_vars(&mut rng, 2, &vars);
        let r = rng.ratio_in(1, 12, 4);
        let rp = &r + rng.ratio_in(1, 8, 4);
        let (down, up, k) = match (
            build_down(&f, &x, &r, &rp),
            build_up(&f, &x, &r, &rp),
            analysis::integer_bound(&f),
        ) {
            (Ok(d), Ok(u), Ok(k)) => (d, u, k),
            (Err(e), _, _) | (_, Err(e), _) => {
                return CriterionResult::fail(name, e.to_string())
            }
            (_, _, Err(e)) => return CriterionResult::fail(name, e.to_string()),
        };
        let k_rat = rat(k as i64);
        let sup_w = match sup_window(&f, &x, &r, &rp) {
            Ok(w) => w,
            Err(e) => return CriterionResult::fail(name, e.to_string()),
        };
        let inf_w = match inf_window(&f, &x, &r, &rp) {
            Ok(w) => w,
            Err(e) => return CriterionResult::fail(name, e.to_string()),
        };

        let mut rest = free_vars(&f);
        rest.remove(&x);
        for asg in capped_assignments(m, &rest, 6) {
            let mut inside_max: Option<Rat> = None; // over nu <= r
            let mut open_max: Option<Rat> = None; // over nu < r'
            let mut inside_min: Option<Rat> = None;
            let mut open_min: Option<Rat> = None;
            for b in 0..m.len() {
                let mut with_b = asg.clone();
                with_b.insert(x.clone(), b);
                let v = match eval_formula(m, &f, &with_b) {
                    Ok(v) => v,
                    Err(e) => return CriterionResult::fail(name, e.to_string()),
                };
                let vd = match eval_formula(m, &down, &with_b) {
                    Ok(v) => v,
                    Err(e) => return CriterionResult::fail(name, e.to_string()),
                };
                let vu = match eval_formula(m, &up, &with_b) {
                    Ok(v) => v,
                    Err(e) => return CriterionResult::fail(name, e.to_string()),
                };
                if vd > v {
                    return CriterionResult::fail(name, "down-windowed value above original".into());
                }
                if m.gauge[b] <= r {
                    if vd != v || vu != v {
                        return CriterionResult::fail(
                            name,
                            "boundary: windowed formula differs inside the inner radius".into(),
                        );
                    }
                    inside_max = Some(inside_max.map_or(v.clone(), |p| rat_max(&p, &v)));
                    inside_min = Some(inside_min.map_or(v.clone(), |p| rat_min(&p, &v)));
                }
                if m.gauge[b] >= rp {
                    if !vd.is_zero() {
                        return CriterionResult::fail(
                            name,
                            "boundary: down-windowed value nonzero beyond the outer radius".into(),
                        );
                    }
                    if vu != k_rat {
                        return CriterionResult::fail(
                            name,
                            "boundary: up-windowed value differs from k beyond the outer radius"
                                .into(),
                        );
                    }
                }
                if m.gauge[b] < rp {
                    open_max = Some(open_max.map_or(v.clone(), |p| rat_max(&p, &v)));
                    open_min = Some(open_min.map_or(v.clone(), |p| rat_min(&p, &v)));
                }
            }
            let sup_val = match eval_formula(m, &sup_w, &asg) {
                Ok(v) => v,
                Err(e) => return CriterionResult::fail(name, e.to_string()),
            };
            let inf_val = match eval_formula(m, &inf_w, &asg) {
                Ok(v) => v,
                Err(e) => return CriterionResult::fail(name, e.to_string()),
            };
            let lower = inside_max.unwrap_or_else(Rat::zero);
            let upper = open_max.unwrap_or_else(Rat::zero);
            if !(lower <= sup_val && sup_val <= upper) {
                return CriterionResult::fail(
                    name,
                    format!(
                        "sup sandwich {} <= {} <= {} violated",
                        rat_str(&lower),
                        rat_str(&sup_val),
                        rat_str(&upper)
                    ),
                );
            }
            if let Some(im) = inside_min {
                if inf_val > im {
                    return CriterionResult::fail(name, "inf sandwich upper side violated".into());
                }
            }
            match open_min {
                Some(om) => {
                    if inf_val < om {
                        return CriterionResult::fail(
                            name,
                            "inf sandwich lower side violated".into(),
                        );
                    }
                }
                None => {
                    if inf_val != k_rat {
                        return CriterionResult::fail(
                            name,
                            "inf over an all-far structure must be k".into(),
                        );
                    }
                }
            }
        }
        draws += 1;
    }
    CriterionResult::ok(name, format!("{draws} window draws, all sandwiches exact"))
}

// ---------------------------------------------------------------------------
// 5. prenex equivalence

pub fn prenex_equivalence(corpus: &TestCorpus) -> CriterionResult {
    let name = "5-prenex-equivalence";
    let mut checks = 0usize;
    for (i, f) in corpus.formulas.iter().enumerate() {
        let p = prenex(f);
        if !p.is_prenex() {
            return CriterionResult::fail(name, format!("formula {i}: output not prenex"));
        }
        if !analysis::well_formed(&p).0 {
            return CriterionResult::fail(name, format!("formula {i}: output ill-formed"));
        }
        let fv = free_vars(f);
        for k in 0..2 {
            let m = &corpus.structures[(i + k * 53) % corpus.structures.len()];
            for asg in capped_assignments(m, &fv, 12) {
                let a = match eval_formula(m, f, &asg) {
                    Ok(v) => v,
                    Err(e) => return CriterionResult::fail(name, e.to_string()),
                };
                let b = match eval_formula(m, &p, &asg) {
                    Ok(v) => v,
                    Err(e) => return CriterionResult::fail(name, e.to_string()),
                };
                checks += 1;
                if a != b {
                    return CriterionResult::fail(
                        name,
                        format!("formula {i}: prenex changed the value"),
                    );
                }
            }
        }
    }
    CriterionResult::ok(name, format!("{checks} exact equalities"))
}

// ---------------------------------------------------------------------------
// 6. emboundment

pub fn emboundment(corpus: &TestCorpus) -> CriterionResult {
    let name = "6-emboundment";
    // θ-subadditivity on the 41x41 quarter-integer grid
    for i in 0..=40i64 {
        for j in 0..=40i64 {
            let x = ratio(i, 4);
            let y = ratio(j, 4);
            if embound::theta(&(&x + &y)) > embound::theta(&x) + embound::theta(&y) {
                return CriterionResult::fail(name, "theta subadditivity failed".into());
            }
        }
    }
    let mut structures = 0usize;
    for m in &corpus.structures {
        let rel = relationalize(m);
        let e = match embound::embound(&rel) {
            Ok(e) => e,
            Err(err) => return CriterionResult::fail(name, err.to_string()),
        };
        let report = embound::validate_embounded(&e);
        if !report.pass() {
            return CriterionResult::fail(
                name,
                format!("embounded structure invalid: {}", report.failures[0]),
            );
        }
        for i in 0..rel.len() {
            for j in 0..rel.len() {
                if rel.dist[i][j] < e.structure.dist[i][j] {
                    return CriterionResult::fail(name, "d^M < d^M-infinity".into());
                }
            }
        }
        let back = match embound::recover(
            &e.structure,
            e.infinity_name(),
            Some(&rel.signature),
        ) {
            Ok(b) => b,
            Err(err) => return CriterionResult::fail(name, err.to_string()),
        };
        if back.dist != rel.dist || back.gauge != rel.gauge || back.preds != rel.preds {
            return CriterionResult::fail(name, "recover(embound(M)) differs from M".into());
        }
        structures += 1;
    }
    CriterionResult::ok(
        name,
        format!("{structures} structures embounded, validated, and recovered exactly"),
    )
}

// ---------------------------------------------------------------------------
// 7. measure-algebra theories

/// Independent arithmetic oracle for the atomless-scheme defect on a
/// single-atom algebra: works directly with the window arithmetic
/// `φ↓ = φ ∸ K(ν ∸ s)` instead of formula trees.
fn atomless_defect_oracle(weights: &[Rat], n: u64, eps: &Rat) -> Rat {
    let w = weights.len();
    let count = 1usize << w;
    let mu = |mask: usize| -> Rat {
        (0..w)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| weights[i].clone())
            .fold(Rat::zero(), |a, b| a + b)
    };
    let one = Rat::one();
    let psi = |x: usize, y: usize| -> Rat {
        let d = mu(x & y) - mu(x) / rat(2);
        let d = if d < Rat::zero() { -d } else { d };
        rat_min(&d, &one) // truncation at 1 used by the window macros
    };
    let nn = rat(n as i64);
    let (m_in, s_in) = dyadic_window(&nn, &(&nn + eps)).expect("window");
    let k_in = rat(1i64 << m_in);
    let (m_out, s_out) = dyadic_window(&(&nn - eps), &nn).expect("window");
    let k_out = rat(1i64 << m_out);
    let mut best = Rat::zero(); // the sup includes the limit value 0
    for x in 0..count {
        // inf over y of the up-windowed value, including the limit k = 1
        let mut inner = one.clone();
        for y in 0..count {
            let body = monus(&(&one - psi(x, y)), &(&k_in * monus(&mu(y), &s_in)));
            let up = &one - body;
            inner = rat_min(&inner, &up);
        }
        let down = monus(&inner, &(&k_out * monus(&mu(x), &s_out)));
        best = rat_max(&best, &down);
    }
    best
}

pub fn measure_algebra_theories(scale: &Scale) -> CriterionResult {
    let name = "7-measure-algebras";
    let caps = Caps::from_env();
    let sig = measure_algebra_signature();
    let theory = match load_theory(theories::shipped::MEASURE_ALGEBRA_THY, &sig) {
        Ok(t) => t,
        Err(e) => return CriterionResult::fail(name, e.to_string()),
    };
    // weight multisets over the value set, up to the length cap; algebras
    // from permuted vectors are isomorphic by relabeling atoms
    let mut vectors: Vec<Vec<Rat>> = Vec::new();
    let values = &scale.weight_values;
    for len in 1..=scale.weight_len_cap {
        let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..len {
            let mut next = Vec::new();
            for prefix in &stack {
                let start = prefix.last().copied().unwrap_or(0);
                for vi in start..values.len() {
                    let mut p = prefix.clone();
                    p.push(vi);
                    next.push(p);
                }
            }
            stack = next;
        }
        for idx in stack {
            vectors.push(idx.into_iter().map(|i| values[i].clone()).collect());
        }
    }

    let universal_params = CheckParams { ns: vec![4], eps: vec![] };
    let mut algebras = 0usize;
    for weights in &vectors {
        let m = match measure_algebra(weights, &caps) {
            Ok(m) => m,
            Err(e) => return CriterionResult::fail(name, e.to_string()),
        };
        if !validate(&m).pass() {
            return CriterionResult::fail(name, format!("algebra {weights:?} fails validation"));
        }
        let report = match check_theory(&m, &theory, &sig, &universal_params) {
            Ok(r) => r,
            Err(e) => return CriterionResult::fail(name, e.to_string()),
        };
        if !report.pass() {
            let bad: Vec<_> = report.rows.iter().filter(|r| !r.defect.is_zero()).collect();
            return CriterionResult::fail(
                name,
                format!("universal axioms have nonzero defect on {weights:?}: {bad:?}"),
            );
        }
        algebras += 1;
    }

    // atomless scheme on the single-atom algebra: the regression constant
    // 1/2 at (n=2, eps=1/2) was computed by the arithmetic oracle; at
    // n=1 the open window excludes the atom and the defect is 0
    let single = measure_algebra(&[rat(1)], &caps).expect("single atom");
    let atomless = theory
        .schemes
        .iter()
        .find(|(_, s)| s.uses_n() && s.uses_eps())
        .map(|(_, s)| s.clone())
        .expect("shipped theory has the atomless scheme");
    let eps = ratio(1, 2);
    for (n, expected) in [(1u64, rat(0)), (2u64, ratio(1, 2))] {
        let oracle = atomless_defect_oracle(&[rat(1)], n, &eps);
        if oracle != expected {
            return CriterionResult::fail(
                name,
                format!("oracle value {} at n={n} disagrees with the pinned constant", rat_str(&oracle)),
            );
        }
        let cond = match instantiate_scheme(&atomless, n, &eps) {
            Ok(c) => c,
            Err(e) => return CriterionResult::fail(name, e.to_string()),
        };
        let defect = match cond.defect(&single) {
            Ok(d) => d,
            Err(e) => return CriterionResult::fail(name, e.to_string()),
        };
        if defect != expected {
            return CriterionResult::fail(
                name,
                format!(
                    "atomless defect at n={n} is {}, expected {}",
                    rat_str(&defect),
                    rat_str(&expected)
                ),
            );
        }
    }
    CriterionResult::ok(
        name,
        format!("{algebras} algebras validated with zero universal defect; atomless defect pinned at 1/2"),
    )
}

// ---------------------------------------------------------------------------
// 8. graph transform

pub fn graph_transform(scale: &Scale) -> CriterionResult {
    let name = "8-graph-transform";
    let caps = Caps::from_env();
    let eps_list = vec![rat(1), ratio(1, 2), ratio(1, 4)];
    let mut targets: Vec<(String, GaugedStructure, Vec<crate::syntax::GraphAxiom>)> = Vec::new();

    let ma = measure_algebra(&[ratio(1, 2), ratio(1, 2)], &caps).expect("algebra");
    let (_, ma_axioms) = crate::syntax::graph_signature(&ma.signature).expect("transform");
    targets.push(("measure-algebra".into(), relationalize(&ma), ma_axioms));

    let mut rng = Rng::new(scale.seed ^ 0x6AF);
    for i in 0..2 {
        let m = corpus_structure(&mut rng, 4, false);
        let (_, axioms) = crate::syntax::graph_signature(&m.signature).expect("transform");
        targets.push((format!("corpus-{i}"), relationalize(&m), axioms));
    }

    let mut rows = 0usize;
    for (label, rel, axioms) in &targets {
        if !validate(rel).pass() {
            return CriterionResult::fail(name, format!("{label}: transformed structure invalid"));
        }
        let report = match check_graph_axioms(rel, axioms, &eps_list) {
            Ok(r) => r,
            Err(e) => return CriterionResult::fail(name, format!("{label}: {e}")),
        };
        if !report.skipped.is_empty() {
            return CriterionResult::fail(
                name,
                format!("{label}: skipped instances {:?}", report.skipped),
            );
        }
        if !report.pass() {
            let bad: Vec<_> = report.rows.iter().filter(|r| !r.defect.is_zero()).collect();
            return CriterionResult::fail(name, format!("{label}: nonzero defects {bad:?}"));
        }
        rows += report.rows.len();
    }
    CriterionResult::ok(name, format!("{rows} axiom instances, all defect 0"))
}

// ---------------------------------------------------------------------------
// 9. principal ultraproduct

fn los_formula_pool(count: usize) -> Vec<Formula> {
    let mut pool = Vec::new();
    let mu = |t: Term| Formula::Atom("nu".into(), vec![t]);
    for k in 0..4u64 {
        // sup_x (k/2 ∸ μ(x)) and its inf dual
        let c = crate::syntax::dyadic_const(k, 1);
        pool.push(Formula::sup(
            "x",
            Formula::sub(c.clone(), mu(Term::var("x"))),
        ));
        pool.push(Formula::inf("x", Formula::sub(c, mu(Term::var("x")))));
    }
    // open formulas over the lattice operations
    let join = |a: Term, b: Term| Term::app("join", vec![a, b]);
    let meet = |a: Term, b: Term| Term::app("meet", vec![a, b]);
    let sdiff = |a: Term, b: Term| Term::app("sdiff", vec![a, b]);
    pool.push(Formula::atom("d", vec![join(Term::var("y"), Term::var("z")), Term::var("y")]));
    pool.push(Formula::atom("d", vec![meet(Term::var("y"), Term::var("z")), Term::var("z")]));
    pool.push(mu(sdiff(Term::var("y"), Term::var("z"))));
    pool.push(Formula::half(mu(join(Term::var("y"), Term::var("z")))));
    pool.push(Formula::add(mu(Term::var("y")), mu(Term::var("z"))));
    pool.push(Formula::abs_diff(mu(Term::var("y")), mu(Term::var("z"))));
    pool.push(Formula::min(mu(Term::var("y")), Formula::One));
    pool.push(Formula::max(mu(Term::var("y")), Formula::One));
    pool.push(Formula::sup(
        "x",
        Formula::sub(
            crate::syntax::truncate_at(&mu(meet(Term::var("x"), Term::var("y"))), 1, 0),
            mu(Term::var("x")),
        ),
    ));
    pool.push(Formula::inf(
        "x",
        Formula::add(
            Formula::sub(Formula::One, mu(Term::var("x"))),
            Formula::sub(Formula::One, mu(Term::var("y"))),
        ),
    ));
    pool.push(Formula::sup(
        "x",
        Formula::add(
            Formula::sub(Formula::One, mu(Term::var("x"))),
            Formula::sub(Formula::One, mu(Term::var("y"))),
        ),
    ));
    pool.push(Formula::inf("x", Formula::sub(Formula::half(Formula::One), mu(Term::var("x")))));
    pool.truncate(count);
    pool
}

pub fn principal_los(_corpus: &TestCorpus) -> CriterionResult {
    let name = "9-principal-ultraproduct";
    let caps = Caps::from_env();
    let factors: Vec<GaugedStructure> = [
        vec![rat(1)],
        vec![ratio(1, 2), ratio(1, 2)],
        vec![ratio(1, 4), ratio(3, 4)],
        vec![ratio(1, 2), ratio(1, 4), ratio(1, 4)],
    ]
    .iter()
    .map(|w| measure_algebra(w, &caps).expect("algebra"))
    .collect();
    let pool = los_formula_pool(20);
    if pool.len() != 20 {
        return CriterionResult::fail(name, "formula pool must have 20 entries".into());
    }
    let mut checks = 0usize;
    for j in 0..factors.len() {
        let product = match principal_ultraproduct(&factors, j) {
            Ok(p) => p,
            Err(e) => return CriterionResult::fail(name, e.to_string()),
        };
        for f in &pool {
            let fv = free_vars(f);
            for asg in capped_assignments(&product, &fv, 9) {
                let left = match eval_formula(&product, f, &asg) {
                    Ok(v) => v,
                    Err(e) => return CriterionResult::fail(name, e.to_string()),
                };
                let right = match eval_formula(&factors[j], f, &asg) {
                    Ok(v) => v,
                    Err(e) => return CriterionResult::fail(name, e.to_string()),
                };
                checks += 1;
                if left != right {
                    return CriterionResult::fail(name, "ultraproduct value differs".into());
                }
            }
        }
    }
    CriterionResult::ok(name, format!("{checks} exact limit identities over 20 formulas"))
}

// ---------------------------------------------------------------------------
// 10. Banach-Mazur

pub fn banach_mazur_trials(scale: &Scale) -> CriterionResult {
    let name = "10-banach-mazur";
    let mut rng = Rng::new(scale.seed ^ 0xB34A);
    let tol = banach_mazur::tolerance();
    let mut trials = 0usize;
    while trials < scale.bm_trials {
        let dim = 1 + rng.below(4) as usize;
        let kind = if rng.chance(1, 2) { NormKind::L1 } else { NormKind::LInf };
        let space = NormedSpace::new(dim, kind);
        let k = 1 + rng.below(dim as u64) as usize;
        let basis: Vec<Vec<Rat>> = {
            let mut tries = 0;
            loop {
                let cand: Vec<Vec<Rat>> = (0..k)
                    .map(|_| (0..dim).map(|_| rng.ratio_in(-8, 8, 4)).collect())
                    .collect();
                match simplex_min_norm(&cand, &space) {
                    Ok(_) => break cand,
                    Err(_) if tries < 50 => tries += 1,
                    Err(e) => return CriterionResult::fail(name, e.to_string()),
                }
            }
        };
        let eps = rng.ratio_in(1, 8, 16);
        let cert = match certify_delta(&basis, &eps, &space) {
            Ok(c) => c,
            Err(e) => return CriterionResult::fail(name, e.to_string()),
        };
        // random perturbation of each basis vector within the radius
        let mut targets = Vec::with_capacity(k);
        for b in &basis {
            let dir: Vec<Rat> = (0..dim).map(|_| rng.ratio_in(-4, 4, 4)).collect();
            let norm = vec_norm(&dir, kind);
            let t = rng.ratio_in(0, 4, 4);
            let scaled: Vec<Rat> = if norm.is_zero() {
                vec![Rat::zero(); dim]
            } else {
                dir.iter().map(|x| x * &cert.delta * &t / &norm).collect()
            };
            targets.push(b.iter().zip(&scaled).map(|(x, s)| x + s).collect::<Vec<Rat>>());
        }
        let p = match build_perturbation(&basis, &targets, &space) {
            Ok(p) => p,
            Err(e) => return CriterionResult::fail(name, e.to_string()),
        };
        let s_norm = op_norm(&p.s, &space);
        if s_norm > eps.clone() / rat(2) + tol.clone() {
            return CriterionResult::fail(
                name,
                format!("||S|| = {} above eps/2 at trial {trials}", rat_str(&s_norm)),
            );
        }
        match eps_iso_check(&p.t, &eps, &space) {
            Ok(r) if r.pass => {}
            Ok(_) => {
                return CriterionResult::fail(
                    name,
                    format!("I - S fails the eps-isomorphism check at trial {trials}"),
                )
            }
            Err(e) => return CriterionResult::fail(name, e.to_string()),
        }
        trials += 1;
    }

    // LP vs sampling oracles: exhaustive vertex enumeration must agree
    // within 1e-6 (it agrees exactly), and a dense uniform grid must sit
    // within its Lipschitz resolution of the LP value
    let budget = ratio(1, 1_000_000);
    let mut agreements = 0usize;
    while agreements < scale.grid_agreements {
        let dim = 1 + rng.below(4) as usize;
        let kind = if rng.chance(1, 2) { NormKind::L1 } else { NormKind::LInf };
        let space = NormedSpace::new(dim, kind);
        let k = (1 + rng.below(dim.min(3) as u64) as usize).min(3);
        let cand: Vec<Vec<Rat>> = (0..k)
            .map(|_| (0..dim).map(|_| rng.ratio_in(-6, 6, 2)).collect())
            .collect();
        let lp = match simplex_min_norm(&cand, &space) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let enumerated = match banach_mazur::enumerate_min_norm(&cand, &space) {
            Ok(v) => v,
            Err(e) => return CriterionResult::fail(name, e.to_string()),
        };
        let diff = if enumerated >= lp { &enumerated - &lp } else { &lp - &enumerated };
        if diff > budget {
            return CriterionResult::fail(
                name,
                format!(
                    "LP {} vs enumeration {} differ beyond 1e-6",
                    rat_str(&lp),
                    rat_str(&enumerated)
                ),
            );
        }
        let grid = match grid_min_norm(&cand, &space, 5) {
            Ok(v) => v,
            Err(e) => return CriterionResult::fail(name, e.to_string()),
        };
        let mesh_bound = banach_mazur::coefficient_lipschitz(&cand, &space) * ratio(1, 32);
        if grid < lp || &grid - &lp > mesh_bound {
            return CriterionResult::fail(
                name,
                format!("grid sample {} inconsistent with LP {}", rat_str(&grid), rat_str(&lp)),
            );
        }
        agreements += 1;
    }

    // isometry characterization at eps = 0
    for dim in 1..=4usize {
        for kind in [NormKind::L1, NormKind::LInf] {
            let space = NormedSpace::new(dim, kind);
            // a signed permutation is an isometry of both norms
            let mut rows = vec![vec![Rat::zero(); dim]; dim];
            let mut perm: Vec<usize> = (0..dim).collect();
            for i in (1..dim).rev() {
                let j = rng.below((i + 1) as u64) as usize;
                perm.swap(i, j);
            }
            for (i, &pi) in perm.iter().enumerate() {
                rows[i][pi] = if rng.chance(1, 2) { rat(1) } else { rat(-1) };
            }
            let iso = LinearMap { rows };
            let r = match eps_iso_check(&iso, &rat(0), &space) {
                Ok(r) => r,
                Err(e) => return CriterionResult::fail(name, e.to_string()),
            };
            if !r.pass {
                return CriterionResult::fail(name, "isometry rejected at eps = 0".into());
            }
            let n1 = op_norm(&iso, &space);
            let inv = iso.inverse().expect("isometries invert");
            let n2 = op_norm(&inv, &space);
            let lo = rat(1) - tol.clone();
            let hi = rat(1) + tol.clone();
            if !(lo <= n1 && n1 <= hi && lo <= n2 && n2 <= hi) {
                return CriterionResult::fail(name, "0-isomorphism is not an isometry".into());
            }
            // a strict scaling must fail at eps = 0
            let scaled = LinearMap {
                rows: (0..dim)
                    .map(|i| {
                        (0..dim)
                            .map(|j| if i == j { ratio(1001, 1000) } else { Rat::zero() })
                            .collect()
                    })
                    .collect(),
            };
            let r = eps_iso_check(&scaled, &rat(0), &space).expect("regular");
            if r.pass {
                return CriterionResult::fail(name, "non-isometry accepted at eps = 0".into());
            }
        }
    }
    CriterionResult::ok(
        name,
        format!("{trials} certified trials; {agreements} grid agreements; isometry characterization holds"),
    )
}

// ---------------------------------------------------------------------------

/// Runs every criterion at the given scale.
pub fn run_all(scale: &Scale) -> Vec<CriterionResult> {
    let corpus = build_corpus(scale);
    vec![
        bound_soundness(&corpus),
        constancy_soundness(&corpus),
        modulus_soundness(&corpus, scale),
        window_sandwich(&corpus, scale),
        prenex_equivalence(&corpus),
        emboundment(&corpus),
        measure_algebra_theories(scale),
        graph_transform(scale),
        principal_los(&corpus),
        banach_mazur_trials(scale),
    ]
}
