//! The emboundment transform: rescaling an unbounded gauged structure into
//! a bounded metric structure with a single added point at infinity, its
//! exact inverse, the naive pointwise rescaling, and the comparison checks
//! between the two metrics.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::modulus::ContinuityModulus;
use crate::rational::{rat_min, rat_str, Rat};
use crate::structure::{GaugedStructure, ValidationReport};
use crate::syntax::Signature;

#[derive(Debug, Error)]
pub enum EmboundError {
    #[error("emboundment requires a relational signature; apply the graph transform first")]
    NonRelational,
    #[error("input must validate, found: {0}")]
    InvalidInput(String),
    #[error("no point named {0:?}")]
    UnknownInfinity(String),
    #[error("cannot recover: {0}")]
    Recover(String),
}

/// A bounded structure `M ∪ {∞}` produced by emboundment. The gauge table
/// is kept and set identically to 0, so the result is an ordinary bounded
/// gauged structure consumable by every other module; the infinity point
/// is marked by index.
#[derive(Clone, Debug)]
pub struct EmboundedStructure {
    pub structure: GaugedStructure,
    pub infinity: usize,
}

impl EmboundedStructure {
    pub fn infinity_name(&self) -> &str {
        &self.structure.points[self.infinity]
    }
}

/// `θ(x) = x/(x+1)`, the bounding rescale.
pub fn theta(q: &Rat) -> Rat {
    q / (q + Rat::one())
}

/// `θ⁻¹(y) = y/(1-y)` for `0 ≤ y < 1`.
pub fn theta_inv(q: &Rat) -> Result<Rat, EmboundError> {
    if *q < Rat::zero() || *q >= Rat::one() {
        return Err(EmboundError::Recover(format!(
            "theta_inv needs 0 <= q < 1, got {}",
            rat_str(q)
        )));
    }
    Ok(q / (Rat::one() - q))
}

fn fresh_infinity_name(m: &GaugedStructure) -> String {
    let mut name = "oo".to_string();
    while m.points.contains(&name) {
        name.push('_');
    }
    name
}

/// Table-derived declared modulus `min(id, ε/L, 1/sup)`, with `L` the
/// observed Lipschitz constant of the values against the domain metric.
/// The emboundment construction guarantees suitable moduli exist but is
/// not quantitative about them.
fn table_modulus(dom_dist: &[Vec<Rat>], values: &[Rat]) -> ContinuityModulus {
    let mut lip = Rat::one();
    let mut sup = Rat::zero();
    for (i, vi) in values.iter().enumerate() {
        if *vi > sup {
            sup = vi.clone();
        }
        for (j, vj) in values.iter().enumerate() {
            let dx = &dom_dist[i][j];
            if dx.is_zero() {
                continue;
            }
            let dv = vi - vj;
            let dv = if dv < Rat::zero() { -dv } else { dv };
            let ratio = dv / dx;
            if ratio > lip {
                lip = ratio;
            }
        }
    }
    let mut parts = vec![
        ContinuityModulus::identity(),
        ContinuityModulus::scale(lip.recip(), ContinuityModulus::identity())
            .expect("positive Lipschitz bound"),
    ];
    if !sup.is_zero() {
        parts.push(ContinuityModulus::constant(sup.recip()).expect("positive reciprocal"));
    }
    ContinuityModulus::min_of(parts).expect("nonempty")
}

fn full_tuples(n: usize, arity: usize) -> Vec<Vec<usize>> {
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

fn max_metric_table(dist: &[Vec<Rat>], tuples: &[Vec<usize>]) -> Vec<Vec<Rat>> {
    let mut out = Vec::with_capacity(tuples.len());
    for a in tuples {
        let mut row = Vec::with_capacity(tuples.len());
        for b in tuples {
            let mut d = Rat::zero();
            for (&i, &j) in a.iter().zip(b.iter()) {
                if dist[i][j] > d {
                    d = dist[i][j].clone();
                }
            }
            row.push(d);
        }
        out.push(row);
    }
    out
}

/// The emboundment `M ↦ M^∞`: distances
/// `d(a,b) = θ(d^M(a,b)) / (1 + ν(a) ∧ ν(b))` and `d(a,∞) = 1/(1+ν(a))`;
/// every other predicate is rescaled as `θ(P(ā))/(1+ν(ā))` with the tuple
/// gauge, and vanishes when any argument is `∞`.
pub fn embound(m: &GaugedStructure) -> Result<EmboundedStructure, EmboundError> {
    if !m.signature.is_relational() {
        return Err(EmboundError::NonRelational);
    }
    let report = crate::structure::validate(m);
    if !report.pass() {
        return Err(EmboundError::InvalidInput(
            report.failures.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "),
        ));
    }
    let n = m.len();
    let inf = n;
    let mut points = m.points.clone();
    points.push(fresh_infinity_name(m));

    let one = Rat::one();
    let mut dist = vec![vec![Rat::zero(); n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let floor = rat_min(&m.gauge[i], &m.gauge[j]);
            dist[i][j] = theta(&m.dist[i][j]) / (&one + floor);
        }
        let to_inf = (&one + &m.gauge[i]).recip();
        dist[i][inf] = to_inf.clone();
        dist[inf][i] = to_inf;
    }

    let mut preds: BTreeMap<String, BTreeMap<Vec<usize>, Rat>> = BTreeMap::new();
    for p in &m.signature.preds {
        let mut table = BTreeMap::new();
        for t in full_tuples(n + 1, p.arity) {
            let value = if t.iter().any(|&i| i == inf) {
                Rat::zero()
            } else {
                let base = &m.preds[&p.name][&t];
                theta(base) / (&one + m.tuple_gauge(&t))
            };
            table.insert(t, value);
        }
        preds.insert(p.name.clone(), table);
    }

    let mut signature = Signature::new();
    {
        let pair_tuples = full_tuples(n + 1, 2);
        let values: Vec<Rat> =
            pair_tuples.iter().map(|t| dist[t[0]][t[1]].clone()).collect();
        let dom = max_metric_table(&dist, &pair_tuples);
        signature.dist_modulus = table_modulus(&dom, &values);
    }
    for p in &m.signature.preds {
        let tuples = full_tuples(n + 1, p.arity);
        let values: Vec<Rat> = tuples.iter().map(|t| preds[&p.name][t].clone()).collect();
        let dom = max_metric_table(&dist, &tuples);
        signature
            .add_pred(&p.name, p.arity, table_modulus(&dom, &values))
            .expect("names were fresh in the source signature");
    }

    let structure = GaugedStructure {
        signature: Arc::new(signature),
        points,
        dist,
        gauge: vec![Rat::zero(); n + 1],
        preds,
        funs: BTreeMap::new(),
    };
    Ok(EmboundedStructure { structure, infinity: inf })
}

/// Reconstructs the original structure from an embounded one:
/// `ν(a) = θ⁻¹(1 - d(a,∞))`, then distances and predicates invert through
/// `θ⁻¹` and the `1/(1+ν)` rescales. `recover ∘ embound` is the identity
/// on tables.
pub fn recover(
    n: &GaugedStructure,
    infinity: &str,
    original_sig: Option<&Signature>,
) -> Result<GaugedStructure, EmboundError> {
    let inf = n
        .point_index(infinity)
        .ok_or_else(|| EmboundError::UnknownInfinity(infinity.to_string()))?;
    let one = Rat::one();
    let keep: Vec<usize> = (0..n.len()).filter(|&i| i != inf).collect();
    let mut points = Vec::with_capacity(keep.len());
    let mut gauge = Vec::with_capacity(keep.len());
    for &i in &keep {
        let d_inf = &n.dist[i][inf];
        if d_inf.is_zero() {
            return Err(EmboundError::Recover(format!(
                "d({}, {infinity}) = 0; the gauge would be infinite",
                n.points[i]
            )));
        }
        points.push(n.points[i].clone());
        gauge.push(theta_inv(&(&one - d_inf))?);
    }
    let m = keep.len();
    let mut dist = vec![vec![Rat::zero(); m]; m];
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let floor = rat_min(&gauge[a], &gauge[b]);
            let scaled = &n.dist[keep[a]][keep[b]] * (&one + floor);
            dist[a][b] = theta_inv(&scaled)?;
        }
    }
    let mut preds: BTreeMap<String, BTreeMap<Vec<usize>, Rat>> = BTreeMap::new();
    for p in &n.signature.preds {
        let mut table = BTreeMap::new();
        for t in full_tuples(m, p.arity) {
            let orig: Vec<usize> = t.iter().map(|&i| keep[i]).collect();
            let mut g = Rat::zero();
            for &i in &t {
                if gauge[i] > g {
                    g = gauge[i].clone();
                }
            }
            let scaled = &n.preds[&p.name][&orig] * (&one + g);
            table.insert(t, theta_inv(&scaled)?);
        }
        preds.insert(p.name.clone(), table);
    }
    let signature = match original_sig {
        Some(s) => Arc::new(s.clone()),
        None => {
            let mut s = Signature::new();
            {
                let pair_tuples = full_tuples(m, 2);
                let values: Vec<Rat> =
                    pair_tuples.iter().map(|t| dist[t[0]][t[1]].clone()).collect();
                let dom = max_metric_table(&dist, &pair_tuples);
                s.dist_modulus = table_modulus(&dom, &values);
            }
            for p in &n.signature.preds {
                let tuples = full_tuples(m, p.arity);
                let values: Vec<Rat> =
                    tuples.iter().map(|t| preds[&p.name][t].clone()).collect();
                let dom = max_metric_table(&dist, &tuples);
                s.add_pred(&p.name, p.arity, table_modulus(&dom, &values)).expect("fresh");
            }
            Arc::new(s)
        }
    };
    Ok(GaugedStructure { signature, points, dist, gauge, preds, funs: BTreeMap::new() })
}

/// Comparison report between `d^M` and `d^{M^∞}`.
#[derive(Clone, Debug, Default)]
pub struct ComparisonReport {
    /// Pairs where `d^M < d^{M^∞}` (must be empty).
    pub metric_failures: Vec<(String, String)>,
    /// Sampled `(point, r, r')` ball-containment failures (must be empty).
    pub ball_failures: Vec<(String, String, String)>,
}

impl ComparisonReport {
    pub fn pass(&self) -> bool {
        self.metric_failures.is_empty() && self.ball_failures.is_empty()
    }
}

/// Asserts `d^M ≥ d^{M^∞}` on all pairs, and that for sampled `r < r'`
/// every point within `d^{M^∞}`-distance `θ(r'-r)/(1+r)` of the closed
/// gauge-ball of radius `r` has gauge below `r'`.
pub fn check_comparison(m: &GaugedStructure) -> Result<ComparisonReport, EmboundError> {
    let e = embound(m)?;
    let mut report = ComparisonReport::default();
    let n = m.len();
    for i in 0..n {
        for j in 0..n {
            if m.dist[i][j] < e.structure.dist[i][j] {
                report
                    .metric_failures
                    .push((m.points[i].clone(), m.points[j].clone()));
            }
        }
    }
    let one = Rat::one();
    let mut radii: Vec<Rat> = m.gauge.clone();
    radii.push(Rat::zero());
    radii.sort();
    radii.dedup();
    let bumps = [crate::rational::ratio(1, 2), Rat::one(), crate::rational::rat(2)];
    for r in &radii {
        for bump in &bumps {
            let rp = r + bump;
            let radius = theta(&(&rp - r)) / (&one + r);
            for i in 0..n {
                let near =
                    (0..n).any(|j| m.gauge[j] <= *r && e.structure.dist[i][j] < radius);
                if near && m.gauge[i] >= rp {
                    report.ball_failures.push((
                        m.points[i].clone(),
                        rat_str(r),
                        rat_str(&rp),
                    ));
                }
            }
        }
    }
    Ok(report)
}

/// The naive transform: every predicate table (including the distance) and
/// the gauge mapped through `θ`. Subadditivity of `θ` keeps the distance
/// a metric.
pub fn naive_theta_transform(m: &GaugedStructure) -> Result<GaugedStructure, EmboundError> {
    let report = crate::structure::validate(m);
    if !report.pass() {
        return Err(EmboundError::InvalidInput(
            report.failures.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "),
        ));
    }
    let n = m.len();
    let mut out = m.clone();
    for i in 0..n {
        out.gauge[i] = theta(&m.gauge[i]);
        for j in 0..n {
            out.dist[i][j] = theta(&m.dist[i][j]);
        }
    }
    for table in out.preds.values_mut() {
        for value in table.values_mut() {
            *value = theta(value);
        }
    }
    let mut sig = Signature::new();
    {
        let pair_tuples = full_tuples(n, 2);
        let values: Vec<Rat> =
            pair_tuples.iter().map(|t| out.dist[t[0]][t[1]].clone()).collect();
        let dom = max_metric_table(&out.dist, &pair_tuples);
        sig.dist_modulus = table_modulus(&dom, &values);
    }
    for p in &m.signature.preds {
        let tuples = full_tuples(n, p.arity);
        let values: Vec<Rat> = tuples.iter().map(|t| out.preds[&p.name][t].clone()).collect();
        let dom = max_metric_table(&out.dist, &tuples);
        sig.add_pred(&p.name, p.arity, table_modulus(&dom, &values)).expect("fresh");
    }
    for f in &m.signature.funs {
        let tuples = full_tuples(n, f.arity);
        let images: Vec<usize> = tuples.iter().map(|t| out.funs[&f.name][t]).collect();
        let dom = max_metric_table(&out.dist, &tuples);
        // image side of a function lives in the structure itself
        let mut lip = Rat::one();
        for (i, &pi) in images.iter().enumerate() {
            for (j, &pj) in images.iter().enumerate() {
                let dx = &dom[i][j];
                if dx.is_zero() {
                    continue;
                }
                let dv = &out.dist[pi][pj] / dx;
                if dv > lip {
                    lip = dv;
                }
            }
        }
        let mut parts = vec![
            ContinuityModulus::identity(),
            ContinuityModulus::scale(lip.recip(), ContinuityModulus::identity())
                .expect("positive"),
        ];
        let sup = images
            .iter()
            .map(|&i| out.gauge[i].clone())
            .fold(Rat::zero(), |a, b| if a >= b { a } else { b });
        if !sup.is_zero() {
            parts.push(ContinuityModulus::constant(sup.recip()).expect("positive"));
        }
        sig.add_fun(&f.name, f.arity, ContinuityModulus::min_of(parts).expect("nonempty"))
            .expect("fresh");
    }
    out.signature = Arc::new(sig);
    Ok(out)
}

/// Metric validation of an embounded structure, all triples including the
/// infinity point.
pub fn validate_embounded(e: &EmboundedStructure) -> ValidationReport {
    crate::structure::validate(&e.structure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};

    fn relational(
        points: usize,
        dists: &[(usize, usize, Rat)],
        gauges: Vec<Rat>,
    ) -> GaugedStructure {
        let names: Vec<String> = (0..points).map(|i| format!("p{i}")).collect();
        let mut dist = vec![vec![Rat::zero(); points]; points];
        for (a, b, q) in dists {
            dist[*a][*b] = q.clone();
            dist[*b][*a] = q.clone();
        }
        let mut m = GaugedStructure {
            signature: Arc::new(Signature::new()),
            points: names,
            dist,
            gauge: gauges,
            preds: BTreeMap::new(),
            funs: BTreeMap::new(),
        };
        // the default standard distance modulus is not sound for zero-gauge
        // points at positive distance; derive one from the table
        let mut sig = Signature::new();
        sig.dist_modulus = crate::modulus::derived_modulus(&crate::structure::predicate_table(
            &m,
            crate::syntax::DIST,
            2,
        ));
        m.signature = Arc::new(sig);
        m
    }

    #[test]
    fn theta_values() {
        assert_eq!(theta(&rat(0)), rat(0));
        assert_eq!(theta(&rat(1)), ratio(1, 2));
        assert_eq!(theta(&rat(3)), ratio(3, 4));
        assert_eq!(theta_inv(&ratio(1, 2)).unwrap(), rat(1));
        assert_eq!(theta_inv(&rat(0)).unwrap(), rat(0));
        assert_eq!(theta_inv(&ratio(3, 4)).unwrap(), rat(3));
        assert!(theta_inv(&rat(1)).is_err());
    }

    #[test]
    fn embound_one_point() {
        let m = relational(1, &[], vec![rat(0)]);
        let e = embound(&m).unwrap();
        assert_eq!(e.structure.len(), 2);
        assert_eq!(e.structure.dist[0][e.infinity], rat(1));
        assert!(validate_embounded(&e).pass());
    }

    #[test]
    fn embound_two_points_zero_gauge() {
        let m = relational(2, &[(0, 1, rat(1))], vec![rat(0), rat(0)]);
        let e = embound(&m).unwrap();
        // bounded input: distance is theta-rescaled, infinity at distance 1
        assert_eq!(e.structure.dist[0][1], ratio(1, 2));
        assert_eq!(e.structure.dist[0][e.infinity], rat(1));
        assert_eq!(e.structure.dist[1][e.infinity], rat(1));
        assert!(validate_embounded(&e).pass());
    }

    #[test]
    fn embound_rejects_functions() {
        let sig = Signature::new()
            .with_fun("f", 1, ContinuityModulus::identity())
            .unwrap();
        let mut m = relational(1, &[], vec![rat(0)]);
        m.signature = Arc::new(sig);
        m.funs.insert("f".into(), BTreeMap::from([(vec![0usize], 0usize)]));
        assert!(matches!(embound(&m), Err(EmboundError::NonRelational)));
    }

    #[test]
    fn recover_inverts_embound() {
        let m = relational(
            3,
            &[(0, 1, rat(2)), (0, 2, rat(3)), (1, 2, rat(1))],
            vec![rat(0), rat(2), rat(3)],
        );
        let e = embound(&m).unwrap();
        let name = e.infinity_name().to_string();
        let back = recover(&e.structure, &name, Some(&m.signature)).unwrap();
        assert_eq!(back.points, m.points);
        assert_eq!(back.dist, m.dist);
        assert_eq!(back.gauge, m.gauge);
        // gauge of 2 from infinity distance 1/3
        assert_eq!(theta_inv(&(rat(1) - ratio(1, 3))).unwrap(), rat(2));
    }

    #[test]
    fn infinity_distance_decreases_in_gauge() {
        let m = relational(
            3,
            &[(0, 1, rat(2)), (0, 2, rat(4)), (1, 2, rat(2))],
            vec![rat(0), rat(2), rat(4)],
        );
        let e = embound(&m).unwrap();
        let d0 = &e.structure.dist[0][e.infinity];
        let d1 = &e.structure.dist[1][e.infinity];
        let d2 = &e.structure.dist[2][e.infinity];
        assert!(d0 > d1 && d1 > d2);
    }

    #[test]
    fn comparison_lemma_holds() {
        let m = relational(2, &[(0, 1, rat(3))], vec![rat(0), rat(3)]);
        let report = check_comparison(&m).unwrap();
        assert!(report.pass());
    }

    #[test]
    fn theta_subadditive_on_grid() {
        // θ(x+y) ≤ θ(x) + θ(y) over x, y in {0, 1/4, ..., 10}
        for i in 0..=40i64 {
            for j in 0..=40i64 {
                let x = ratio(i, 4);
                let y = ratio(j, 4);
                assert!(theta(&(&x + &y)) <= theta(&x) + theta(&y));
            }
        }
    }

    #[test]
    fn naive_transform() {
        let m = relational(2, &[(0, 1, rat(1))], vec![rat(0), rat(1)]);
        let t = naive_theta_transform(&m).unwrap();
        assert_eq!(t.dist[0][1], ratio(1, 2));
        assert_eq!(t.gauge[1], ratio(1, 2));
        assert!(crate::structure::validate(&t).pass());
        // all-zero structure unchanged
        let z = relational(1, &[], vec![rat(0)]);
        let tz = naive_theta_transform(&z).unwrap();
        assert_eq!(tz.dist, z.dist);
        assert_eq!(tz.gauge, z.gauge);
    }
}
