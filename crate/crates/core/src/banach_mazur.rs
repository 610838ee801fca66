//! ε-isomorphisms between finite-dimensional normed spaces and the
//! perturbation-map construction: operator norms in closed form, minimum
//! norms over the coefficient sphere, dual functionals by norm-minimizing
//! extension, the perturbation `S` with `I - S`, and the certified
//! perturbation radius `δ = s·ε/(2n)`.
//!
//! Norms are restricted to `ℓ1` and `ℓ∞`, which keeps every optimization
//! an exact rational linear program; `e^{±ε}` enters only through directed
//! rational bounds, so certifications err on the safe side.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::{rat, ratio, Rat};
use crate::sexp::{self, Sexp};
use crate::simplex::{Builder, LpOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L1,
    LInf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormedSpace {
    pub dim: usize,
    pub kind: NormKind,
}

impl NormedSpace {
    pub fn new(dim: usize, kind: NormKind) -> Self {
        assert!(dim >= 1);
        NormedSpace { dim, kind }
    }

    /// Parses `l1:3` / `linf:2`.
    pub fn parse(text: &str) -> Result<Self, BanachMazurError> {
        let (kind, dim) = text
            .split_once(':')
            .ok_or_else(|| BanachMazurError::Parse(format!("expected KIND:DIM, got {text:?}")))?;
        let kind = match kind {
            "l1" => NormKind::L1,
            "linf" | "loo" => NormKind::LInf,
            other => {
                return Err(BanachMazurError::Parse(format!("unsupported norm kind {other:?}")))
            }
        };
        let dim: usize = dim
            .parse()
            .map_err(|_| BanachMazurError::Parse(format!("bad dimension in {text:?}")))?;
        if dim == 0 {
            return Err(BanachMazurError::Parse("dimension must be >= 1".into()));
        }
        Ok(NormedSpace { dim, kind })
    }
}

#[derive(Debug, Error)]
pub enum BanachMazurError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("vectors must be linearly independent")]
    Dependent,
    #[error("at most {0} basis vectors are supported")]
    TooManyVectors(usize),
    #[error("dimension mismatch")]
    DimensionMismatch,
    #[error("matrix is singular")]
    Singular,
    #[error("epsilon must lie in (0, 1/2], got {0}")]
    EpsilonOutOfRange(String),
    #[error("internal solver error: {0}")]
    Solver(String),
}

pub const MAX_BASIS: usize = 6;

/// The fixed numerical tolerance reported alongside every certification.
pub fn tolerance() -> Rat {
    ratio(1, 1_000_000_000)
}

pub fn vec_norm(v: &[Rat], kind: NormKind) -> Rat {
    match kind {
        NormKind::L1 => v.iter().map(|x| x.abs()).fold(Rat::zero(), |a, b| a + b),
        NormKind::LInf => v
            .iter()
            .map(|x| x.abs())
            .fold(Rat::zero(), |a, b| if a >= b { a } else { b }),
    }
}

// ---------------------------------------------------------------------------
// matrices

/// A square rational matrix acting on column vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearMap {
    pub rows: Vec<Vec<Rat>>,
}

impl LinearMap {
    pub fn identity(n: usize) -> Self {
        let mut rows = vec![vec![Rat::zero(); n]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = Rat::one();
        }
        LinearMap { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, v: &[Rat]) -> Vec<Rat> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, x)| a * x).fold(Rat::zero(), |s, t| s + t))
            .collect()
    }

    pub fn sub(&self, other: &LinearMap) -> LinearMap {
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(r, s)| r.iter().zip(s).map(|(a, b)| a - b).collect())
            .collect();
        LinearMap { rows }
    }

    /// Exact inverse by Gauss-Jordan elimination; `None` when singular.
    pub fn inverse(&self) -> Option<LinearMap> {
        let n = self.dim();
        let mut a: Vec<Vec<Rat>> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| if i == j { Rat::one() } else { Rat::zero() }));
                r
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
            a.swap(col, pivot);
            let p = a[col][col].clone();
            for v in a[col].iter_mut() {
                *v = &*v / &p;
            }
            for r in 0..n {
                if r == col || a[r][col].is_zero() {
                    continue;
                }
                let f = a[r][col].clone();
                for c in 0..2 * n {
                    let delta = &f * &a[col][c];
                    a[r][c] = &a[r][c] - delta;
                }
            }
        }
        let rows = a.into_iter().map(|row| row[n..].to_vec()).collect();
        Some(LinearMap { rows })
    }

    pub fn to_sexp(&self) -> Sexp {
        let mut items = vec![Sexp::atom("matrix")];
        for row in &self.rows {
            let mut r = vec![Sexp::atom("row")];
            r.extend(row.iter().map(|x| Sexp::atom(crate::rational::rat_str(x))));
            items.push(Sexp::list(r));
        }
        Sexp::list(items)
    }

    pub fn parse(text: &str) -> Result<Self, BanachMazurError> {
        let e = sexp::parse_one(text).map_err(|e| BanachMazurError::Parse(e.to_string()))?;
        let items = e
            .as_list()
            .filter(|items| e.head() == Some("matrix") && items.len() >= 2)
            .ok_or_else(|| BanachMazurError::Parse("expected (matrix (row ...) ...)".into()))?;
        let mut rows = Vec::new();
        for row in &items[1..] {
            let cells = row
                .as_list()
                .filter(|_| row.head() == Some("row"))
                .ok_or_else(|| BanachMazurError::Parse("expected (row q ...)".into()))?;
            let mut r = Vec::new();
            for cell in &cells[1..] {
                let a = cell
                    .as_atom()
                    .ok_or_else(|| BanachMazurError::Parse("matrix entries are rationals".into()))?;
                r.push(crate::rational::parse_rat(a).map_err(BanachMazurError::Parse)?);
            }
            rows.push(r);
        }
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(BanachMazurError::Parse("matrix must be square".into()));
        }
        Ok(LinearMap { rows })
    }
}

/// Parses a list of `(vec q ...)` forms into vectors.
pub fn parse_vectors(text: &str) -> Result<Vec<Vec<Rat>>, BanachMazurError> {
    let forms = sexp::parse_many(text).map_err(|e| BanachMazurError::Parse(e.to_string()))?;
    let mut out = Vec::new();
    for form in forms {
        let items = form
            .as_list()
            .filter(|_| form.head() == Some("vec"))
            .ok_or_else(|| BanachMazurError::Parse("expected (vec q ...) forms".into()))?;
        let mut v = Vec::new();
        for cell in &items[1..] {
            let a = cell
                .as_atom()
                .ok_or_else(|| BanachMazurError::Parse("vector entries are rationals".into()))?;
            v.push(crate::rational::parse_rat(a).map_err(BanachMazurError::Parse)?);
        }
        out.push(v);
    }
    Ok(out)
}

/// Exact operator norm: maximum absolute column sum for `ℓ1`, maximum
/// absolute row sum for `ℓ∞`.
pub fn op_norm(a: &LinearMap, space: &NormedSpace) -> Rat {
    let n = a.dim();
    match space.kind {
        NormKind::L1 => (0..n)
            .map(|c| {
                (0..n)
                    .map(|r| a.rows[r][c].abs())
                    .fold(Rat::zero(), |s, t| s + t)
            })
            .fold(Rat::zero(), |best, v| if v > best { v } else { best }),
        NormKind::LInf => a
            .rows
            .iter()
            .map(|row| row.iter().map(|x| x.abs()).fold(Rat::zero(), |s, t| s + t))
            .fold(Rat::zero(), |best, v| if v > best { v } else { best }),
    }
}

// ---------------------------------------------------------------------------
// directed rational bounds on e^x

/// Directed rational bounds `lo ≤ e^x ≤ hi` for `x ≥ 0`, tight to roughly
/// `2^-70`. Arguments above 1 are halved and the bounds squared back.
pub fn exp_bounds(x: &Rat) -> (Rat, Rat) {
    assert!(!x.is_negative(), "exp_bounds takes x >= 0");
    if x.is_zero() {
        return (Rat::one(), Rat::one());
    }
    let mut halvings = 0u32;
    let mut y = x.clone();
    while y > Rat::one() {
        y = y / rat(2);
        halvings += 1;
    }
    // Taylor with explicit geometric remainder bound: for 0 < y <= 1 and
    // N >= 2, the tail after N terms is at most 2 y^{N+1}/(N+1)!.
    const N: u32 = 24;
    let mut term = Rat::one();
    let mut sum = Rat::one();
    for i in 1..=N {
        term = term * &y / rat(i as i64);
        sum = sum + &term;
    }
    let tail = &term * &y / rat((N + 1) as i64) * rat(2);
    let mut lo = sum.clone();
    let mut hi = sum + tail;
    for _ in 0..halvings {
        lo = &lo * &lo;
        hi = &hi * &hi;
    }
    (lo, hi)
}

// ---------------------------------------------------------------------------
// ε-isomorphism check

#[derive(Clone, Debug)]
pub struct IsoCheck {
    pub pass: bool,
    /// `e_lo(ε) - ‖f‖`; nonnegative (up to tolerance) when passing.
    pub forward_margin: Rat,
    /// `e_lo(ε) - ‖f⁻¹‖`.
    pub inverse_margin: Rat,
    /// The rational lower bound standing in for `e^ε`.
    pub bound: Rat,
    pub tolerance: Rat,
}

/// `f` is an ε-isomorphism iff `‖f‖ ≤ e^ε` and `‖f⁻¹‖ ≤ e^ε`; the
/// pointwise two-sided definition is equivalent because
/// `sup_{‖v‖=1} ‖fv‖ = ‖f‖` and `inf_{‖v‖=1} ‖fv‖ = 1/‖f⁻¹‖`.
/// The comparison is against the rational lower bound of `e^ε` plus the
/// fixed tolerance, so passes are safe.
pub fn eps_iso_check(
    f: &LinearMap,
    eps: &Rat,
    space: &NormedSpace,
) -> Result<IsoCheck, BanachMazurError> {
    if eps.is_negative() {
        return Err(BanachMazurError::EpsilonOutOfRange(crate::rational::rat_str(eps)));
    }
    if f.dim() != space.dim {
        return Err(BanachMazurError::DimensionMismatch);
    }
    let inv = f.inverse().ok_or(BanachMazurError::Singular)?;
    let (bound, _) = exp_bounds(eps);
    let tol = tolerance();
    let forward_margin = &bound - op_norm(f, space);
    let inverse_margin = &bound - op_norm(&inv, space);
    let pass = forward_margin >= -tol.clone() && inverse_margin >= -tol.clone();
    Ok(IsoCheck { pass, forward_margin, inverse_margin, bound, tolerance: tol })
}

// ---------------------------------------------------------------------------
// minimum norm over the coefficient sphere

fn rank(vectors: &[Vec<Rat>]) -> usize {
    let mut m: Vec<Vec<Rat>> = vectors.to_vec();
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let piv = m[r][c].clone();
        for i in 0..rows {
            if i == r || m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] / &piv;
            for j in 0..cols {
                let delta = &f * &m[r][j];
                m[i][j] = &m[i][j] - delta;
            }
        }
        r += 1;
    }
    r
}

fn check_basis(vectors: &[Vec<Rat>], space: &NormedSpace) -> Result<(), BanachMazurError> {
    if vectors.len() > MAX_BASIS {
        return Err(BanachMazurError::TooManyVectors(MAX_BASIS));
    }
    if vectors.is_empty() || vectors.iter().any(|v| v.len() != space.dim) {
        return Err(BanachMazurError::DimensionMismatch);
    }
    if rank(vectors) < vectors.len() {
        return Err(BanachMazurError::Dependent);
    }
    Ok(())
}

/// Minimum of `‖Σ λ_i b_i‖` over the `ℓ1`-sphere `Σ|λ_i| = 1`, computed by
/// enumerating sign orthants (half of them, by symmetry) and solving one
/// small exact linear program per orthant.
pub fn simplex_min_norm(
    vectors: &[Vec<Rat>],
    space: &NormedSpace,
) -> Result<Rat, BanachMazurError> {
    check_basis(vectors, space)?;
    let k = vectors.len();
    let dim = space.dim;
    let mut best: Option<Rat> = None;
    for mask in 0..(1u32 << (k - 1)) {
        let signs: Vec<i64> =
            (0..k).map(|i| if i > 0 && (mask >> (i - 1)) & 1 == 1 { -1 } else { 1 }).collect();
        let signed: Vec<Vec<Rat>> = vectors
            .iter()
            .zip(&signs)
            .map(|(v, &s)| v.iter().map(|x| x * rat(s)).collect())
            .collect();

        // variables: mu_0..mu_{k-1}, then norm variables
        let mut lp = Builder::new(k);
        lp.equal(&(0..k).map(|i| (i, Rat::one())).collect::<Vec<_>>(), Rat::one());
        match space.kind {
            NormKind::LInf => {
                let t = lp.fresh_var();
                for j in 0..dim {
                    let mut up: Vec<(usize, Rat)> =
                        (0..k).map(|i| (i, signed[i][j].clone())).collect();
                    up.push((t, rat(-1)));
                    lp.less_eq(&up, Rat::zero());
                    let mut down: Vec<(usize, Rat)> =
                        (0..k).map(|i| (i, -signed[i][j].clone())).collect();
                    down.push((t, rat(-1)));
                    lp.less_eq(&down, Rat::zero());
                }
                lp.minimize(&[(t, Rat::one())]);
            }
            NormKind::L1 => {
                let ws: Vec<usize> = (0..dim).map(|_| lp.fresh_var()).collect();
                for j in 0..dim {
                    let mut up: Vec<(usize, Rat)> =
                        (0..k).map(|i| (i, signed[i][j].clone())).collect();
                    up.push((ws[j], rat(-1)));
                    lp.less_eq(&up, Rat::zero());
                    let mut down: Vec<(usize, Rat)> =
                        (0..k).map(|i| (i, -signed[i][j].clone())).collect();
                    down.push((ws[j], rat(-1)));
                    lp.less_eq(&down, Rat::zero());
                }
                lp.minimize(&ws.iter().map(|&w| (w, Rat::one())).collect::<Vec<_>>());
            }
        }
        match lp.solve().map_err(|e| BanachMazurError::Solver(e.to_string()))? {
            LpOutcome::Optimal { value, .. } => {
                best = Some(match best {
                    None => value,
                    Some(b) if value < b => value,
                    Some(b) => b,
                });
            }
            other => {
                return Err(BanachMazurError::Solver(format!(
                    "orthant program was {other:?}"
                )))
            }
        }
    }
    Ok(best.expect("at least one orthant"))
}

fn norm_at(mu: &[Rat], signed: &[Vec<Rat>], space: &NormedSpace) -> Rat {
    let mut point = vec![Rat::zero(); space.dim];
    for (m, v) in mu.iter().zip(signed) {
        for (p, x) in point.iter_mut().zip(v) {
            *p = &*p + &(m * x);
        }
    }
    vec_norm(&point, space.kind)
}

fn orthant_signs(k: usize, mask: u32) -> Vec<i64> {
    (0..k).map(|i| if i > 0 && (mask >> (i - 1)) & 1 == 1 { -1 } else { 1 }).collect()
}

fn signed_vectors(vectors: &[Vec<Rat>], signs: &[i64]) -> Vec<Vec<Rat>> {
    vectors
        .iter()
        .zip(signs)
        .map(|(v, &s)| v.iter().map(|x| x * rat(s)).collect())
        .collect()
}

/// Minimum of the same objective over a dense uniform grid on the
/// coefficient sphere, with step `2^-mesh_pow` per orthant simplex. The
/// result is an upper value; it sits within `L · 2^-mesh_pow` of the true
/// minimum, `L` being the largest vector norm.
pub fn grid_min_norm(
    vectors: &[Vec<Rat>],
    space: &NormedSpace,
    mesh_pow: u32,
) -> Result<Rat, BanachMazurError> {
    check_basis(vectors, space)?;
    let k = vectors.len();
    let steps = 1u64 << mesh_pow;
    let mut best: Option<Rat> = None;
    for mask in 0..(1u32 << (k - 1)) {
        let signed = signed_vectors(vectors, &orthant_signs(k, mask));
        // compositions of `steps` into k parts
        let mut stack: Vec<(Vec<u64>, u64)> = vec![(Vec::new(), steps)];
        while let Some((prefix, left)) = stack.pop() {
            if prefix.len() == k - 1 {
                let mut mu: Vec<Rat> =
                    prefix.iter().map(|&c| ratio(c as i64, steps as i64)).collect();
                mu.push(ratio(left as i64, steps as i64));
                let v = norm_at(&mu, &signed, space);
                best = Some(match best.take() {
                    None => v,
                    Some(b) if v < b => v,
                    Some(b) => b,
                });
            } else {
                for c in 0..=left {
                    let mut p = prefix.clone();
                    p.push(c);
                    stack.push((p, left - c));
                }
            }
        }
    }
    Ok(best.expect("at least one grid point"))
}

/// Lipschitz constant of the coefficient-to-norm map, the resolution
/// factor of [`grid_min_norm`].
pub fn coefficient_lipschitz(vectors: &[Vec<Rat>], space: &NormedSpace) -> Rat {
    vectors
        .iter()
        .map(|v| vec_norm(v, space.kind))
        .fold(Rat::zero(), |a, b| if a >= b { a } else { b })
}

/// The same minimum by exhaustive vertex enumeration of the epigraph
/// polytope, one orthant at a time: the target norm is the maximum of
/// finitely many linear functionals, the optimum is attained at a basic
/// feasible point, and every candidate active set is solved exactly. A
/// brute-force oracle for [`simplex_min_norm`], independent of the
/// simplex pivoting path. Supports up to 4 vectors.
pub fn enumerate_min_norm(
    vectors: &[Vec<Rat>],
    space: &NormedSpace,
) -> Result<Rat, BanachMazurError> {
    check_basis(vectors, space)?;
    let k = vectors.len();
    if k > 4 {
        return Err(BanachMazurError::TooManyVectors(4));
    }
    let dim = space.dim;
    // directions whose maximum realizes the norm
    let dirs: Vec<Vec<Rat>> = match space.kind {
        NormKind::LInf => {
            let mut d = Vec::new();
            for j in 0..dim {
                for s in [1i64, -1] {
                    let mut v = vec![Rat::zero(); dim];
                    v[j] = rat(s);
                    d.push(v);
                }
            }
            d
        }
        NormKind::L1 => {
            let mut d = Vec::new();
            for mask in 0..(1u32 << dim) {
                d.push(
                    (0..dim)
                        .map(|j| if mask >> j & 1 == 1 { rat(-1) } else { rat(1) })
                        .collect(),
                );
            }
            d
        }
    };

    let mut best: Option<Rat> = None;
    for mask in 0..(1u32 << (k - 1)) {
        let signed = signed_vectors(vectors, &orthant_signs(k, mask));
        // variables (mu_0..mu_{k-1}, t); rows: the always-active equality
        // plus a choice of k active constraints among "d-row" (d·Σμv = t)
        // and "mu_i = 0"
        let vars = k + 1;
        let mut rows: Vec<(Vec<Rat>, Rat)> = Vec::new();
        for d in &dirs {
            let mut row = Vec::with_capacity(vars);
            for v in &signed {
                row.push(
                    d.iter().zip(v).map(|(a, b)| a * b).fold(Rat::zero(), |s, t| s + t),
                );
            }
            row.push(rat(-1));
            rows.push((row, Rat::zero()));
        }
        for i in 0..k {
            let mut row = vec![Rat::zero(); vars];
            row[i] = Rat::one();
            rows.push((row, Rat::zero()));
        }
        let feasible = |z: &[Rat]| -> bool {
            let t = &z[k];
            if z[..k].iter().any(|m| m < &Rat::zero()) {
                return false;
            }
            for (row, _) in &rows[..dirs.len()] {
                let lhs: Rat = row[..k]
                    .iter()
                    .zip(&z[..k])
                    .map(|(a, b)| a * b)
                    .fold(Rat::zero(), |s, v| s + v);
                if lhs > *t {
                    return false;
                }
            }
            true
        };

        // choose k active rows; the sphere equality is always included
        for choice in combinations(rows.len(), k) {
            let mut a: Vec<Vec<Rat>> = Vec::with_capacity(vars);
            let mut b: Vec<Rat> = Vec::with_capacity(vars);
            let mut eq = vec![Rat::one(); k];
            eq.push(Rat::zero());
            a.push(eq);
            b.push(Rat::one());
            for &c in &choice {
                a.push(rows[c].0.clone());
                b.push(rows[c].1.clone());
            }
            if let Some(z) = solve_linear(&mut a, &mut b) {
                if feasible(&z) {
                    let t = z[k].clone();
                    best = Some(match best.take() {
                        None => t,
                        Some(bst) if t < bst => t,
                        Some(bst) => bst,
                    });
                }
            }
        }
    }
    best.ok_or_else(|| BanachMazurError::Solver("no feasible vertex found".into()))
}

fn combinations(total: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn go(start: usize, total: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..total {
            current.push(i);
            go(i + 1, total, k, current, out);
            current.pop();
        }
    }
    go(0, total, k, &mut current, &mut out);
    out
}

fn solve_linear(a: &mut [Vec<Rat>], b: &mut [Rat]) -> Option<Vec<Rat>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col].clone();
        for v in a[col].iter_mut() {
            *v = &*v / &p;
        }
        b[col] = &b[col] / &p;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in 0..n {
                let delta = &f * &a[col][c];
                a[r][c] = &a[r][c] - delta;
            }
            let delta = &f * &b[col];
            b[r] = &b[r] - delta;
        }
    }
    Some(b.to_vec())
}

// ---------------------------------------------------------------------------
// dual functionals and the perturbation map

/// Coordinate functionals on the span of the basis, extended to the whole
/// space with minimal dual norm (the dual of `ℓ1` is `ℓ∞` and vice versa,
/// so the extension is a linear program). The extension exists with dual
/// norm at most `1/s`.
pub fn dual_functionals(
    vectors: &[Vec<Rat>],
    space: &NormedSpace,
) -> Result<Vec<Vec<Rat>>, BanachMazurError> {
    check_basis(vectors, space)?;
    let k = vectors.len();
    let dim = space.dim;
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        // eta is free: eta = u - v with u, v >= 0
        let mut lp = Builder::new(2 * dim);
        for (j, bj) in vectors.iter().enumerate() {
            let mut terms = Vec::with_capacity(2 * dim);
            for c in 0..dim {
                terms.push((c, bj[c].clone()));
                terms.push((dim + c, -bj[c].clone()));
            }
            lp.equal(&terms, if i == j { Rat::one() } else { Rat::zero() });
        }
        match space.kind {
            // dual norm is ℓ∞: minimize t with |eta_c| <= t
            NormKind::L1 => {
                let t = lp.fresh_var();
                for c in 0..dim {
                    lp.less_eq(&[(c, rat(1)), (dim + c, rat(-1)), (t, rat(-1))], Rat::zero());
                    lp.less_eq(&[(c, rat(-1)), (dim + c, rat(1)), (t, rat(-1))], Rat::zero());
                }
                lp.minimize(&[(t, Rat::one())]);
            }
            // dual norm is ℓ1: minimize Σ (u_c + v_c)
            NormKind::LInf => {
                let obj: Vec<(usize, Rat)> =
                    (0..2 * dim).map(|c| (c, Rat::one())).collect();
                lp.minimize(&obj);
            }
        }
        match lp.solve().map_err(|e| BanachMazurError::Solver(e.to_string()))? {
            LpOutcome::Optimal { x, .. } => {
                let eta: Vec<Rat> = (0..dim).map(|c| &x[c] - &x[dim + c]).collect();
                out.push(eta);
            }
            other => {
                return Err(BanachMazurError::Solver(format!(
                    "extension program was {other:?}"
                )))
            }
        }
    }
    Ok(out)
}

/// Dual norm of a covector: the norm of the dual space.
pub fn dual_norm(eta: &[Rat], space: &NormedSpace) -> Rat {
    match space.kind {
        NormKind::L1 => vec_norm(eta, NormKind::LInf),
        NormKind::LInf => vec_norm(eta, NormKind::L1),
    }
}

#[derive(Clone, Debug)]
pub struct Perturbation {
    pub s: LinearMap,
    pub t: LinearMap,
}

/// Builds `S(x) = Σ_i η̃_i(x)(b_i - c_i)` and `T = I - S`; `S` maps each
/// `b_i` to `b_i - c_i` exactly, so `T b_i = c_i`.
pub fn build_perturbation(
    basis: &[Vec<Rat>],
    targets: &[Vec<Rat>],
    space: &NormedSpace,
) -> Result<Perturbation, BanachMazurError> {
    check_basis(basis, space)?;
    if targets.len() != basis.len() || targets.iter().any(|t| t.len() != space.dim) {
        return Err(BanachMazurError::DimensionMismatch);
    }
    let etas = dual_functionals(basis, space)?;
    let dim = space.dim;
    let mut rows = vec![vec![Rat::zero(); dim]; dim];
    for (i, eta) in etas.iter().enumerate() {
        for r in 0..dim {
            let diff = &basis[i][r] - &targets[i][r];
            for c in 0..dim {
                let delta = &diff * &eta[c];
                rows[r][c] = &rows[r][c] + delta;
            }
        }
    }
    let s = LinearMap { rows };
    for (i, b) in basis.iter().enumerate() {
        let sb = s.apply(b);
        let expected: Vec<Rat> =
            basis[i].iter().zip(&targets[i]).map(|(x, y)| x - y).collect();
        if sb != expected {
            return Err(BanachMazurError::Solver(format!(
                "S(b_{i}) differs from b_{i} - c_{i}"
            )));
        }
    }
    let t = LinearMap::identity(dim).sub(&s);
    Ok(Perturbation { s, t })
}

#[derive(Clone, Debug)]
pub struct CertifiedDelta {
    pub delta: Rat,
    /// The minimum norm `s` over the coefficient sphere.
    pub min_norm: Rat,
}

/// The certified perturbation radius `δ = s·ε/(2n)`: whenever every
/// `‖b_i - c_i‖ ≤ δ`, the perturbation `I - S` of [`build_perturbation`]
/// is an ε-isomorphism. `ε` is restricted to `(0, 1/2]`, under which the
/// inequalities `1 + ε/2 ≤ e^ε` and `e^{-ε} ≤ 1 - ε/2` are verified
/// numerically on entry with directed bounds.
pub fn certify_delta(
    basis: &[Vec<Rat>],
    eps: &Rat,
    space: &NormedSpace,
) -> Result<CertifiedDelta, BanachMazurError> {
    if !(Rat::zero() < *eps && *eps <= ratio(1, 2)) {
        return Err(BanachMazurError::EpsilonOutOfRange(crate::rational::rat_str(eps)));
    }
    let (e_lo, e_hi) = exp_bounds(eps);
    let half = eps / rat(2);
    let one = Rat::one();
    if &one + &half > e_lo {
        return Err(BanachMazurError::Solver(
            "binding check failed: 1 + eps/2 > e^eps lower bound".into(),
        ));
    }
    // e^{-eps} <= 1/e_lo; also check with the upper bound for tightness
    if e_hi.recip() > &one - &half {
        return Err(BanachMazurError::Solver(
            "binding check failed: e^-eps upper bound above 1 - eps/2".into(),
        ));
    }
    if e_lo.recip() > &one - &half {
        return Err(BanachMazurError::Solver(
            "binding check failed: e^-eps bound above 1 - eps/2".into(),
        ));
    }
    let s = simplex_min_norm(basis, space)?;
    let n = rat(basis.len() as i64);
    let delta = &s * eps / (rat(2) * n);
    Ok(CertifiedDelta { delta, min_norm: s })
}
