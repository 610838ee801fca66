//! A small exact linear-programming solver over rationals.
//!
//! Two-phase primal simplex with Bland's rule, so termination is
//! guaranteed and every arithmetic step is exact. Problems are stated in
//! computational standard form: minimize `c·x` subject to `A x = b`,
//! `x ≥ 0`.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::Rat;

#[derive(Clone, Debug)]
pub struct StandardForm {
    /// Row-major constraint matrix.
    pub a: Vec<Vec<Rat>>,
    pub b: Vec<Rat>,
    pub c: Vec<Rat>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<Rat>, value: Rat },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("inconsistent dimensions: {0}")]
    Shape(String),
}

struct Tableau {
    /// `rows x cols` of coefficients, one extra column for `b`.
    t: Vec<Vec<Rat>>,
    basis: Vec<usize>,
    rows: usize,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col].clone();
        for v in self.t[row].iter_mut() {
            *v = &*v / &piv;
        }
        for r in 0..self.rows {
            if r == row || self.t[r][col].is_zero() {
                continue;
            }
            let factor = self.t[r][col].clone();
            for cidx in 0..=self.cols {
                let delta = &factor * &self.t[row][cidx];
                self.t[r][cidx] = &self.t[r][cidx] - delta;
            }
        }
        self.basis[row] = col;
    }

    /// Minimizes `obj · x` over the current feasible tableau; Bland's rule.
    /// Returns `None` when unbounded, otherwise the optimal objective row.
    fn optimize(&mut self, obj: &[Rat]) -> Option<Vec<Rat>> {
        // reduced-cost row: obj - obj_B . B^-1 A
        let mut z = vec![Rat::zero(); self.cols + 1];
        z[..self.cols].clone_from_slice(obj);
        for (r, &bi) in self.basis.iter().enumerate() {
            if z[bi].is_zero() {
                continue;
            }
            let factor = z[bi].clone();
            for cidx in 0..=self.cols {
                let delta = &factor * &self.t[r][cidx];
                z[cidx] = &z[cidx] - delta;
            }
        }
        loop {
            // entering: least index with negative reduced cost
            let Some(col) = (0..self.cols).find(|&cidx| z[cidx].is_negative()) else {
                return Some(z);
            };
            // leaving: least ratio, ties by least basis index
            let mut best: Option<(usize, Rat)> = None;
            for r in 0..self.rows {
                if !self.t[r][col].is_positive() {
                    continue;
                }
                let ratio = &self.t[r][self.cols] / &self.t[r][col];
                let better = match &best {
                    None => true,
                    Some((br, bratio)) => {
                        ratio < *bratio || (ratio == *bratio && self.basis[r] < self.basis[*br])
                    }
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            let Some((row, _)) = best else {
                return None; // unbounded
            };
            self.pivot(row, col);
            // update the reduced-cost row for the entering column
            let factor = z[col].clone();
            if !factor.is_zero() {
                for cidx in 0..=self.cols {
                    let delta = &factor * &self.t[row][cidx];
                    z[cidx] = &z[cidx] - delta;
                }
            }
        }
    }

    fn solution(&self, vars: usize) -> Vec<Rat> {
        let mut x = vec![Rat::zero(); vars];
        for (r, &bi) in self.basis.iter().enumerate() {
            if bi < vars {
                x[bi] = self.t[r][self.cols].clone();
            }
        }
        x
    }
}

/// Solves minimize `c·x` s.t. `A x = b`, `x ≥ 0`, exactly.
pub fn solve(lp: &StandardForm) -> Result<LpOutcome, LpError> {
    let m = lp.a.len();
    let n = lp.c.len();
    if lp.b.len() != m || lp.a.iter().any(|row| row.len() != n) {
        return Err(LpError::Shape(format!(
            "A is {}x{:?}, b has {}, c has {}",
            m,
            lp.a.first().map(|r| r.len()),
            lp.b.len(),
            n
        )));
    }

    // phase 1: artificial variables, after flipping rows to b >= 0
    let cols = n + m;
    let mut t = Vec::with_capacity(m);
    for r in 0..m {
        let flip = lp.b[r].is_negative();
        let mut row = Vec::with_capacity(cols + 1);
        for cidx in 0..n {
            row.push(if flip { -lp.a[r][cidx].clone() } else { lp.a[r][cidx].clone() });
        }
        for art in 0..m {
            row.push(if art == r { Rat::one() } else { Rat::zero() });
        }
        row.push(if flip { -lp.b[r].clone() } else { lp.b[r].clone() });
        t.push(row);
    }
    let mut tab = Tableau { t, basis: (n..n + m).collect(), rows: m, cols };

    let mut phase1_obj = vec![Rat::zero(); cols];
    for item in phase1_obj.iter_mut().skip(n) {
        *item = Rat::one();
    }
    let z = tab
        .optimize(&phase1_obj)
        .expect("phase 1 objective is bounded below by 0");
    // z holds reduced costs; the phase-1 optimum is -z[cols]
    let phase1_value = -z[tab.cols].clone();
    if !phase1_value.is_zero() {
        return Ok(LpOutcome::Infeasible);
    }

    // drive artificial variables out of the basis where possible
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(col) = (0..n).find(|&cidx| !tab.t[r][cidx].is_zero()) {
                tab.pivot(r, col);
            }
        }
    }

    // phase 2 works on a tableau with the artificial columns stripped;
    // rows still basic in an artificial have no real coefficients left and
    // a zero right-hand side, so they are redundant and dropped
    let keep: Vec<usize> = (0..m).filter(|&r| tab.basis[r] < n).collect();
    let t2: Vec<Vec<Rat>> = keep
        .iter()
        .map(|&r| {
            let mut row = tab.t[r][..n].to_vec();
            row.push(tab.t[r][cols].clone());
            row
        })
        .collect();
    let basis2 = keep.iter().map(|&r| tab.basis[r]).collect::<Vec<_>>();
    let mut tab2 = Tableau { rows: t2.len(), t: t2, basis: basis2, cols: n };
    match tab2.optimize(&lp.c) {
        None => Ok(LpOutcome::Unbounded),
        Some(_) => {
            let x = tab2.solution(n);
            let value = lp
                .c
                .iter()
                .zip(&x)
                .map(|(ci, xi)| ci * xi)
                .fold(Rat::zero(), |acc, v| acc + v);
            Ok(LpOutcome::Optimal { x, value })
        }
    }
}

/// Helper for building standard forms out of inequality systems: a problem
/// with variables `x ≥ 0`, rows `A x (≤ | =) b`, minimizing `c·x`. The
/// builder adds slack variables for inequality rows.
#[derive(Clone, Debug, Default)]
pub struct Builder {
    pub vars: usize,
    rows: Vec<(Vec<(usize, Rat)>, bool, Rat)>, // (sparse coeffs, is_equality, rhs)
    objective: Vec<(usize, Rat)>,
}

impl Builder {
    pub fn new(vars: usize) -> Self {
        Builder { vars, rows: Vec::new(), objective: Vec::new() }
    }

    pub fn fresh_var(&mut self) -> usize {
        self.vars += 1;
        self.vars - 1
    }

    pub fn minimize(&mut self, terms: &[(usize, Rat)]) {
        self.objective = terms.to_vec();
    }

    pub fn less_eq(&mut self, terms: &[(usize, Rat)], rhs: Rat) {
        self.rows.push((terms.to_vec(), false, rhs));
    }

    pub fn equal(&mut self, terms: &[(usize, Rat)], rhs: Rat) {
        self.rows.push((terms.to_vec(), true, rhs));
    }

    pub fn build(&self) -> StandardForm {
        let slacks = self.rows.iter().filter(|(_, eq, _)| !eq).count();
        let n = self.vars + slacks;
        let mut a = Vec::with_capacity(self.rows.len());
        let mut b = Vec::with_capacity(self.rows.len());
        let mut slack_at = self.vars;
        for (terms, is_eq, rhs) in &self.rows {
            let mut row = vec![Rat::zero(); n];
            for (i, coeff) in terms {
                row[*i] = &row[*i] + coeff;
            }
            if !is_eq {
                row[slack_at] = Rat::one();
                slack_at += 1;
            }
            a.push(row);
            b.push(rhs.clone());
        }
        let mut c = vec![Rat::zero(); n];
        for (i, coeff) in &self.objective {
            c[*i] = &c[*i] + coeff;
        }
        StandardForm { a, b, c }
    }

    pub fn solve(&self) -> Result<LpOutcome, LpError> {
        solve(&self.build())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};

    #[test]
    fn tiny_optimum() {
        // minimize x + y st x + 2y = 4, x,y >= 0  -> (0, 2), value 2
        let lp = StandardForm {
            a: vec![vec![rat(1), rat(2)]],
            b: vec![rat(4)],
            c: vec![rat(1), rat(1)],
        };
        let LpOutcome::Optimal { x, value } = solve(&lp).unwrap() else {
            panic!("expected optimal")
        };
        assert_eq!(value, rat(2));
        assert_eq!(x, vec![rat(0), rat(2)]);
    }

    #[test]
    fn infeasible_detected() {
        // x = -1, x >= 0
        let lp = StandardForm { a: vec![vec![rat(1)]], b: vec![rat(-1)], c: vec![rat(1)] };
        assert_eq!(solve(&lp).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        // minimize -x st x - y = 0
        let lp = StandardForm {
            a: vec![vec![rat(1), rat(-1)]],
            b: vec![rat(0)],
            c: vec![rat(-1), rat(0)],
        };
        assert_eq!(solve(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn builder_with_slacks() {
        // minimize -x - y st x <= 3, y <= 2, x + y <= 4  -> value -4
        let mut b = Builder::new(2);
        b.minimize(&[(0, rat(-1)), (1, rat(-1))]);
        b.less_eq(&[(0, rat(1))], rat(3));
        b.less_eq(&[(1, rat(1))], rat(2));
        b.less_eq(&[(0, rat(1)), (1, rat(1))], rat(4));
        let LpOutcome::Optimal { value, .. } = b.solve().unwrap() else {
            panic!("expected optimal")
        };
        assert_eq!(value, rat(-4));
    }

    #[test]
    fn exact_fractions() {
        // minimize x st 3x = 1 -> x = 1/3 exactly
        let lp = StandardForm { a: vec![vec![rat(3)]], b: vec![rat(1)], c: vec![rat(1)] };
        let LpOutcome::Optimal { x, .. } = solve(&lp).unwrap() else {
            panic!("expected optimal")
        };
        assert_eq!(x[0], ratio(1, 3));
    }

    #[test]
    fn degenerate_cycling_guarded() {
        // classic degenerate instance; Bland's rule must terminate
        let mut b = Builder::new(4);
        b.minimize(&[
            (0, ratio(-3, 4)),
            (1, rat(150)),
            (2, ratio(-1, 50)),
            (3, rat(6)),
        ]);
        b.less_eq(
            &[(0, ratio(1, 4)), (1, rat(-60)), (2, ratio(-1, 25)), (3, rat(9))],
            rat(0),
        );
        b.less_eq(
            &[(0, ratio(1, 2)), (1, rat(-90)), (2, ratio(-1, 50)), (3, rat(3))],
            rat(0),
        );
        b.less_eq(&[(2, rat(1))], rat(1));
        let LpOutcome::Optimal { value, .. } = b.solve().unwrap() else {
            panic!("expected optimal")
        };
        assert_eq!(value, ratio(-1, 20));
    }
}
