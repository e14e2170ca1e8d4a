//! Small dense two-phase tableau simplex.
//!
//! Entering column by most negative reduced cost; leaving row by the
//! lexicographic minimum-ratio rule over the initial basis columns, which
//! rules out cycling on degenerate vertices. Rows are equilibrated up front,
//! and the tableau is periodically rebuilt from the original rows through a
//! fresh factorization of the basis, so rounding does not accumulate across
//! hundreds of pivots.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// `minimize c x` subject to the rows and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub constraints: Vec<(Vec<T>, Relation, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub objective: T,
    pub x: Vec<T>,
    pub pivots: usize,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    // standard-form rows as built, for reinversion
    original: Vec<Vec<T>>,
    // cost of the current phase, without the value entry
    phase_cost: Vec<T>,
    // reduced-cost row; last entry is minus the objective value
    cost: Vec<T>,
    basis: Vec<usize>,
    init_cols: Vec<usize>,
    width: usize,
    tol: T,
    pivots: usize,
    since_reinvert: usize,
}

/// Pivots between tableau rebuilds.
const REINVERT_EVERY: usize = 64;

impl<T: Scalar> Tableau<T> {
    fn rhs(&self, r: usize) -> T {
        self.rows[r][self.width]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let inv = T::one() / self.rows[pr][pc];
        for v in self.rows[pr].iter_mut() {
            *v = *v * inv;
        }
        self.rows[pr][pc] = T::one();
        let pivot_row = self.rows[pr].clone();
        for (r, row) in self.rows.iter_mut().enumerate() {
            if r == pr {
                continue;
            }
            let f = row[pc];
            if f != T::zero() {
                for (v, &p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v = *v - f * p;
                }
                row[pc] = T::zero();
            }
        }
        let f = self.cost[pc];
        if f != T::zero() {
            for (v, &p) in self.cost.iter_mut().zip(pivot_row.iter()) {
                *v = *v - f * p;
            }
            self.cost[pc] = T::zero();
        }
        self.basis[pr] = pc;
        self.pivots += 1;
        self.since_reinvert += 1;
    }

    /// Rebuild rows as `B^-1 [A | b]` and the cost row from `phase_cost`,
    /// by Gauss-Jordan with partial pivoting on the basis columns. Leaves the
    /// tableau untouched if the basis is numerically singular.
    fn reinvert(&mut self) {
        let m = self.rows.len();
        let cols = self.width + 1;
        let mut aug: Vec<Vec<T>> = (0..m)
            .map(|r| {
                let mut row: Vec<T> = self.basis.iter().map(|&b| self.original[r][b]).collect();
                row.extend_from_slice(&self.original[r]);
                row
            })
            .collect();
        for c in 0..m {
            let Some(p) = (c..m).max_by(|&a, &b| {
                aug[a][c]
                    .abs()
                    .partial_cmp(&aug[b][c].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            }) else {
                return;
            };
            if !(aug[p][c].abs() > T::epsilon()) {
                return;
            }
            aug.swap(c, p);
            let inv = T::one() / aug[c][c];
            for v in aug[c].iter_mut() {
                *v = *v * inv;
            }
            let pivot_row = aug[c].clone();
            for (r, row) in aug.iter_mut().enumerate() {
                if r == c {
                    continue;
                }
                let f = row[c];
                if f != T::zero() {
                    for (v, &p) in row.iter_mut().zip(&pivot_row) {
                        *v = *v - f * p;
                    }
                }
            }
        }
        // row c now expresses basis[c]
        for (r, row) in aug.into_iter().enumerate() {
            self.rows[r] = row[m..].to_vec();
            self.rows[r][self.basis[r]] = T::one();
        }
        let mut cost = vec![T::zero(); cols];
        cost[..self.width].copy_from_slice(&self.phase_cost);
        for r in 0..m {
            let cb = self.phase_cost[self.basis[r]];
            if cb != T::zero() {
                for (v, &a) in cost.iter_mut().zip(&self.rows[r]) {
                    *v = *v - cb * a;
                }
            }
        }
        for &b in &self.basis {
            cost[b] = T::zero();
        }
        self.cost = cost;
        self.since_reinvert = 0;
    }

    /// Lexicographic leaving row for entering column `pc`.
    fn leaving_row(&self, pc: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for r in 0..self.rows.len() {
            let a = self.rows[r][pc];
            if a <= self.tol {
                continue;
            }
            best = Some(match best {
                None => r,
                Some(b) => {
                    if self.lex_less(r, b, pc) {
                        r
                    } else {
                        b
                    }
                }
            });
        }
        best
    }

    fn lex_less(&self, r: usize, s: usize, pc: usize) -> bool {
        let ar = self.rows[r][pc];
        let as_ = self.rows[s][pc];
        let key = |row: usize, a: T, col: usize| self.rows[row][col] / a;
        let scale = T::one().max(self.rhs(r).abs()).max(self.rhs(s).abs());
        let (x, y) = (key(r, ar, self.width), key(s, as_, self.width));
        if (x - y).abs() > self.tol * scale {
            return x < y;
        }
        for &c in &self.init_cols {
            let (x, y) = (key(r, ar, c), key(s, as_, c));
            if (x - y).abs() > self.tol {
                return x < y;
            }
        }
        r < s
    }

    fn optimise(&mut self, allowed: &[bool], max_pivots: usize) -> Result<()> {
        self.reinvert();
        loop {
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert();
            }
            let mut enter = None;
            let mut most = -self.tol;
            for (c, (&ok, &rc)) in allowed.iter().zip(&self.cost).enumerate() {
                if ok && rc < most {
                    most = rc;
                    enter = Some(c);
                }
            }
            let Some(pc) = enter else {
                // only trust optimality on a freshly rebuilt tableau
                if self.since_reinvert == 0 {
                    return Ok(());
                }
                self.reinvert();
                if self.since_reinvert == 0 {
                    continue;
                }
                return Ok(());
            };
            let Some(pr) = self.leaving_row(pc) else {
                if self.since_reinvert > 0 {
                    self.reinvert();
                    if self.since_reinvert == 0 {
                        continue;
                    }
                }
                return Err(Error::Internal("linear program is unbounded".into()));
            };
            self.pivot(pr, pc);
            if self.pivots > max_pivots {
                return Err(Error::Internal(format!("simplex exceeded {max_pivots} pivots")));
            }
        }
    }
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(objective: Vec<T>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn push(&mut self, coeffs: Vec<T>, rel: Relation, rhs: T) {
        self.constraints.push((coeffs, rel, rhs));
    }

    pub fn solve(&self) -> Result<Solution<T>> {
        let nvars = self.objective.len();
        let m = self.constraints.len();
        // normalise to nonnegative right-hand sides
        let rows: Vec<(Vec<T>, Relation, T)> = self
            .constraints
            .iter()
            .map(|(a, rel, b)| {
                assert_eq!(a.len(), nvars, "constraint width mismatch");
                let scale = a.iter().fold(T::zero(), |s, v| s.max(v.abs()));
                let (a, b) = if scale > T::zero() {
                    (a.iter().map(|&v| v / scale).collect::<Vec<T>>(), *b / scale)
                } else {
                    (a.clone(), *b)
                };
                let (a, b) = (&a, &b);
                if *b < T::zero() {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|&v| -v).collect(), flipped, -*b)
                } else {
                    (a.clone(), *rel, *b)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let width = nvars + n_slack + n_art;
        let mut tab = Tableau {
            rows: Vec::with_capacity(m),
            original: Vec::new(),
            phase_cost: vec![T::zero(); width],
            cost: vec![T::zero(); width + 1],
            basis: vec![0; m],
            init_cols: vec![0; m],
            width,
            tol: T::epsilon().sqrt() * T::lit(1e-3),
            pivots: 0,
            since_reinvert: 0,
        };
        let mut slack = nvars;
        let mut art = nvars + n_slack;
        let mut is_art = vec![false; width];
        for (r, (a, rel, b)) in rows.iter().enumerate() {
            let mut row = vec![T::zero(); width + 1];
            row[..nvars].copy_from_slice(a);
            row[width] = *b;
            match rel {
                Relation::Le => {
                    row[slack] = T::one();
                    tab.basis[r] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -T::one();
                    slack += 1;
                    row[art] = T::one();
                    is_art[art] = true;
                    tab.basis[r] = art;
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = T::one();
                    is_art[art] = true;
                    tab.basis[r] = art;
                    art += 1;
                }
            }
            tab.init_cols[r] = tab.basis[r];
            tab.rows.push(row);
        }
        tab.original = tab.rows.clone();
        let max_pivots = 50 * (width + m) + 1000;

        if n_art > 0 {
            // phase one: minimise the sum of artificials
            for (c, a) in tab.phase_cost.iter_mut().zip(&is_art) {
                if *a {
                    *c = T::one();
                }
            }
            for (r, row) in tab.rows.iter().enumerate() {
                if is_art[tab.basis[r]] {
                    for (c, v) in tab.cost.iter_mut().enumerate() {
                        if c < width && is_art[c] {
                            continue;
                        }
                        *v = *v - row[c];
                    }
                }
            }
            let allowed = vec![true; width];
            tab.optimise(&allowed, max_pivots)?;
            let infeas = -tab.cost[width];
            let scale = rows.iter().fold(T::one(), |s, r| s.max(r.2.abs()));
            if infeas > tab.tol * scale {
                return Err(Error::Internal(format!(
                    "linear program is infeasible (phase-one residual {infeas})"
                )));
            }
            // drive zero-level artificials out of the basis where possible
            for r in 0..m {
                if is_art[tab.basis[r]] {
                    if let Some(c) = (0..width).find(|&c| !is_art[c] && tab.rows[r][c].abs() > tab.tol) {
                        tab.pivot(r, c);
                    }
                }
            }
        }

        // phase two
        let mut cost = vec![T::zero(); width + 1];
        cost[..nvars].copy_from_slice(&self.objective);
        for r in 0..m {
            let cb = cost[tab.basis[r]];
            if cb != T::zero() {
                for (v, &a) in cost.iter_mut().zip(&tab.rows[r]) {
                    *v = *v - cb * a;
                }
            }
        }
        for r in 0..m {
            cost[tab.basis[r]] = T::zero();
        }
        tab.cost = cost;
        tab.phase_cost = self.objective.clone();
        tab.phase_cost.resize(width, T::zero());
        let allowed: Vec<bool> = is_art.iter().map(|a| !a).collect();
        tab.optimise(&allowed, max_pivots)?;

        let mut x = vec![T::zero(); nvars];
        for r in 0..m {
            if tab.basis[r] < nvars {
                x[tab.basis[r]] = tab.rhs(r);
            }
        }
        let objective = self
            .objective
            .iter()
            .zip(&x)
            .fold(T::zero(), |s, (&c, &v)| s + c * v);
        Ok(Solution {
            objective,
            x,
            pivots: tab.pivots,
        })
    }
}
