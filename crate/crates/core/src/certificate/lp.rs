//! Discretized worst-case linear program, solved independently of the
//! closed-form certificates as a cross-check.
//!
//! Unknowns: the objective `d`, an atom `a` at 0, and nonnegative increments
//! `s_l` so that `f = a delta + sum_l s_l 1[u <= l/N]` is nonincreasing.
//! Constraints are imposed at the cell boundaries `j/N`.

use serde::{Deserialize, Serialize};

use crate::binom::{q_value_unchecked, SelectionInstance};
use crate::error::{domain, Result};
use crate::scalar::Scalar;
use crate::simplex::{LinearProgram, Relation};

pub const MIN_LP_CELLS: usize = 2;
pub const MAX_LP_CELLS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpCrossCheck<T> {
    pub instance: SelectionInstance,
    pub cells: usize,
    pub optimum: T,
    pub certificate_value: T,
    /// Atom mass chosen by the solver.
    pub atom: T,
    pub pivots: usize,
}

impl<T: Scalar> LpCrossCheck<T> {
    pub fn gap(&self) -> T {
        (self.certificate_value - self.optimum).abs()
    }
}

pub fn solve_discretized_lp<T: Scalar>(inst: &SelectionInstance, cells: usize) -> Result<LpCrossCheck<T>> {
    if !(MIN_LP_CELLS..=MAX_LP_CELLS).contains(&cells) {
        return domain(format!(
            "cell count must lie in [{MIN_LP_CELLS}, {MAX_LP_CELLS}], got {cells}"
        ));
    }
    let (m, n, k) = (inst.m(), inst.n(), inst.k());
    let nn = T::from_usize(cells).expect("usize");
    let q = |j: usize| T::from_usize(j).expect("usize") / nn;
    let width = cells + 2;

    let mut objective = vec![T::zero(); width];
    objective[0] = T::one();
    let mut lp = LinearProgram::new(objective);
    for j in 1..=cells {
        let qj = q(j);
        let lead = q_value_unchecked(m, k, qj) / qj;
        let mut row = vec![T::zero(); width];
        row[0] = -T::one();
        row[1] = lead;
        for l in 1..=cells {
            row[l + 1] = lead * T::from_usize(j.min(l)).expect("usize") / nn;
        }
        lp.push(row, Relation::Le, T::zero());
    }
    let mut norm = vec![T::zero(); width];
    norm[1] = T::count(n);
    for l in 1..=cells {
        norm[l + 1] = q_value_unchecked(n, k, q(l));
    }
    lp.push(norm, Relation::Eq, T::one());

    let sol = lp.solve()?;
    Ok(LpCrossCheck {
        instance: *inst,
        cells,
        optimum: sol.objective,
        certificate_value: q_value_unchecked(m, k, inst.critical_quantile::<T>()) / T::count(k),
        atom: sol.x[1],
        pivots: sol.pivots,
    })
}
