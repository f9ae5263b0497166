//! Dense two-phase simplex for `max c·θ  s.t.  Aθ = b, θ ≥ 0`.
//!
//! Pivoting follows Bland's rule (lowest entering index, lowest leaving basic
//! index on ratio ties), so the solver terminates on degenerate problems and
//! is reproducible bit for bit. Problem sizes here are tiny (a few rows, a
//! few dozen columns), so a full tableau is the simplest correct choice.

use crate::{Error, Result};

/// Pivot tolerance.
pub const PIVOT_TOL: f64 = 1e-10;
/// Phase-one residual above which a problem is declared infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    /// Row-major equality constraint matrix.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Dual prices `y` with `yᵀA ≥ c` and `yᵀb = value` at optimality.
    pub duals: Vec<f64>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if objective.is_empty() {
            return Err(Error::Invalid("linear program needs at least one variable".into()));
        }
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        for row in &a {
            if row.len() != objective.len() {
                return Err(Error::DimensionMismatch {
                    expected: objective.len(),
                    got: row.len(),
                });
            }
        }
        let finite = objective.iter().chain(&b).chain(a.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("linear program data"));
        }
        Ok(Self { objective, a, b })
    }

    fn vars(&self) -> usize {
        self.objective.len()
    }

    fn rows(&self) -> usize {
        self.b.len()
    }

    /// Primal residual `‖Aθ − b‖_∞`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| (crate::linalg::dot(row, x) - bi).abs())
            .fold(0.0, f64::max)
    }
}

struct Tableau {
    vars: usize,
    rows: usize,
    /// `rows × (vars + rows + 1)`: structural | artificial | rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    signs: Vec<f64>,
}

impl Tableau {
    fn new(p: &LpProblem) -> Self {
        let (vars, rows) = (p.vars(), p.rows());
        let width = vars + rows + 1;
        let mut t = Vec::with_capacity(rows);
        let mut signs = Vec::with_capacity(rows);
        for r in 0..rows {
            let s = if p.b[r] < 0.0 { -1.0 } else { 1.0 };
            let mut row = vec![0.0; width];
            for (cell, a) in row.iter_mut().zip(&p.a[r][..vars]) {
                *cell = s * a;
            }
            row[vars + r] = 1.0;
            row[width - 1] = s * p.b[r];
            t.push(row);
            signs.push(s);
        }
        Self {
            vars,
            rows,
            t,
            basis: (vars..vars + rows).collect(),
            signs,
        }
    }

    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.vars + self.rows]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Runs Bland-rule simplex iterations maximizing `cost` over the columns
    /// `0..allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        for _ in 0..MAX_ITERATIONS {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let zj: f64 = (0..self.rows).map(|r| cost[self.basis[r]] * self.t[r][j]).sum();
                if cost[j] - zj > PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.t[r][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, best)) => {
                            if ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, best))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(row, col);
        }
        Err(Error::Invalid("simplex iteration limit reached".into()))
    }

    fn phase_one(&mut self) -> Result<f64> {
        let mut cost = vec![0.0; self.vars + self.rows];
        for c in cost.iter_mut().skip(self.vars) {
            *c = -1.0;
        }
        self.optimize(&cost, self.vars + self.rows)?;
        let residual: f64 = (0..self.rows)
            .filter(|&r| self.basis[r] >= self.vars)
            .map(|r| self.rhs(r).abs())
            .sum();
        Ok(residual)
    }

    /// Pivots zero-level artificials out of the basis where a structural
    /// column allows it. Rows where none does are redundant and keep their
    /// artificial at zero.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.rows {
            if self.basis[r] < self.vars {
                continue;
            }
            let col = (0..self.vars)
                .filter(|j| !self.basis.contains(j))
                .find(|&j| self.t[r][j].abs() > 1e-9);
            if let Some(col) = col {
                let w = self.vars + self.rows;
                self.t[r][w] = 0.0;
                self.pivot(r, col);
            }
        }
    }

    fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.vars];
        for r in 0..self.rows {
            if self.basis[r] < self.vars {
                x[self.basis[r]] = self.rhs(r).max(0.0);
            }
        }
        x
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|k| {
                let yk: f64 = (0..self.rows)
                    .map(|r| cost[self.basis[r]] * self.t[r][self.vars + k])
                    .sum();
                self.signs[k] * yk
            })
            .collect()
    }
}

/// Solves `max c·θ s.t. Aθ = b, θ ≥ 0`.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    let mut tab = Tableau::new(p);
    let residual = tab.phase_one()?;
    if residual > FEASIBILITY_TOL {
        return Err(Error::Infeasible { residual });
    }
    tab.drive_out_artificials();
    let mut cost = p.objective.clone();
    cost.extend(std::iter::repeat_n(0.0, p.rows()));
    tab.optimize(&cost, p.vars())?;
    let x = tab.primal();
    let value = crate::linalg::dot(&p.objective, &x);
    let duals = tab.duals(&cost);
    Ok(LpSolution { x, value, duals })
}

/// Minimum L1 infeasibility of `{Aθ = b, θ ≥ 0}` (zero when feasible).
pub fn min_infeasibility(p: &LpProblem) -> Result<f64> {
    Tableau::new(p).phase_one()
}

/// A basic feasible solution of `{Aθ = b, θ ≥ 0}`; its support has at most
/// `rows` entries and its columns are linearly independent.
pub fn basic_feasible_point(p: &LpProblem) -> Result<Vec<f64>> {
    let mut tab = Tableau::new(p);
    let residual = tab.phase_one()?;
    if residual > FEASIBILITY_TOL {
        return Err(Error::Infeasible { residual });
    }
    tab.drive_out_artificials();
    Ok(tab.primal())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_first_weight_on_simplex() {
        let p = LpProblem::new(vec![1.0, 0.0], vec![vec![1.0, 1.0]], vec![1.0]).unwrap();
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.value, 1.0);
        assert_eq!(s.x, vec![1.0, 0.0]);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn membership_outside_segment_is_infeasible() {
        // θ1·(-1) + θ2·1 = 2, θ1 + θ2 = 1
        let p = LpProblem::new(
            vec![0.0, 0.0],
            vec![vec![-1.0, 1.0], vec![1.0, 1.0]],
            vec![2.0, 1.0],
        )
        .unwrap();
        assert!(matches!(solve_lp(&p), Err(Error::Infeasible { .. })));
        assert!(min_infeasibility(&p).unwrap() > 0.5);
    }

    #[test]
    fn variance_lp_on_segment_center() {
        // max Σθ|v|² with v = ±1, mean 0 → value 1
        let p = LpProblem::new(
            vec![1.0, 1.0],
            vec![vec![-1.0, 1.0], vec![1.0, 1.0]],
            vec![0.0, 1.0],
        )
        .unwrap();
        let s = solve_lp(&p).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(p.residual(&s.x) < 1e-12);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let p = LpProblem::new(
            vec![1.0, 2.0, 0.0],
            vec![vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]],
            vec![1.0, 2.0],
        )
        .unwrap();
        let s = solve_lp(&p).unwrap();
        assert!((s.value - 2.0).abs() < 1e-12);
        // dual feasibility yᵀA ≥ c
        for j in 0..3 {
            let yaj = s.duals[0] * p.a[0][j] + s.duals[1] * p.a[1][j];
            assert!(yaj >= p.objective[j] - 1e-9);
        }
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic degenerate vertex: many ties in the ratio test.
        let p = LpProblem::new(
            vec![1.0, 1.0, 1.0, 1.0],
            vec![vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0], vec![1.0, 1.0, 1.0, 1.0]],
            vec![0.5, 0.5, 1.0],
        )
        .unwrap();
        let s = solve_lp(&p).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
    }
}
