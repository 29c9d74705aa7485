//! Dense two-phase primal simplex for equality-form programs
//! min c.x  s.t.  A x = b, x >= 0.
//!
//! Pivoting is Dantzig (most negative reduced cost) until the objective
//! stalls, then Bland's rule permanently, which precludes cycling on the
//! heavily degenerate transportation polytopes this crate feeds it.
//! Artificial columns stay in the tableau so the duals can be read off the
//! final reduced-cost row.

use crate::error::{Error, Result};

/// Reduced-cost / pivot tolerance. Feasibility and optimality of returned
/// solutions are certified to this tolerance by the callers.
pub const LP_TOL: f64 = 1e-9;

const DRIVE_OUT_TOL: f64 = 1e-7;
const STALL_LIMIT: usize = 128;

pub struct DenseLp {
    pub rows: usize,
    pub cols: usize,
    /// Row-major rows x cols constraint matrix.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

pub struct LpSolution {
    pub x: Vec<f64>,
    /// One multiplier per constraint row, satisfying c - A^T y >= -tol.
    pub duals: Vec<f64>,
    pub value: f64,
}

struct Tableau {
    rows: usize,
    cols: usize,
    width: usize, // cols + rows artificials + 1 rhs
    t: Vec<f64>,
    basis: Vec<usize>,
    obj: Vec<f64>,    // phase-2 reduced costs, rhs slot holds -objective
    obj1: Vec<f64>,   // phase-1 reduced costs during phase 1
    scratch: Vec<f64>,
    bland: bool,
    stalled: usize,
    iterations: usize,
}

impl Tableau {
    fn new(lp: &DenseLp, row_sign: &[f64]) -> Self {
        let (rows, cols) = (lp.rows, lp.cols);
        let width = cols + rows + 1;
        let mut t = vec![0.0; rows * width];
        for r in 0..rows {
            let s = row_sign[r];
            let row = &mut t[r * width..(r + 1) * width];
            for (v, a) in row.iter_mut().zip(&lp.a[r * cols..(r + 1) * cols]) {
                *v = s * a;
            }
            row[cols + r] = 1.0;
            row[width - 1] = s * lp.b[r];
        }
        // phase-2 reduced costs with the all-artificial basis (artificials cost 0)
        let mut obj = vec![0.0; width];
        obj[..cols].copy_from_slice(&lp.c);
        // phase-1: minimize sum of artificials
        let mut obj1 = vec![0.0; width];
        for r in 0..rows {
            let row = &t[r * width..(r + 1) * width];
            for (o, v) in obj1.iter_mut().zip(row) {
                *o -= v;
            }
            obj1[cols + r] = 0.0;
        }
        Self {
            rows,
            cols,
            width,
            t,
            basis: (0..rows).map(|r| cols + r).collect(),
            obj,
            obj1,
            scratch: vec![0.0; width],
            bland: false,
            stalled: 0,
            iterations: 0,
        }
    }

    fn rhs(&self, r: usize) -> f64 {
        self.t[r * self.width + self.width - 1]
    }

    fn pivot(&mut self, r: usize, j: usize, phase1: bool) {
        let w = self.width;
        let piv = self.t[r * w + j];
        let inv = 1.0 / piv;
        {
            let row = &mut self.t[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v *= inv;
            }
            row[j] = 1.0;
            self.scratch.copy_from_slice(row);
        }
        for rr in 0..self.rows {
            if rr == r {
                continue;
            }
            let f = self.t[rr * w + j];
            if f != 0.0 {
                let row = &mut self.t[rr * w..(rr + 1) * w];
                for (v, s) in row.iter_mut().zip(&self.scratch) {
                    *v -= f * s;
                }
                row[j] = 0.0;
            }
        }
        let f = self.obj[j];
        if f != 0.0 {
            for (v, s) in self.obj.iter_mut().zip(&self.scratch) {
                *v -= f * s;
            }
            self.obj[j] = 0.0;
        }
        if phase1 {
            let f = self.obj1[j];
            if f != 0.0 {
                for (v, s) in self.obj1.iter_mut().zip(&self.scratch) {
                    *v -= f * s;
                }
                self.obj1[j] = 0.0;
            }
        }
        self.basis[r] = j;
        self.iterations += 1;
    }

    /// Entering column among structurals, or None at optimality.
    fn entering(&self, phase1: bool) -> Option<usize> {
        let d = if phase1 { &self.obj1 } else { &self.obj };
        if self.bland {
            (0..self.cols).find(|&j| d[j] < -LP_TOL)
        } else {
            let mut best = None;
            let mut best_d = -LP_TOL;
            for (j, &dj) in d[..self.cols].iter().enumerate() {
                if dj < best_d {
                    best_d = dj;
                    best = Some(j);
                }
            }
            best
        }
    }

    /// Leaving row by the minimum-ratio test, or None if the column is
    /// unbounded. Under Bland, ties go to the lowest basic variable index.
    fn leaving(&self, j: usize) -> Option<usize> {
        let w = self.width;
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.t[r * w + j];
            if a <= LP_TOL {
                continue;
            }
            let ratio = (self.rhs(r).max(0.0)) / a;
            match best {
                None => best = Some((r, ratio)),
                Some((br, bratio)) => {
                    if ratio < bratio - LP_TOL {
                        best = Some((r, ratio));
                    } else if ratio < bratio + LP_TOL {
                        let better = if self.bland {
                            self.basis[r] < self.basis[br]
                        } else {
                            a.abs() > self.t[br * w + j].abs()
                        };
                        if better {
                            best = Some((r, ratio));
                        }
                    }
                }
            }
        }
        best.map(|(r, _)| r)
    }

    fn run(&mut self, phase1: bool, max_iter: usize) -> Result<()> {
        let mut last_obj = f64::INFINITY;
        while let Some(j) = self.entering(phase1) {
            if self.iterations > max_iter {
                return Err(Error::Numerical(format!(
                    "simplex exceeded {max_iter} pivots"
                )));
            }
            let r = self
                .leaving(j)
                .ok_or(Error::Unbounded)?;
            self.pivot(r, j, phase1);
            let obj = if phase1 {
                -self.obj1[self.width - 1]
            } else {
                -self.obj[self.width - 1]
            };
            if obj < last_obj - 1e-12 {
                last_obj = obj;
                self.stalled = 0;
            } else {
                self.stalled += 1;
                if self.stalled > STALL_LIMIT {
                    self.bland = true;
                }
            }
        }
        Ok(())
    }
}

pub fn solve(lp: &DenseLp) -> Result<LpSolution> {
    debug_assert_eq!(lp.a.len(), lp.rows * lp.cols);
    if lp.a.iter().any(|v| !v.is_finite())
        || lp.b.iter().any(|v| !v.is_finite())
        || lp.c.iter().any(|v| !v.is_finite())
    {
        return Err(Error::InvalidInput("non-finite entry in LP data".into()));
    }
    let row_sign: Vec<f64> = lp.b.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut tab = Tableau::new(lp, &row_sign);
    let max_iter = 20_000 + 30 * (lp.rows + lp.cols);

    tab.run(true, max_iter)?;
    let phase1_obj = -tab.obj1[tab.width - 1];
    let b_scale = 1.0 + lp.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if phase1_obj > 1e-7 * b_scale {
        return Err(Error::Infeasible(phase1_obj));
    }
    // Drive basic artificials out where possible; all-zero rows are redundant
    // constraints and keep their artificial basic at level zero.
    for r in 0..tab.rows {
        if tab.basis[r] >= tab.cols {
            let w = tab.width;
            let j = (0..tab.cols).find(|&j| tab.t[r * w + j].abs() > DRIVE_OUT_TOL);
            if let Some(j) = j {
                tab.pivot(r, j, true);
            }
        }
    }

    tab.bland = false;
    tab.stalled = 0;
    tab.run(false, max_iter)?;

    let mut x = vec![0.0; lp.cols];
    for r in 0..tab.rows {
        if tab.basis[r] < lp.cols {
            let v = tab.rhs(r);
            if v < -1e-7 * b_scale {
                return Err(Error::Numerical(format!(
                    "basic variable drifted negative: {v:e}"
                )));
            }
            x[tab.basis[r]] = v.max(0.0);
        }
    }
    // y_r = -(reduced cost of artificial r), undoing any row flip
    let duals: Vec<f64> = (0..lp.rows)
        .map(|r| -tab.obj[lp.cols + r] * row_sign[r])
        .collect();
    let value = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();

    // certify primal feasibility against the original data
    for r in 0..lp.rows {
        let lhs: f64 = lp.a[r * lp.cols..(r + 1) * lp.cols]
            .iter()
            .zip(&x)
            .map(|(a, x)| a * x)
            .sum();
        if (lhs - lp.b[r]).abs() > 1e-7 * b_scale {
            return Err(Error::Numerical(format!(
                "residual {:e} on row {r} after solve",
                lhs - lp.b[r]
            )));
        }
    }
    Ok(LpSolution { x, duals, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_equality_lp() {
        // min x0 + 2 x1 s.t. x0 + x1 = 1 -> x = (1, 0)
        let lp = DenseLp {
            rows: 1,
            cols: 2,
            a: vec![1.0, 1.0],
            b: vec![1.0],
            c: vec![1.0, 2.0],
        };
        let sol = solve(&lp).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        // x0 = 1 and x0 = 2 cannot both hold
        let lp = DenseLp {
            rows: 2,
            cols: 1,
            a: vec![1.0, 1.0],
            b: vec![1.0, 2.0],
            c: vec![1.0],
        };
        assert!(matches!(solve(&lp), Err(Error::Infeasible(_))));
    }

    #[test]
    fn unbounded_detected() {
        // min -x0 s.t. x0 - x1 = 0: ray x0 = x1 -> infinity
        let lp = DenseLp {
            rows: 1,
            cols: 2,
            a: vec![1.0, -1.0],
            b: vec![0.0],
            c: vec![-1.0, 0.0],
        };
        assert!(matches!(solve(&lp), Err(Error::Unbounded)));
    }

    #[test]
    fn redundant_rows_tolerated() {
        // same constraint twice
        let lp = DenseLp {
            rows: 2,
            cols: 2,
            a: vec![1.0, 1.0, 1.0, 1.0],
            b: vec![1.0, 1.0],
            c: vec![2.0, 1.0],
        };
        let sol = solve(&lp).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duals_certify_value() {
        // transportation-like: value must equal y.b
        let lp = DenseLp {
            rows: 2,
            cols: 3,
            a: vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0],
            b: vec![1.0, 2.0],
            c: vec![1.0, 3.0, 1.0],
        };
        let sol = solve(&lp).unwrap();
        let yb: f64 = sol.duals.iter().zip(&lp.b).map(|(y, b)| y * b).sum();
        assert!((yb - sol.value).abs() < 1e-9);
        // dual feasibility: c_j - y.A_j >= -tol
        for j in 0..lp.cols {
            let ya: f64 = (0..lp.rows).map(|r| sol.duals[r] * lp.a[r * lp.cols + j]).sum();
            assert!(lp.c[j] - ya >= -1e-9);
        }
    }
}
