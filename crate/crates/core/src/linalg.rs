//! Sparse symmetric linear algebra: CSR storage and a Jacobi-preconditioned
//! conjugate gradient solver.
//!
//! Dirichlet constraints are eliminated before the solve (the flow builds
//! reduced systems over free unknowns), so matrices handed to [`cg_solve`]
//! are expected to be SPD.

use crate::error::{Error, Result};

/// Structurally symmetric sparse matrix in CSR form. Both triangles are
/// stored; column indices are sorted within each row with no duplicates.
#[derive(Debug, Clone)]
pub struct SparseSym {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseSym {
    /// Builds from triplets; duplicate entries are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            per_row[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in per_row.iter_mut() {
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == j {
                    v += row[k].1;
                    k += 1;
                }
                col_idx.push(j);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseSym {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    /// Structure-only constructor: one sorted, deduplicated column list per
    /// row; values start at zero and are filled in place.
    pub fn from_structure(columns: Vec<Vec<usize>>) -> Self {
        let n = columns.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut cols in columns {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(&cols);
            row_ptr.push(col_idx.len());
        }
        let vals = vec![0.0; col_idx.len()];
        SparseSym {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    /// Index of entry (i, j) in the value array.
    pub fn entry_index(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn clear_values(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            if let Some(k) = self.entry_index(i, i) {
                d[i] = self.vals[k];
            }
        }
        d
    }
}

/// Outcome of a CG solve. `rel_residual` is the true relative residual
/// `|b - Ax| / |b|` recomputed after the iteration.
#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients for SPD systems.
///
/// Returns the iterate and a report; a non-converged report is an error for
/// callers that need the solution (the flow aborts with diagnostics).
pub fn cg_solve(
    a: &SparseSym,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, SolveReport) {
    let n = a.n;
    debug_assert_eq!(b.len(), n);
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return (
            x,
            SolveReport {
                iterations: 0,
                rel_residual: 0.0,
                converged: true,
            },
        );
    }

    let diag = a.diagonal();
    let inv_diag: Vec<f64> = diag
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    let mut iterations = 0;
    // exit on the recursive residual with a safety margin; the true residual
    // is recomputed for the report
    let target = 0.25 * tol * b_norm;
    let mut r_norm = b_norm;

    while r_norm > target && iterations < max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break; // not SPD (or breakdown); report via true residual below
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        r_norm = dot(&r, &r).sqrt();
        iterations += 1;
    }

    // true residual
    a.matvec(&x, &mut ap);
    let mut true_r2 = 0.0;
    for i in 0..n {
        let d = b[i] - ap[i];
        true_r2 += d * d;
    }
    let rel_residual = true_r2.sqrt() / b_norm;
    (
        x,
        SolveReport {
            iterations,
            rel_residual,
            converged: rel_residual <= tol,
        },
    )
}

/// Convenience wrapper mapping non-convergence to [`Error::Solver`].
pub fn cg_solve_checked(
    a: &SparseSym,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    what: &str,
) -> Result<(Vec<f64>, SolveReport)> {
    let (x, report) = cg_solve(a, b, tol, max_iter);
    if !report.converged {
        return Err(Error::Solver(format!(
            "{what}: CG did not converge ({} iterations, relative residual {:.3e}, tol {:.1e})",
            report.iterations, report.rel_residual, tol
        )));
    }
    Ok((x, report))
}
