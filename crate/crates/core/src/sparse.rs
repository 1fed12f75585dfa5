//! Compressed sparse row matrices and a Jacobi-preconditioned conjugate gradient solver.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n × n` matrix from coordinate triplets; duplicates are summed
    /// in input order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, usize)> = Vec::with_capacity(triplets.len());
        for (k, &(i, j, _)) in triplets.iter().enumerate() {
            if i >= n || j >= n {
                return Err(Error::Index { index: i.max(j), len: n });
            }
            entries.push((i, j, k));
        }
        entries.sort_unstable();
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, k) in &entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += triplets[k].2;
            } else {
                col_idx.push(j);
                values.push(triplets[k].2);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Empty matrix with a fixed sparsity pattern given as sorted column lists per row.
    fn with_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows {
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self + factor * other`; both matrices must share the same pattern.
    pub fn add_scaled(&self, factor: f64, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.row_ptr != other.row_ptr || self.col_idx != other.col_idx {
            return Err(Error::Internal("sparsity patterns differ".into()));
        }
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v += factor * w;
        }
        Ok(out)
    }

    /// `max |A_ij − A_ji| / max |A_ij|`.
    pub fn symmetry_residual(&self) -> f64 {
        let mut max_diff: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                max_abs = max_abs.max(libm::fabs(self.values[k]));
                max_diff = max_diff.max(libm::fabs(self.values[k] - self.get(j, i)));
            }
        }
        if max_abs == 0.0 {
            0.0
        } else {
            max_diff / max_abs
        }
    }

    /// Zeroes row and column `dof` except for a unit diagonal.
    pub(crate) fn eliminate(&mut self, dof: usize) {
        let (start, end) = (self.row_ptr[dof], self.row_ptr[dof + 1]);
        for k in start..end {
            let j = self.col_idx[k];
            if j != dof {
                self.values[k] = 0.0;
                if let Some(kt) = self.position(j, dof) {
                    self.values[kt] = 0.0;
                }
            } else {
                self.values[k] = 1.0;
            }
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Precomputed scatter map from element-local matrix entries to CSR value slots.
/// Lets a mesh with fixed connectivity be re-assembled without sorting triplets.
#[derive(Debug, Clone)]
pub struct AssemblyPattern {
    template: CsrMatrix,
    local: usize,
    slots: Vec<usize>,
}

impl AssemblyPattern {
    /// `element_dofs` lists the global dofs of every element, `local` per element.
    pub fn new(n: usize, local: usize, element_dofs: &[usize]) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for dofs in element_dofs.chunks_exact(local) {
            for &i in dofs {
                rows[i].extend_from_slice(dofs);
            }
        }
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
        }
        let template = CsrMatrix::with_pattern(rows);
        let mut slots = Vec::with_capacity(element_dofs.len() * local);
        for dofs in element_dofs.chunks_exact(local) {
            for &i in dofs {
                for &j in dofs {
                    slots.push(template.position(i, j).expect("pattern covers element"));
                }
            }
        }
        AssemblyPattern { template, local, slots }
    }

    /// Assembles a matrix; `element_matrix(e, out)` fills the row-major local matrix of element `e`.
    pub fn assemble<F>(&self, mut element_matrix: F) -> CsrMatrix
    where
        F: FnMut(usize, &mut [f64]),
    {
        let mut m = self.template.clone();
        let mut local = vec![0.0; self.local * self.local];
        let per = self.local * self.local;
        let values = m.values_mut();
        for (e, slots) in self.slots.chunks_exact(per).enumerate() {
            local.iter_mut().for_each(|v| *v = 0.0);
            element_matrix(e, &mut local);
            for (s, v) in slots.iter().zip(&local) {
                values[*s] += v;
            }
        }
        m
    }
}

/// Iteration statistics of a converged solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Solves `A x = b` for symmetric positive definite `A` with diagonally
/// preconditioned CG, starting from `x` (used as the initial guess).
/// Converged when `‖b − A x‖ ≤ tol ‖b‖`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.dim();
    if b.len() != n || x.len() != n {
        return Err(Error::Internal("dimension mismatch in pcg".into()));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut residual;

    // outer loop restarts from the true residual if the recurrence drifted
    loop {
        a.mul_vec(x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        residual = norm(&r) / bnorm;
        if residual <= tol {
            return Ok(SolveStats { iterations, residual });
        }
        if iterations >= max_iter {
            return Err(Error::Solver { iterations, residual });
        }
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            a.mul_vec(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) || !pap.is_finite() {
                return Err(Error::Solver { iterations, residual });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            residual = norm(&r) / bnorm;
            if !residual.is_finite() {
                return Err(Error::Solver { iterations, residual });
            }
            if residual <= tol {
                break;
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn cg_solves_tridiagonal() {
        let n = 50;
        let a = laplacian_1d(n);
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a.apply(&exact);
        let mut x = vec![0.0; n];
        let st = pcg(&a, &b, &mut x, 1e-12, 1000).unwrap();
        assert!(st.residual <= 1e-12);
        for i in 0..n {
            assert!((x[i] - exact[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn cg_reports_nonconvergence() {
        let a = laplacian_1d(100);
        let b = vec![1.0; 100];
        let mut x = vec![0.0; 100];
        match pcg(&a, &b, &mut x, 1e-14, 3) {
            Err(Error::Solver { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-14);
            }
            other => panic!("expected solver error, got {other:?}"),
        }
    }

    #[test]
    fn pattern_assembly_matches_triplets() {
        let dofs = [0usize, 1, 2, 1, 2, 3];
        let pat = AssemblyPattern::new(4, 3, &dofs);
        let m = pat.assemble(|e, out| {
            for (k, v) in out.iter_mut().enumerate() {
                *v = (e * 9 + k) as f64;
            }
        });
        let mut t = Vec::new();
        for (e, d) in dofs.chunks_exact(3).enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    t.push((d[a], d[b], (e * 9 + a * 3 + b) as f64));
                }
            }
        }
        assert_eq!(m, CsrMatrix::from_triplets(4, &t).unwrap());
    }
}
