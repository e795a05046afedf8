use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::mesh::SimplicialMesh;

/// Compressed-row sparsity structure with sorted column indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl SparsityPattern {
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            assert!(r.last().is_none_or(|&c| c < n), "column index out of range");
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        SparsityPattern { n, row_ptr, cols }
    }

    /// Vertex adjacency of a mesh (each vertex couples to itself and its
    /// edge neighbours).
    pub fn from_mesh(mesh: &SimplicialMesh) -> Self {
        let mut rows = vec![Vec::new(); mesh.num_vertices()];
        for c in 0..mesh.num_cells() {
            let v = mesh.cell_vertices(c);
            for &a in &v {
                rows[a].extend_from_slice(&v);
            }
        }
        Self::from_rows(rows)
    }

    /// Pattern of the interleaved system with `b` unknowns per node where every
    /// node coupling becomes a dense `b`×`b` block.
    pub fn expand_blocks(&self, b: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(self.n * b + 1);
        let mut cols = Vec::with_capacity(self.cols.len() * b * b);
        row_ptr.push(0);
        for i in 0..self.n {
            for _ in 0..b {
                for &j in self.row(i) {
                    cols.extend((0..b).map(|f| b * j + f));
                }
                row_ptr.push(cols.len());
            }
        }
        SparsityPattern {
            n: self.n * b,
            row_ptr,
            cols,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_start(&self, i: usize) -> usize {
        self.row_ptr[i]
    }

    /// Storage index of entry `(i, j)`, if structurally present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        self.row(i).binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).iter().all(|&j| self.position(j, i).is_some()))
    }
}

/// Square sparse matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SparseOperator { pattern, values }
    }

    pub fn from_parts(pattern: Arc<SparsityPattern>, values: Vec<f64>) -> Self {
        assert_eq!(pattern.nnz(), values.len());
        SparseOperator { pattern, values }
    }

    pub fn identity(n: usize) -> Self {
        let pattern = SparsityPattern::from_rows((0..n).map(|i| vec![i]).collect());
        SparseOperator {
            pattern: Arc::new(pattern),
            values: vec![1.0; n],
        }
    }

    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            rows[i].push(j);
        }
        let pattern = Arc::new(SparsityPattern::from_rows(rows));
        let mut op = SparseOperator::zeros(pattern);
        for &(i, j, v) in triplets {
            let k = op.pattern.position(i, j).unwrap();
            op.values[k] += v;
        }
        op
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let s = self.pattern.row_ptr[i];
        let e = self.pattern.row_ptr[i + 1];
        (&self.pattern.cols[s..e], &self.values[s..e])
    }

    /// Entry `(i, j)`; zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pattern
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is not in the sparsity pattern"));
        self.values[k] += v;
    }

    /// `y = A x`, rows computed independently so the result does not depend on
    /// the thread count.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let p = &*self.pattern;
        y.par_iter_mut().with_min_len(1024).enumerate().for_each(|(i, yi)| {
            let s = p.row_ptr[i];
            let e = p.row_ptr[i + 1];
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[p.cols[k]];
            }
            *yi = acc;
        });
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s * other`; both must share one pattern.
    pub fn axpy(&mut self, s: f64, other: &SparseOperator) {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern,
            "operators have different sparsity patterns"
        );
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        (0..self.dim()).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .all(|(&j, &v)| (v - self.get(j, i)).abs() <= tol * scale)
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] += v;
            }
        }
        m
    }
}
