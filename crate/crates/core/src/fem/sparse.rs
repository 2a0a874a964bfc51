//! Compressed-row sparse matrices sharing a mesh-derived sparsity pattern.

use std::sync::Arc;

use rayon::prelude::*;

/// Rows shorter than this are multiplied sequentially; the parallel split
/// only pays off on larger systems.
const PAR_MATVEC_MIN_ROWS: usize = 4096;

/// Symmetric sparsity pattern in compressed-row layout.
///
/// Column indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
}

impl SparsityPattern {
    /// Node-to-node adjacency of a triangulation, diagonal included.
    pub fn from_triangles(n_nodes: usize, triangles: &[[usize; 3]]) -> Self {
        let mut rows: Vec<Vec<usize>> = (0..n_nodes).map(|i| vec![i]).collect();
        for tri in triangles {
            for &a in tri {
                for &b in tri {
                    if a != b {
                        rows[a].push(b);
                    }
                }
            }
        }
        Self::from_rows(rows)
    }

    fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        Self {
            row_offsets,
            col_indices,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    /// Position of entry `(i, j)` in the value array, if it is structurally present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_offsets[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }

    /// True if `(i, j)` present implies `(j, i)` present.
    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n_rows()).all(|i| self.row(i).iter().all(|&j| self.position(j, i).is_some()))
    }
}

/// Square sparse matrix in compressed-row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            pattern: Arc::new(SparsityPattern::identity(n)),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            rows[i].push(j);
        }
        let pattern = Arc::new(SparsityPattern::from_rows(rows));
        let mut m = Self::zeros(pattern);
        for &(i, j, v) in triplets {
            m.add_at(i, j, v);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.pattern.n_rows()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Entry `(i, j)`, zero when not structurally present.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern
            .position(i, j)
            .map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(i, j)`.
    ///
    /// Panics if the entry is not in the pattern.
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pattern
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.values[k] += v;
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.pattern.row_offsets[i]..self.pattern.row_offsets[i + 1];
        self.pattern.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.row_entries(i).map(|(_, v)| v).sum())
            .collect()
    }

    /// Sum of all stored entries.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y = A x`. Each row is reduced independently, so the result does not
    /// depend on how rows are distributed over threads.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let offsets = &self.pattern.row_offsets;
        let cols = &self.pattern.col_indices;
        let vals = &self.values;
        let row = |i: usize| -> f64 {
            let mut s = 0.0;
            for k in offsets[i]..offsets[i + 1] {
                s += vals[k] * x[cols[k]];
            }
            s
        };
        if y.len() >= PAR_MATVEC_MIN_ROWS && rayon::current_num_threads() > 1 {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row(i);
            }
        }
    }

    /// `self += alpha * other`. Both matrices must share the same pattern.
    pub fn add_scaled(&mut self, alpha: f64, other: &SparseMatrix) {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern,
            "sparsity patterns differ"
        );
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.row_entries(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Replaces the rows and columns of `nodes` by identity rows and moves the
    /// known values to the right-hand side. Keeps a symmetric matrix symmetric.
    pub fn apply_dirichlet(&mut self, rhs: &mut [f64], nodes: &[usize], values: &[f64]) {
        assert_eq!(nodes.len(), values.len());
        let n = self.dim();
        let mut fixed = vec![None; n];
        for (&i, &v) in nodes.iter().zip(values) {
            fixed[i] = Some(v);
        }
        let offsets = self.pattern.row_offsets.clone();
        for i in 0..n {
            for k in offsets[i]..offsets[i + 1] {
                let j = self.pattern.col_indices[k];
                if fixed[i].is_some() {
                    self.values[k] = if i == j { 1.0 } else { 0.0 };
                } else if let Some(vj) = fixed[j] {
                    rhs[i] -= self.values[k] * vj;
                    self.values[k] = 0.0;
                }
            }
        }
        for (i, v) in fixed.iter().enumerate() {
            if let Some(v) = v {
                rhs[i] = *v;
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
