//! Symmetric sparse matrices and the factorization kernels built on them.

mod cholesky;
mod ordering;
mod selinv;

use std::collections::BTreeMap;

use crate::{Error, Result};

pub use cholesky::{cholesky, CholFactor, SymbolicCholesky};
pub use ordering::minimum_degree;
pub use selinv::selected_inverse;

/// Entries with magnitude below this are dropped by the public constructors.
pub const PRUNE_BELOW: f64 = 1e-300;

/// Relative tolerance used to decide whether both triangles agree.
const SYMMETRY_RTOL: f64 = 1e-12;

/// Symmetric matrix stored as the lower triangle in compressed-column form.
///
/// Row indices inside every column are strictly increasing and never smaller
/// than the column index.
#[derive(Debug, Clone, PartialEq)]
pub struct SymSparse {
    dim: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymSparse {
    /// Builds a matrix from zero-based `(row, col, value)` triplets.
    ///
    /// Either triangle may be supplied. Duplicates within one triangle are
    /// summed; an entry supplied in both triangles must agree.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("matrix dimension must be at least 1".into()));
        }
        let mut lower: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut upper: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(row, col, value) in triplets {
            if row >= dim || col >= dim {
                return Err(Error::IndexOutOfRange { row, col, dim });
            }
            // keyed as (col, row) of the lower triangle so BTreeMap order is CSC order
            if row >= col {
                *lower.entry((col, row)).or_insert(0.0) += value;
            } else {
                *upper.entry((row, col)).or_insert(0.0) += value;
            }
        }
        for (key, up) in upper {
            match lower.get(&key) {
                Some(&low) if key.0 != key.1 => {
                    let scale = up.abs().max(low.abs());
                    if (up - low).abs() > SYMMETRY_RTOL * scale {
                        return Err(Error::AsymmetricInput {
                            row: key.0,
                            col: key.1,
                            upper: up,
                            lower: low,
                        });
                    }
                }
                _ => {
                    lower.insert(key, up);
                }
            }
        }
        let entries = lower
            .into_iter()
            .filter(|(_, v)| v.abs() >= PRUNE_BELOW)
            .map(|((c, r), v)| (r, c, v));
        Ok(Self::from_sorted_lower(dim, entries))
    }

    /// Builds from lower-triangle entries already sorted in column-major order.
    fn from_sorted_lower(dim: usize, entries: impl Iterator<Item = (usize, usize, f64)>) -> Self {
        let mut col_ptr = vec![0usize; dim + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for (r, c, v) in entries {
            debug_assert!(r >= c);
            col_ptr[c + 1] += 1;
            row_idx.push(r);
            values.push(v);
        }
        for j in 0..dim {
            col_ptr[j + 1] += col_ptr[j];
        }
        Self {
            dim,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Builds from unsorted lower-triangle entries, summing duplicates and
    /// keeping explicit zeros. Used for pattern templates.
    pub(crate) fn from_lower_unpruned(dim: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (r, c, v) in entries {
            let (r, c) = if r >= c { (r, c) } else { (c, r) };
            *map.entry((c, r)).or_insert(0.0) += v;
        }
        Self::from_sorted_lower(dim, map.into_iter().map(|((c, r), v)| (r, c, v)))
    }

    /// Same pattern as `self` with new values.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self {
            dim: self.dim,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            values,
        }
    }

    fn pruned(self) -> Self {
        if self.values.iter().all(|v| v.abs() >= PRUNE_BELOW) {
            return self;
        }
        let dim = self.dim;
        let entries: Vec<_> = self.iter().filter(|e| e.2.abs() >= PRUNE_BELOW).collect();
        Self::from_sorted_lower(dim, entries.into_iter())
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::from_sorted_lower(diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v))).pruned()
    }

    /// All-zero matrix (no stored entries).
    pub fn zeros(dim: usize) -> Self {
        Self::from_sorted_lower(dim, std::iter::empty())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored lower-triangle entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of lower-triangle column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    /// Iterates `(row, col, value)` over the stored lower triangle.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |j| {
            let (rows, vals) = self.col(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    /// Position of entry `(i, j)` in the value array, if stored.
    pub(crate) fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let start = self.col_ptr[c];
        self.row_idx[start..self.col_ptr[c + 1]]
            .binary_search(&r)
            .ok()
            .map(|p| start + p)
    }

    /// Logical entry `(i, j)` of the symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|j| self.get(j, j)).collect()
    }

    /// `y = self * x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "matvec dimension mismatch");
        let mut y = vec![0.0; self.dim];
        for (i, j, v) in self.iter() {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        y
    }

    /// `xᵀ · self · x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.iter()
            .map(|(i, j, v)| if i == j { v * x[i] * x[i] } else { 2.0 * v * x[i] * x[j] })
            .sum()
    }

    /// Dense row-major copy of the full symmetric matrix.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.dim]; self.dim];
        for (i, j, v) in self.iter() {
            out[i][j] = v;
            out[j][i] = v;
        }
        out
    }

    /// `q + eps·I`; the result always stores the full diagonal.
    pub fn add_diag(&self, eps: f64) -> Self {
        assert!(eps >= 0.0, "diagonal shift must be non-negative");
        let entries = self.iter().chain((0..self.dim).map(|i| (i, i, eps)));
        let mut out = Self::from_lower_unpruned(self.dim, entries);
        if eps == 0.0 {
            out = out.pruned();
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.with_values(self.values.iter().map(|v| v * factor).collect()).pruned()
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &SymSparse, b: f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let entries = self
            .iter()
            .map(|(i, j, v)| (i, j, a * v))
            .chain(other.iter().map(|(i, j, v)| (i, j, b * v)));
        Ok(Self::from_lower_unpruned(self.dim, entries).pruned())
    }

    /// Places `self` at diagonal offset `offset` inside a `dim`-sized matrix.
    pub fn embed(&self, dim: usize, offset: usize) -> Self {
        assert!(offset + self.dim <= dim);
        Self::from_sorted_lower(dim, self.iter().map(|(i, j, v)| (i + offset, j + offset, v)))
    }

    /// Lower triangle of `self · diag(d) · other`, where the caller guarantees
    /// that the product is symmetric (e.g. `G C⁻¹ G` with diagonal `C`).
    pub fn sandwich(&self, d: &[f64], other: &SymSparse) -> Result<Self> {
        if self.dim != other.dim || d.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim.min(d.len()),
            });
        }
        let left = FullCsc::from_sym(self);
        let right = FullCsc::from_sym(other);
        let n = self.dim;
        let mut work = vec![0.0; n];
        let mut marked = vec![usize::MAX; n];
        let mut touched = Vec::new();
        let mut entries = Vec::new();
        for j in 0..n {
            touched.clear();
            for p in right.col_ptr[j]..right.col_ptr[j + 1] {
                let k = right.row_idx[p];
                let scale = d[k] * right.values[p];
                for q in left.col_ptr[k]..left.col_ptr[k + 1] {
                    let i = left.row_idx[q];
                    if i < j {
                        continue;
                    }
                    if marked[i] != j {
                        marked[i] = j;
                        work[i] = 0.0;
                        touched.push(i);
                    }
                    work[i] += left.values[q] * scale;
                }
            }
            touched.sort_unstable();
            for &i in &touched {
                entries.push((i, j, work[i]));
            }
        }
        Ok(Self::from_sorted_lower(n, entries.into_iter()).pruned())
    }
}

/// General (both triangles) compressed-column copy of a symmetric matrix.
pub(crate) struct FullCsc {
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl FullCsc {
    pub fn from_sym(a: &SymSparse) -> Self {
        let n = a.dim;
        let mut counts = vec![0usize; n + 1];
        for (i, j, _) in a.iter() {
            counts[j + 1] += 1;
            if i != j {
                counts[i + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let nnz = counts[n];
        let mut next = counts.clone();
        let mut row_idx = vec![0; nnz];
        let mut values = vec![0.0; nnz];
        // visiting columns in order keeps row indices sorted within each column
        for j in 0..n {
            let (rows, vals) = a.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                if i != j {
                    // upper entry (j, i) lives in column i; j is increasing per column i
                    let p = next[i];
                    row_idx[p] = j;
                    values[p] = v;
                    next[i] += 1;
                }
            }
            for (&i, &v) in rows.iter().zip(vals) {
                let p = next[j];
                row_idx[p] = i;
                values[p] = v;
                next[j] += 1;
            }
        }
        Self {
            col_ptr: counts,
            row_idx,
            values,
        }
    }
}

/// Kronecker product `a ⊗ b`; entry `(i·nb + k, j·nb + l) = a[i,j]·b[k,l]`.
pub fn kron(a: &SymSparse, b: &SymSparse) -> Result<SymSparse> {
    let dim = a
        .dim
        .checked_mul(b.dim)
        .filter(|d| d.checked_add(1).is_some())
        .ok_or(Error::Overflow(a.dim, b.dim))?;
    let fa = FullCsc::from_sym(a);
    let fb = FullCsc::from_sym(b);
    let nb = b.dim;
    let mut entries = Vec::new();
    for j in 0..a.dim {
        for l in 0..nb {
            let col = j * nb + l;
            for p in fa.col_ptr[j]..fa.col_ptr[j + 1] {
                let i = fa.row_idx[p];
                if i < j {
                    continue;
                }
                for q in fb.col_ptr[l]..fb.col_ptr[l + 1] {
                    let k = fb.row_idx[q];
                    let row = i * nb + k;
                    if row >= col {
                        entries.push((row, col, fa.values[p] * fb.values[q]));
                    }
                }
            }
        }
    }
    // within a column rows are increasing because i then k increase
    Ok(SymSparse::from_sorted_lower(dim, entries.into_iter()).pruned())
}

/// `q + eps·I`.
pub fn add_diag(q: &SymSparse, eps: f64) -> SymSparse {
    q.add_diag(eps)
}

/// Sparse row-compressed rectangular matrix (design/incidence matrices).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            row_ptr: vec![0],
            cols: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row; zero values are skipped.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (c, v) in entries {
            assert!(c < self.ncols, "column {c} out of range");
            if v != 0.0 {
                self.cols.push(c);
                self.values.push(v);
            }
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[range.clone()], &self.values[range])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn transpose_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (i, &yi) in y.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&c, &v) in c.iter().zip(v) {
                out[c] += v * yi;
            }
        }
        out
    }

    /// `Aᵀ A` as a symmetric sparse matrix (explicit zeros kept).
    pub fn gram(&self) -> SymSparse {
        let mut entries = Vec::new();
        for i in 0..self.nrows() {
            let (c, v) = self.row(i);
            for a in 0..c.len() {
                for b in 0..=a {
                    entries.push((c[a], c[b], v[a] * v[b]));
                }
            }
        }
        SymSparse::from_lower_unpruned(self.ncols, entries)
    }

    /// Horizontally concatenates blocks with equal row counts.
    pub fn hstack(blocks: &[&SparseRows]) -> Self {
        let nrows = blocks.first().map_or(0, |b| b.nrows());
        let ncols = blocks.iter().map(|b| b.ncols).sum();
        let mut out = Self::new(ncols);
        for i in 0..nrows {
            let mut offset = 0;
            let mut row = Vec::new();
            for b in blocks {
                assert_eq!(b.nrows(), nrows, "hstack row mismatch");
                let (c, v) = b.row(i);
                row.extend(c.iter().zip(v).map(|(&c, &v)| (c + offset, v)));
                offset += b.ncols;
            }
            out.push_row(row);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(q: &SymSparse) -> Vec<Vec<f64>> {
        q.to_dense()
    }

    #[test]
    fn triplets_build_small_matrix() {
        let q = SymSparse::from_triplets(2, &[(0, 0, 2.0), (1, 0, -1.0), (1, 1, 2.0)]).unwrap();
        assert_eq!(dense(&q), vec![vec![2.0, -1.0], vec![-1.0, 2.0]]);
        let one = SymSparse::from_triplets(1, &[(0, 0, 5.0)]).unwrap();
        assert_eq!(dense(&one), vec![vec![5.0]]);
    }

    #[test]
    fn triplets_reject_contradicting_triangles() {
        let err = SymSparse::from_triplets(3, &[(0, 1, 1.0), (1, 0, 2.0)]).unwrap_err();
        assert!(matches!(err, Error::AsymmetricInput { .. }));
        // agreeing triangles are accepted and not doubled
        let q = SymSparse::from_triplets(3, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(q.get(0, 1), 1.0);
    }

    #[test]
    fn triplets_sum_duplicates_and_check_range() {
        let q = SymSparse::from_triplets(2, &[(1, 1, 1.0), (1, 1, 2.5)]).unwrap();
        assert_eq!(q.get(1, 1), 3.5);
        assert!(matches!(
            SymSparse::from_triplets(2, &[(2, 0, 1.0)]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(SymSparse::from_triplets(0, &[]).is_err());
    }

    #[test]
    fn tiny_values_are_pruned() {
        let q = SymSparse::from_triplets(2, &[(0, 0, 1.0), (1, 0, 1e-310)]).unwrap();
        assert_eq!(q.nnz(), 1);
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let a = SymSparse::from_triplets(7, &(0..7).map(|i| (i, i, 2.0)).collect::<Vec<_>>()).unwrap();
        let b = SymSparse::from_triplets(24, &(0..24).map(|i| (i, i, 6.0)).collect::<Vec<_>>()).unwrap();
        let k = kron(&a, &b).unwrap();
        assert_eq!(k.dim(), 168);
        assert_eq!(k.get(0, 0), 12.0);
    }

    #[test]
    fn kron_with_identity_is_block_diagonal() {
        let k2 = SymSparse::from_triplets(2, &[(0, 0, 2.0), (1, 0, -1.0), (1, 1, 3.0)]).unwrap();
        let out = kron(&SymSparse::identity(2), &k2).unwrap();
        let d = out.to_dense();
        let expected = vec![
            vec![2.0, -1.0, 0.0, 0.0],
            vec![-1.0, 3.0, 0.0, 0.0],
            vec![0.0, 0.0, 2.0, -1.0],
            vec![0.0, 0.0, -1.0, 3.0],
        ];
        assert_eq!(d, expected);
    }

    #[test]
    fn kron_overflow_is_reported() {
        // dimensions are never materialised before the overflow check
        let a = SymSparse {
            dim: usize::MAX / 2,
            col_ptr: vec![],
            row_idx: vec![],
            values: vec![],
        };
        assert!(matches!(kron(&a, &a), Err(Error::Overflow(..))));
    }

    #[test]
    fn add_diag_fills_pattern() {
        let z = SymSparse::zeros(3);
        let d = z.add_diag(1e-5);
        assert_eq!(d.diag(), vec![1e-5; 3]);
        let q = SymSparse::from_triplets(2, &[(1, 0, -1.0)]).unwrap();
        assert_eq!(q.add_diag(0.0), q);
    }

    #[test]
    fn sandwich_matches_dense_product() {
        let g = SymSparse::from_triplets(
            3,
            &[(0, 0, 1.0), (1, 0, -1.0), (1, 1, 2.0), (2, 1, -1.0), (2, 2, 1.0)],
        )
        .unwrap();
        let d = [0.5, 2.0, 0.25];
        let out = g.sandwich(&d, &g).unwrap().to_dense();
        let gd = g.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let expected: f64 = (0..3).map(|k| gd[i][k] * d[k] * gd[k][j]).sum();
                assert!((out[i][j] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn embed_and_gram() {
        let q = SymSparse::from_triplets(2, &[(0, 0, 1.0), (1, 0, 2.0), (1, 1, 3.0)]).unwrap();
        let e = q.embed(4, 1);
        assert_eq!(e.get(2, 1), 2.0);
        assert_eq!(e.get(0, 0), 0.0);
        assert_eq!(e.col_ptr().len(), 5);
        let mut a = SparseRows::new(3);
        a.push_row([(0, 1.0), (2, 2.0)]);
        a.push_row([(1, 1.0)]);
        let g = a.gram();
        assert_eq!(g.get(2, 0), 2.0);
        assert_eq!(g.get(2, 2), 4.0);
        assert_eq!(g.get(1, 1), 1.0);
        assert_eq!(a.transpose_mul_vec(&[1.0, 2.0]), vec![1.0, 2.0, 2.0]);
    }
}
