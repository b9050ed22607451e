use std::sync::Arc;

use super::{minimum_degree, SymSparse};
use crate::{Error, Result};

/// Ordering and nonzero pattern of `L` for one sparsity pattern of `Q`.
///
/// Analysis is done once; [`SymbolicCholesky::factor`] can then be called for
/// every matrix that shares the analysed pattern.
#[derive(Debug)]
pub struct SymbolicCholesky {
    dim: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// pattern of the analysed input, used to validate reuse
    input_col_ptr: Vec<usize>,
    input_row_idx: Vec<usize>,
    /// permuted lower triangle `C = P Q Pᵀ`: column pointers, rows, and the
    /// source index in the input value array for each entry
    c_col_ptr: Vec<usize>,
    c_row_idx: Vec<usize>,
    c_source: Vec<usize>,
    /// pattern of `L`, diagonal first in every column
    l_col_ptr: Vec<usize>,
    l_row_idx: Vec<usize>,
    /// supernode boundaries: columns `sn_ptr[s]..sn_ptr[s + 1]` share the
    /// pattern below their diagonal block
    sn_ptr: Vec<usize>,
    sn_of: Vec<usize>,
}

impl SymbolicCholesky {
    /// Minimum-degree ordering plus symbolic factorization of `q`'s pattern.
    pub fn analyze(q: &SymSparse) -> Self {
        let perm = minimum_degree(q);
        Self::analyze_with_ordering(q, perm)
    }

    pub fn analyze_with_ordering(q: &SymSparse, perm: Vec<usize>) -> Self {
        let n = q.dim();
        assert_eq!(perm.len(), n);
        // a postorder of the elimination tree has the same fill and numbers
        // every subtree contiguously, which lets chains form supernodes
        let (_, _, _, first_cols) = permuted_pattern(q, &perm);
        let post = postorder(&first_cols);
        let perm: Vec<usize> = post.iter().map(|&k| perm[k]).collect();
        let (c_col_ptr, c_row_idx, c_source, mut l_cols) = permuted_pattern(q, &perm);
        let (sn_ptr, sn_of) = amalgamate(&mut l_cols);

        let mut l_col_ptr = Vec::with_capacity(n + 1);
        let mut l_row_idx = Vec::new();
        l_col_ptr.push(0);
        for (j, rows) in l_cols.iter().enumerate() {
            l_row_idx.push(j);
            l_row_idx.extend_from_slice(rows);
            l_col_ptr.push(l_row_idx.len());
        }
        Self {
            dim: n,
            perm,
            input_col_ptr: q.col_ptr().to_vec(),
            input_row_idx: q.row_idx().to_vec(),
            c_col_ptr,
            c_row_idx,
            c_source,
            l_col_ptr,
            l_row_idx,
            sn_ptr,
            sn_of,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored entries of `L` (including the diagonal).
    pub fn factor_nnz(&self) -> usize {
        self.l_row_idx.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Numeric factorization of a matrix with the analysed pattern.
    pub fn factor(self: &Arc<Self>, q: &SymSparse) -> Result<CholFactor> {
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: q.dim(),
            });
        }
        if q.col_ptr() != self.input_col_ptr.as_slice() || q.row_idx() != self.input_row_idx.as_slice() {
            return Err(Error::PatternMismatch);
        }
        let n = self.dim;
        let qv = q.values();
        let lp = &self.l_col_ptr;
        let li = &self.l_row_idx;
        let n_sn = self.sn_ptr.len() - 1;
        let mut lx = vec![0.0; li.len()];
        // offset of every row of the current supernode's first column
        let mut relpos = vec![0usize; n];
        // descendants waiting to update a supernode, as linked lists
        let mut head = vec![usize::MAX; n_sn];
        let mut link = vec![usize::MAX; n_sn];
        // per descendant: index into its below-block rows of the next row to use
        let mut next_pos = vec![0usize; n_sn];
        let mut buf: Vec<f64> = Vec::new();
        let mut starts: Vec<usize> = Vec::new();

        for s in 0..n_sn {
            let (f, l) = (self.sn_ptr[s], self.sn_ptr[s + 1]);
            for (t, &r) in li[lp[f]..lp[f + 1]].iter().enumerate() {
                relpos[r] = t;
            }
            for c in f..l {
                let base = lp[c] - (c - f);
                for p in self.c_col_ptr[c]..self.c_col_ptr[c + 1] {
                    lx[base + relpos[self.c_row_idx[p]]] = qv[self.c_source[p]];
                }
            }

            let mut d = head[s];
            while d != usize::MAX {
                let following = link[d];
                let (fd, ld) = (self.sn_ptr[d], self.sn_ptr[d + 1]);
                let tail = &li[lp[fd] + (ld - fd)..lp[fd + 1]];
                let p0 = next_pos[d];
                let mut p1 = p0;
                while p1 < tail.len() && tail[p1] < l {
                    p1 += 1;
                }
                let (m, w) = (tail.len() - p0, p1 - p0);
                buf.clear();
                buf.resize(m * w, 0.0);
                starts.clear();
                starts.extend((fd..ld).map(|k| lp[k] + (ld - k) + p0));
                for j in 0..w {
                    let col = &mut buf[j * m + j..(j + 1) * m];
                    let mut chunks = starts.chunks_exact(4);
                    for c in &mut chunks {
                        let a: [&[f64]; 4] = std::array::from_fn(|t| &lx[c[t] + j..c[t] + m]);
                        let v = a.map(|x| x[0]);
                        let len = col.len();
                        let (a0, a1, a2, a3) = (&a[0][..len], &a[1][..len], &a[2][..len], &a[3][..len]);
                        for i in 0..len {
                            col[i] += a0[i] * v[0] + a1[i] * v[1] + a2[i] * v[2] + a3[i] * v[3];
                        }
                    }
                    for &st in chunks.remainder() {
                        let a = &lx[st + j..st + m];
                        let v = a[0];
                        for (x, &y) in col.iter_mut().zip(a) {
                            *x += y * v;
                        }
                    }
                }
                for j in 0..w {
                    let c = tail[p0 + j];
                    let base = lp[c] - (c - f);
                    for i in j..m {
                        lx[base + relpos[tail[p0 + i]]] -= buf[j * m + i];
                    }
                }
                next_pos[d] = p1;
                if p1 < tail.len() {
                    let t = self.sn_of[tail[p1]];
                    link[d] = head[t];
                    head[t] = d;
                }
                d = following;
            }

            for c in f..l {
                let (done, rest) = lx.split_at_mut(lp[c]);
                let col = &mut rest[..lp[c + 1] - lp[c]];
                for k in f..c {
                    let start = lp[k] + (c - k);
                    let src = &done[start..start + col.len()];
                    let ljk = src[0];
                    if ljk != 0.0 {
                        for (x, &v) in col.iter_mut().zip(src) {
                            *x -= v * ljk;
                        }
                    }
                }
                let pivot = col[0];
                if !(pivot > 0.0) || !pivot.is_finite() {
                    return Err(Error::NotPositiveDefinite { pivot: self.perm[c] });
                }
                let ljj = pivot.sqrt();
                col[0] = ljj;
                for x in &mut col[1..] {
                    *x /= ljj;
                }
            }

            let width = l - f;
            if lp[f + 1] - lp[f] > width {
                next_pos[s] = 0;
                let t = self.sn_of[li[lp[f] + width]];
                link[s] = head[t];
                head[t] = s;
            }
        }
        let logdet = 2.0 * (0..n).map(|j| lx[lp[j]].ln()).sum::<f64>();
        Ok(CholFactor {
            symbolic: Arc::clone(self),
            values: lx,
            logdet,
        })
    }
}

/// `C = P Q Pᵀ` as a lower-triangle pattern with source positions, plus the
/// below-diagonal pattern of every column of its Cholesky factor.
#[allow(clippy::type_complexity)]
fn permuted_pattern(q: &SymSparse, perm: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<usize>, Vec<Vec<usize>>) {
    let n = q.dim();
    let mut iperm = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        iperm[old] = new;
    }
    let mut counts = vec![0usize; n + 1];
    for (i, j, _) in q.iter() {
        let (a, b) = (iperm[i], iperm[j]);
        counts[a.min(b) + 1] += 1;
    }
    for j in 0..n {
        counts[j + 1] += counts[j];
    }
    let c_col_ptr = counts.clone();
    let mut next = counts;
    let mut c_row_idx = vec![0usize; q.nnz()];
    let mut c_source = vec![0usize; q.nnz()];
    for (src, (i, j, _)) in q.iter().enumerate() {
        let (a, b) = (iperm[i], iperm[j]);
        let (r, c) = if a >= b { (a, b) } else { (b, a) };
        let p = next[c];
        c_row_idx[p] = r;
        c_source[p] = src;
        next[c] += 1;
    }
    for j in 0..n {
        let range = c_col_ptr[j]..c_col_ptr[j + 1];
        let mut pairs: Vec<_> = c_row_idx[range.clone()]
            .iter()
            .copied()
            .zip(c_source[range.clone()].iter().copied())
            .collect();
        pairs.sort_unstable();
        for (k, (r, s)) in pairs.into_iter().enumerate() {
            c_row_idx[range.start + k] = r;
            c_source[range.start + k] = s;
        }
    }

    // struct(L_j) is struct(C_j) merged with the patterns of j's children
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut l_cols: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut mark = vec![usize::MAX; n];
    for j in 0..n {
        let mut set = Vec::new();
        mark[j] = j;
        for &r in &c_row_idx[c_col_ptr[j]..c_col_ptr[j + 1]] {
            if r > j && mark[r] != j {
                mark[r] = j;
                set.push(r);
            }
        }
        for &child in &children[j] {
            for &r in &l_cols[child] {
                if r > j && mark[r] != j {
                    mark[r] = j;
                    set.push(r);
                }
            }
        }
        set.sort_unstable();
        if let Some(&parent) = set.first() {
            children[parent].push(j);
        }
        l_cols.push(set);
    }
    (c_col_ptr, c_row_idx, c_source, l_cols)
}

/// Depth-first postorder of the elimination forest given by the column
/// patterns (parent = first below-diagonal row).
fn postorder(l_cols: &[Vec<usize>]) -> Vec<usize> {
    let n = l_cols.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut roots = Vec::new();
    for (j, rows) in l_cols.iter().enumerate() {
        match rows.first() {
            Some(&p) => children[p].push(j),
            None => roots.push(j),
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for root in roots {
        stack.push((root, 0));
        while let Some((node, k)) = stack.pop() {
            if k < children[node].len() {
                stack.push((node, k + 1));
                stack.push((children[node][k], 0));
            } else {
                order.push(node);
            }
        }
    }
    order
}

/// Groups consecutive columns into supernodes, padding column patterns with
/// explicit zeros where that is cheap. A column joins the supernode of its
/// predecessor only when it is that column's parent, so the padded pattern
/// stays closed under elimination.
fn amalgamate(l_cols: &mut [Vec<usize>]) -> (Vec<usize>, Vec<usize>) {
    let n = l_cols.len();
    let mut sn_ptr = vec![0];
    // entries and explicit zeros of the supernode being grown
    let (mut entries, mut zeros) = (0usize, 0usize);
    for j in 0..n {
        if j > 0 {
            let f = *sn_ptr.last().expect("non-empty");
            let width = j - f;
            let chained = l_cols[j - 1].first() == Some(&j);
            // tail of the current supernode is l_cols[j - 1]; it contains j
            let added = width * (l_cols[j].len() + 1 - l_cols[j - 1].len().min(l_cols[j].len() + 1));
            let merged_entries = entries + l_cols[j].len() + 1 + added;
            let merged_zeros = zeros + added;
            let frac = merged_zeros as f64 / merged_entries as f64;
            let accept = chained
                && (added == 0 || width + 1 <= 4 || (width < 16 && frac < 0.5) || (width < 48 && frac < 0.1) || frac < 0.05);
            if accept {
                entries = merged_entries;
                zeros = merged_zeros;
                continue;
            }
            close(l_cols, f, j);
            sn_ptr.push(j);
        }
        entries = l_cols[j].len() + 1;
        zeros = 0;
    }
    if n > 0 {
        close(l_cols, *sn_ptr.last().expect("non-empty"), n);
    }
    sn_ptr.push(n);
    let mut sn_of = vec![0; n];
    for s in 0..sn_ptr.len() - 1 {
        sn_of[sn_ptr[s]..sn_ptr[s + 1]].fill(s);
    }
    (sn_ptr, sn_of)
}

/// Gives columns `f..l` the pattern of the last one plus their diagonal block.
fn close(l_cols: &mut [Vec<usize>], f: usize, l: usize) {
    let tail = l_cols[l - 1].clone();
    for c in f..l - 1 {
        let mut rows: Vec<usize> = (c + 1..l).collect();
        rows.extend_from_slice(&tail);
        l_cols[c] = rows;
    }
}

/// Numeric Cholesky factor `P Q Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct CholFactor {
    symbolic: Arc<SymbolicCholesky>,
    values: Vec<f64>,
    logdet: f64,
}

/// Analyses and factors `q` in one go.
pub fn cholesky(q: &SymSparse) -> Result<CholFactor> {
    Arc::new(SymbolicCholesky::analyze(q)).factor(q)
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        self.symbolic.dim
    }

    /// `log |Q|`.
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Fill-reducing permutation, `perm[new] = old`.
    pub fn permutation(&self) -> &[usize] {
        &self.symbolic.perm
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    pub(crate) fn l_col_ptr(&self) -> &[usize] {
        &self.symbolic.l_col_ptr
    }

    pub(crate) fn l_row_idx(&self) -> &[usize] {
        &self.symbolic.l_row_idx
    }

    pub(crate) fn l_values(&self) -> &[f64] {
        &self.values
    }

    /// `L` as `(row, col, value)` triplets in the permuted ordering.
    pub fn factor_entries(&self) -> Vec<(usize, usize, f64)> {
        let lp = self.l_col_ptr();
        let li = self.l_row_idx();
        (0..self.dim())
            .flat_map(|j| (lp[j]..lp[j + 1]).map(move |p| (li[p], j, self.values[p])))
            .collect()
    }

    fn forward(&self, x: &mut [f64]) {
        let (lp, li, lx) = (self.l_col_ptr(), self.l_row_idx(), &self.values);
        for j in 0..self.dim() {
            let xj = x[j] / lx[lp[j]];
            x[j] = xj;
            for p in lp[j] + 1..lp[j + 1] {
                x[li[p]] -= lx[p] * xj;
            }
        }
    }

    fn backward(&self, x: &mut [f64]) {
        let (lp, li, lx) = (self.l_col_ptr(), self.l_row_idx(), &self.values);
        for j in (0..self.dim()).rev() {
            let mut s = x[j];
            for p in lp[j] + 1..lp[j + 1] {
                s -= lx[p] * x[li[p]];
            }
            x[j] = s / lx[lp[j]];
        }
    }

    /// Solves `Q x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rhs.len(),
            });
        }
        let perm = self.permutation();
        let mut work: Vec<f64> = perm.iter().map(|&old| rhs[old]).collect();
        self.forward(&mut work);
        self.backward(&mut work);
        let mut out = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            out[old] = work[new];
        }
        Ok(out)
    }

    /// Solves `Q X = B` column by column.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rhs.iter().map(|b| self.solve(b)).collect()
    }

    /// `Pᵀ L⁻ᵀ z`: maps standard normal `z` to a draw with precision `Q`.
    pub fn sample_transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if z.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: z.len(),
            });
        }
        let mut work = z.to_vec();
        self.backward(&mut work);
        let mut out = vec![0.0; n];
        for (new, &old) in self.permutation().iter().enumerate() {
            out[old] = work[new];
        }
        Ok(out)
    }
}
