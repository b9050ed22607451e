use super::{CholFactor, SymSparse};

/// Entries of `Q⁻¹` on the pattern of the Cholesky factor (Takahashi
/// recursions), returned in the original ordering.
///
/// The diagonal holds the exact marginal variances.
pub fn selected_inverse(f: &CholFactor) -> SymSparse {
    let n = f.dim();
    let lp = f.l_col_ptr();
    let li = f.l_row_idx();
    let lx = f.l_values();
    let mut sig = vec![0.0; lx.len()];

    // Σ[max(a,b), min(a,b)] by binary search in the permuted factor layout
    let lookup = |sig: &[f64], a: usize, b: usize| -> f64 {
        let (r, c) = if a >= b { (a, b) } else { (b, a) };
        let start = lp[c];
        match li[start..lp[c + 1]].binary_search(&r) {
            Ok(p) => sig[start + p],
            Err(_) => unreachable!("selected inverse entry ({r}, {c}) outside factor pattern"),
        }
    };

    for j in (0..n).rev() {
        let diag_pos = lp[j];
        let ljj = lx[diag_pos];
        let below = diag_pos + 1..lp[j + 1];
        for p in below.clone() {
            let i = li[p];
            let s: f64 = below.clone().map(|q| lx[q] * lookup(&sig, i, li[q])).sum();
            sig[p] = -s / ljj;
        }
        let s: f64 = below.map(|q| lx[q] * sig[q]).sum();
        sig[diag_pos] = 1.0 / (ljj * ljj) - s / ljj;
    }

    let perm = f.permutation();
    let entries = (0..n).flat_map(|j| (lp[j]..lp[j + 1]).map(move |p| (perm[li[p]], perm[j], p)));
    let entries: Vec<_> = entries.map(|(a, b, p)| (a, b, sig[p])).collect();
    SymSparse::from_lower_unpruned(n, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::cholesky;

    #[test]
    fn diagonal_inverse() {
        let q = SymSparse::diagonal(&[2.0, 4.0]);
        let s = selected_inverse(&cholesky(&q).unwrap());
        let d = s.diag();
        assert!((d[0] - 0.5).abs() < 1e-15 && (d[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_inverse() {
        let q = SymSparse::from_triplets(2, &[(0, 0, 2.0), (1, 0, -1.0), (1, 1, 2.0)]).unwrap();
        let s = selected_inverse(&cholesky(&q).unwrap());
        for v in s.diag() {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }
        assert!((s.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
    }
}
