use crate::model::Constraints;
use crate::sparse::{selected_inverse, CholFactor, SparseRows, SymSparse};
use crate::{Error, Result};

/// Relative pivot below which a constraint system is treated as singular.
const SINGULAR_PIVOT: f64 = 1e-12;

/// Dense Cholesky of a small SPD matrix, lower triangle in place.
pub(crate) fn dense_cholesky(mut w: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let k = w.len();
    let scale = (0..k).map(|i| w[i][i].abs()).fold(0.0, f64::max);
    for j in 0..k {
        let d = w[j][j] - (0..j).map(|p| w[j][p] * w[j][p]).sum::<f64>();
        if !(d > SINGULAR_PIVOT * scale) {
            return Err(Error::SingularConstraint);
        }
        let ljj = d.sqrt();
        w[j][j] = ljj;
        for i in j + 1..k {
            let s = w[i][j] - (0..j).map(|p| w[i][p] * w[j][p]).sum::<f64>();
            w[i][j] = s / ljj;
        }
    }
    Ok(w)
}

pub(crate) fn dense_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = l.len();
    let mut x = b.to_vec();
    for i in 0..k {
        x[i] = (x[i] - (0..i).map(|p| l[i][p] * x[p]).sum::<f64>()) / l[i][i];
    }
    for i in (0..k).rev() {
        x[i] = (x[i] - (i + 1..k).map(|p| l[p][i] * x[p]).sum::<f64>()) / l[i][i];
    }
    x
}

/// Conditioning-by-kriging correction for `A_c x = e`.
#[derive(Debug, Clone)]
struct Kriging {
    rows: Vec<(Vec<(usize, f64)>, f64)>,
    /// `V = Q⁻¹ A_cᵀ`, one vector per constraint
    v: Vec<Vec<f64>>,
    /// Cholesky factor of `W = A_c V`
    w_chol: Vec<Vec<f64>>,
}

impl Kriging {
    /// `uᵀ W⁻¹ u`.
    fn quad(&self, u: &[f64]) -> f64 {
        let s = dense_solve(&self.w_chol, u);
        u.iter().zip(&s).map(|(a, b)| a * b).sum()
    }

    /// `Vᵀ w`.
    fn project(&self, w: &[(usize, f64)]) -> Vec<f64> {
        self.v
            .iter()
            .map(|col| w.iter().map(|&(i, x)| x * col[i]).sum())
            .collect()
    }
}

/// Exact Gaussian posterior of the latent field, optionally conditioned on
/// linear equality constraints.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    mean: Vec<f64>,
    marginal_sd: Vec<f64>,
    factor: CholFactor,
    base_mean: Vec<f64>,
    base_var: Vec<f64>,
    selinv: SymSparse,
    kriging: Option<Kriging>,
}

impl GaussianPosterior {
    /// Posterior with precision factor `factor` and mean `mean`.
    pub fn new(mean: Vec<f64>, factor: CholFactor) -> Self {
        let selinv = selected_inverse(&factor);
        let base_var = selinv.diag();
        Self {
            marginal_sd: base_var.iter().map(|v| v.max(0.0).sqrt()).collect(),
            mean: mean.clone(),
            factor,
            base_mean: mean,
            base_var,
            selinv,
            kriging: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn marginal_sd(&self) -> &[f64] {
        &self.marginal_sd
    }

    pub fn is_constrained(&self) -> bool {
        self.kriging.is_some()
    }

    /// Cholesky factor of the posterior precision.
    pub fn precision_factor(&self) -> &CholFactor {
        &self.factor
    }

    /// Mean before any constraint correction.
    pub fn unconstrained_mean(&self) -> &[f64] {
        &self.base_mean
    }

    /// Posterior covariance entry `(i, j)`; `(i, j)` must lie on the pattern of
    /// the precision factor (e.g. both indices in one observation's support).
    pub fn covariance_entry(&self, i: usize, j: usize) -> f64 {
        let base = self.selinv.get(i, j);
        match &self.kriging {
            None => base,
            Some(k) => {
                let ui: Vec<f64> = k.v.iter().map(|c| c[i]).collect();
                let uj: Vec<f64> = k.v.iter().map(|c| c[j]).collect();
                base - ui.iter().zip(dense_solve(&k.w_chol, &uj)).map(|(a, b)| a * b).sum::<f64>()
            }
        }
    }

    /// Mean and sd of `A x` for every row of `a`.
    pub fn predict(&self, a: &SparseRows) -> (Vec<f64>, Vec<f64>) {
        let mean = a.mul_vec(&self.mean);
        let sd = (0..a.nrows())
            .map(|r| {
                let (cols, vals) = a.row(r);
                let mut var = 0.0;
                for p in 0..cols.len() {
                    for q in 0..cols.len() {
                        var += vals[p] * vals[q] * self.selinv.get(cols[p], cols[q]);
                    }
                }
                if let Some(k) = &self.kriging {
                    let w: Vec<(usize, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
                    var -= k.quad(&k.project(&w));
                }
                var.max(0.0).sqrt()
            })
            .collect();
        (mean, sd)
    }
}

/// Conditions `post` on `A_c x = e` by kriging.
///
/// Constraints already applied to `post` are kept; rows that repeat an
/// existing constraint are ignored, so applying the same constraints twice
/// equals applying them once.
pub fn apply_sum_to_zero(post: &GaussianPosterior, constraints: &Constraints) -> Result<GaussianPosterior> {
    let n = post.dim();
    if constraints.rows.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: constraints.rows.ncols(),
        });
    }
    let mut rows = post.kriging.as_ref().map(|k| k.rows.clone()).unwrap_or_default();
    for r in 0..constraints.rows.nrows() {
        let (c, v) = constraints.rows.row(r);
        let row: Vec<(usize, f64)> = c.iter().copied().zip(v.iter().copied()).collect();
        let key = (row, constraints.e[r]);
        let same = |a: &(Vec<(usize, f64)>, f64)| {
            a.1.to_bits() == key.1.to_bits()
                && a.0.len() == key.0.len()
                && a.0.iter().zip(&key.0).all(|(x, y)| x.0 == y.0 && x.1.to_bits() == y.1.to_bits())
        };
        if !rows.iter().any(same) {
            rows.push(key);
        }
    }
    if rows.is_empty() {
        return Ok(post.clone());
    }

    let rhs: Vec<Vec<f64>> = rows
        .iter()
        .map(|(row, _)| {
            let mut d = vec![0.0; n];
            row.iter().for_each(|&(i, x)| d[i] += x);
            d
        })
        .collect();
    let v = post.factor.solve_many(&rhs)?;
    let k = rows.len();
    let w: Vec<Vec<f64>> = (0..k)
        .map(|r| (0..k).map(|s| rows[r].0.iter().map(|&(i, x)| x * v[s][i]).sum()).collect())
        .collect();
    // symmetrize before factoring
    let w: Vec<Vec<f64>> = (0..k).map(|r| (0..k).map(|s| 0.5 * (w[r][s] + w[s][r])).collect()).collect();
    let w_chol = dense_cholesky(w)?;
    let kriging = Kriging { rows, v, w_chol };

    let residual: Vec<f64> = kriging
        .rows
        .iter()
        .map(|(row, e)| row.iter().map(|&(i, x)| x * post.base_mean[i]).sum::<f64>() - e)
        .collect();
    let lambda = dense_solve(&kriging.w_chol, &residual);
    let mut mean = post.base_mean.clone();
    for (col, l) in kriging.v.iter().zip(&lambda) {
        for (m, c) in mean.iter_mut().zip(col) {
            *m -= c * l;
        }
    }
    let marginal_sd = (0..n)
        .map(|i| {
            let u: Vec<f64> = kriging.v.iter().map(|c| c[i]).collect();
            (post.base_var[i] - kriging.quad(&u)).max(0.0).sqrt()
        })
        .collect();
    Ok(GaussianPosterior {
        mean,
        marginal_sd,
        factor: post.factor.clone(),
        base_mean: post.base_mean.clone(),
        base_var: post.base_var.clone(),
        selinv: post.selinv.clone(),
        kriging: Some(kriging),
    })
}

/// Posterior mean and sd of a linear combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LincombSummary {
    pub mean: f64,
    pub sd: f64,
}

impl LincombSummary {
    pub fn lower(&self) -> f64 {
        self.mean - 1.96 * self.sd
    }

    pub fn upper(&self) -> f64 {
        self.mean + 1.96 * self.sd
    }
}

/// `wᵀx` under the (constrained) posterior, using one solve with the
/// posterior precision.
pub fn lincomb(post: &GaussianPosterior, weights: &[(usize, f64)]) -> Result<LincombSummary> {
    lincomb_many(post, std::slice::from_ref(&weights.to_vec())).map(|mut v| v.remove(0))
}

pub fn lincomb_many(post: &GaussianPosterior, combos: &[Vec<(usize, f64)>]) -> Result<Vec<LincombSummary>> {
    let n = post.dim();
    let mut rhs = vec![0.0; n];
    combos
        .iter()
        .map(|w| {
            if let Some(&(i, _)) = w.iter().find(|&&(i, _)| i >= n) {
                return Err(Error::IndexOutOfRange { row: i, col: 0, dim: n });
            }
            rhs.iter_mut().for_each(|v| *v = 0.0);
            w.iter().for_each(|&(i, x)| rhs[i] += x);
            let s = post.factor.solve(&rhs)?;
            let mut var: f64 = rhs.iter().zip(&s).map(|(a, b)| a * b).sum();
            if let Some(k) = &post.kriging {
                var -= k.quad(&k.project(w));
            }
            Ok(LincombSummary {
                mean: w.iter().map(|&(i, x)| x * post.mean[i]).sum(),
                sd: var.max(0.0).sqrt(),
            })
        })
        .collect()
}

/// Dense posterior covariance among the latent indices `idx`.
pub fn covariance_block(post: &GaussianPosterior, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
    let n = post.dim();
    if let Some(&i) = idx.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { row: i, col: 0, dim: n });
    }
    let mut unit = vec![0.0; n];
    let mut cov = Vec::with_capacity(idx.len());
    for &j in idx {
        unit[j] = 1.0;
        let s = post.factor.solve(&unit)?;
        unit[j] = 0.0;
        cov.push(idx.iter().map(|&i| s[i]).collect::<Vec<f64>>());
    }
    if let Some(k) = &post.kriging {
        let u: Vec<Vec<f64>> = idx.iter().map(|&i| k.v.iter().map(|c| c[i]).collect()).collect();
        let solved: Vec<Vec<f64>> = u.iter().map(|ui| dense_solve(&k.w_chol, ui)).collect();
        for (a, row) in cov.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v -= u[a].iter().zip(&solved[b]).map(|(x, y)| x * y).sum::<f64>();
            }
        }
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::cholesky;

    fn identity_posterior(mean: Vec<f64>) -> GaussianPosterior {
        let n = mean.len();
        GaussianPosterior::new(mean, cholesky(&SymSparse::identity(n)).unwrap())
    }

    fn sum_rows(n: usize) -> Constraints {
        let mut rows = SparseRows::new(n);
        rows.push_row((0..n).map(|i| (i, 1.0)));
        Constraints { rows, e: vec![0.0] }
    }

    #[test]
    fn centering_example() {
        let post = identity_posterior(vec![1.0, 1.0]);
        let c = apply_sum_to_zero(&post, &sum_rows(2)).unwrap();
        assert!(c.mean().iter().all(|m| m.abs() < 1e-15));
        for sd in c.marginal_sd() {
            assert!((sd - 0.5f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn idempotent() {
        let post = identity_posterior(vec![1.0, 2.0, -0.5]);
        let once = apply_sum_to_zero(&post, &sum_rows(3)).unwrap();
        let twice = apply_sum_to_zero(&once, &sum_rows(3)).unwrap();
        assert_eq!(once.mean(), twice.mean());
        assert_eq!(once.marginal_sd(), twice.marginal_sd());
    }

    #[test]
    fn dependent_constraints_are_singular() {
        let post = identity_posterior(vec![1.0, 2.0]);
        let mut rows = SparseRows::new(2);
        rows.push_row([(0, 1.0), (1, 1.0)]);
        rows.push_row([(0, 2.0), (1, 2.0)]);
        let c = Constraints { rows, e: vec![0.0, 0.0] };
        assert!(matches!(apply_sum_to_zero(&post, &c), Err(Error::SingularConstraint)));
    }

    #[test]
    fn unit_lincomb_is_marginal() {
        let post = identity_posterior(vec![0.3, -1.0]);
        let s = lincomb(&post, &[(1, 1.0)]).unwrap();
        assert_eq!(s.mean, -1.0);
        assert!((s.sd - 1.0).abs() < 1e-15);
        assert!(matches!(lincomb(&post, &[(2, 1.0)]), Err(Error::IndexOutOfRange { .. })));
    }
}
