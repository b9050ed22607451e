//! Random-walk penalty matrices.
//!
//! Open random walks of order `k` use `DᵀD` with `D` the `k`-th forward
//! difference operator. Cyclic walks treat the first and last vertices as
//! neighbours and are circulant: first-order rows cycle `(2, -1, 0, …, 0, -1)`
//! and second-order rows cycle `(6, -4, 1, 0, …, 0, 1, -4)`.

use std::f64::consts::PI;

use crate::sparse::{kron, SymSparse};
use crate::{Error, Result};

/// Diagonal jitter for a standalone penalty.
pub const DEFAULT_JITTER: f64 = 1e-5;

/// Diagonal jitter used when a penalty is the precision of a latent component.
pub const COMPONENT_JITTER: f64 = 1e-3;

pub const HOURS_PER_DAY: usize = 24;
pub const DAYS_PER_WEEK: usize = 7;
pub const HOURS_PER_WEEK: usize = HOURS_PER_DAY * DAYS_PER_WEEK;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    /// Difference order, 1 or 2.
    pub order: usize,
    pub cyclic: bool,
    /// Number of vertices.
    pub n: usize,
    /// Added to the diagonal after construction.
    pub jitter: f64,
}

impl PenaltySpec {
    pub fn new(order: usize, cyclic: bool, n: usize) -> Self {
        Self {
            order,
            cyclic,
            n,
            jitter: DEFAULT_JITTER,
        }
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.order) {
            return Err(Error::InvalidSpec(format!("penalty order must be 1 or 2, got {}", self.order)));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::InvalidSpec(format!("jitter must be non-negative, got {}", self.jitter)));
        }
        let min = if self.cyclic { 3 } else { self.order + 1 };
        if self.n < min {
            return Err(Error::TooFewVertices { n: self.n, min });
        }
        Ok(())
    }

    /// Rank of the unjittered penalty: `n - 1` for cyclic walks of either
    /// order, `n - order` for open walks.
    pub fn rank(&self) -> usize {
        if self.cyclic {
            self.n - 1
        } else {
            self.n - self.order
        }
    }

    /// First row of the circulant (wrapped onto `n` positions).
    fn circulant_row(&self) -> Vec<f64> {
        let stencil: &[(isize, f64)] = match self.order {
            1 => &[(0, 2.0), (1, -1.0), (-1, -1.0)],
            _ => &[(0, 6.0), (1, -4.0), (-1, -4.0), (2, 1.0), (-2, 1.0)],
        };
        let n = self.n as isize;
        let mut row = vec![0.0; self.n];
        for &(offset, v) in stencil {
            row[offset.rem_euclid(n) as usize] += v;
        }
        row
    }
}

/// The penalty matrix `K` described by `spec`, plus `spec.jitter` on the diagonal.
pub fn penalty_matrix(spec: &PenaltySpec) -> Result<SymSparse> {
    spec.validate()?;
    let n = spec.n;
    let mut triplets = Vec::new();
    if spec.cyclic {
        let row = spec.circulant_row();
        for i in 0..n {
            for (offset, &v) in row.iter().enumerate() {
                let j = (i + offset) % n;
                if v != 0.0 && j <= i {
                    triplets.push((i, j, v));
                }
            }
        }
    } else {
        let d = difference_rows(n, spec.order);
        // DᵀD: every difference row contributes its outer product
        for row in &d {
            for &(a, va) in row {
                for &(b, vb) in row {
                    if b <= a {
                        triplets.push((a, b, va * vb));
                    }
                }
            }
        }
    }
    // from_triplets only sums duplicates inside one triangle, which is what we
    // want here because every pair was emitted with row >= col
    let k = SymSparse::from_triplets(n, &triplets)?;
    Ok(if spec.jitter > 0.0 { k.add_diag(spec.jitter) } else { k })
}

/// Rows of the `order`-th forward difference operator as sparse `(col, value)` lists.
fn difference_rows(n: usize, order: usize) -> Vec<Vec<(usize, f64)>> {
    let coeffs: &[f64] = if order == 1 { &[-1.0, 1.0] } else { &[1.0, -2.0, 1.0] };
    (0..n - order)
        .map(|i| coeffs.iter().enumerate().map(|(k, &c)| (i + k, c)).collect())
        .collect()
}

/// Which random walk smooths the day-of-week factor of the joint weekly precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayPenalty {
    /// First-order cyclic walk over days.
    #[default]
    Rw1c,
    /// Second-order cyclic walk over days.
    Rw2c,
}

/// 168×168 precision of the joint daily-weekly trend, with `jitter` on the diagonal.
///
/// Days are the outer index and hours the inner, so hour-of-week `h`
/// (1-based) sits at row `h - 1 = 24·(day - 1) + (hour - 1)`.
pub fn joint_weekly_penalty(jitter: f64) -> Result<SymSparse> {
    joint_weekly_penalty_with(DayPenalty::Rw1c, jitter)
}

pub fn joint_weekly_penalty_with(days: DayPenalty, jitter: f64) -> Result<SymSparse> {
    if !(jitter >= 0.0) {
        return Err(Error::InvalidSpec(format!("jitter must be non-negative, got {jitter}")));
    }
    let day_order = match days {
        DayPenalty::Rw1c => 1,
        DayPenalty::Rw2c => 2,
    };
    let week = penalty_matrix(&PenaltySpec::new(day_order, true, DAYS_PER_WEEK).with_jitter(0.0))?;
    let hours = penalty_matrix(&PenaltySpec::new(2, true, HOURS_PER_DAY).with_jitter(0.0))?;
    let q = kron(&week, &hours)?;
    Ok(if jitter > 0.0 { q.add_diag(jitter) } else { q })
}

/// Rank of the unjittered joint weekly precision: product of the factor ranks.
pub fn joint_weekly_rank() -> usize {
    (DAYS_PER_WEEK - 1) * (HOURS_PER_DAY - 1)
}

/// Log of the product of the nonzero eigenvalues of the unjittered penalty.
///
/// Cyclic penalties use the closed-form circulant spectrum; open penalties use
/// `pdet(DᵀD) = det(DDᵀ)`.
pub fn log_generalized_det(spec: &PenaltySpec) -> Result<f64> {
    spec.validate()?;
    if spec.jitter != 0.0 {
        return Err(Error::InvalidSpec("generalized determinant needs jitter = 0".into()));
    }
    if spec.cyclic {
        // the k = 0 mode is the constant null vector
        Ok(cyclic_eigenvalues(spec)?[1..].iter().map(|l| l.ln()).sum())
    } else {
        let d = difference_rows(spec.n, spec.order);
        let m = d.len();
        let mut triplets = Vec::new();
        for a in 0..m {
            for b in 0..=a {
                let v: f64 = d[a]
                    .iter()
                    .filter_map(|&(ca, va)| d[b].iter().find(|&&(cb, _)| cb == ca).map(|&(_, vb)| va * vb))
                    .sum();
                if v != 0.0 {
                    triplets.push((a, b, v));
                }
            }
        }
        let ddt = SymSparse::from_triplets(m, &triplets)?;
        Ok(crate::sparse::cholesky(&ddt)?.logdet())
    }
}

/// Eigenvalues of a cyclic penalty (circulant spectrum), index `k = 0..n`.
pub fn cyclic_eigenvalues(spec: &PenaltySpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if !spec.cyclic {
        return Err(Error::InvalidSpec("closed-form spectrum only for cyclic penalties".into()));
    }
    let row = spec.circulant_row();
    let n = spec.n as f64;
    Ok((0..spec.n)
        .map(|k| {
            let lambda: f64 = row
                .iter()
                .enumerate()
                .map(|(m, &c)| c * (2.0 * PI * (k * m) as f64 / n).cos())
                .sum();
            lambda + spec.jitter
        })
        .collect())
}
