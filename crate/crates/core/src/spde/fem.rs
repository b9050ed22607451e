use super::TriMesh;
use crate::sparse::SymSparse;
use crate::{Error, Result};

/// Finite element matrices of a mesh together with the operator order α.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdeOperator {
    /// lumped (diagonal) mass matrix `C`
    mass: Vec<f64>,
    /// P1 stiffness matrix `G`
    stiffness: SymSparse,
    alpha: u32,
}

/// Lumped mass and stiffness matrices of the piecewise-linear basis, α = 2.
pub fn fem_matrices(mesh: &TriMesh) -> SpdeOperator {
    let n = mesh.n_vertices();
    let mut mass = vec![0.0; n];
    let mut triplets = Vec::with_capacity(6 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        let p = tri.map(|v| mesh.vertices()[v]);
        // gradients of the hat functions are (b_i, c_i) / (2·area)
        let b: [f64; 3] = std::array::from_fn(|i| p[(i + 1) % 3][1] - p[(i + 2) % 3][1]);
        let c: [f64; 3] = std::array::from_fn(|i| p[(i + 2) % 3][0] - p[(i + 1) % 3][0]);
        for i in 0..3 {
            mass[tri[i]] += area / 3.0;
            for j in 0..3 {
                let (r, s) = (tri[i], tri[j]);
                if r >= s {
                    triplets.push((r, s, (b[i] * b[j] + c[i] * c[j]) / (4.0 * area)));
                }
            }
        }
    }
    let stiffness = SymSparse::from_lower_unpruned(n, triplets);
    SpdeOperator {
        mass,
        stiffness,
        alpha: 2,
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl SpdeOperator {
    /// Same matrices with operator order `alpha ∈ {1, 2, 3}`.
    pub fn with_alpha(mut self, alpha: u32) -> Result<Self> {
        if !(1..=3).contains(&alpha) {
            return Err(Error::InvalidSpec(format!("SPDE order alpha must be 1, 2 or 3, got {alpha}")));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    pub fn mass_diag(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass(&self) -> SymSparse {
        SymSparse::diagonal(&self.mass)
    }

    pub fn stiffness(&self) -> &SymSparse {
        &self.stiffness
    }

    /// `T_0 = C`, `T_1 = G`, `T_{k+1} = G C⁻¹ T_k` for `k < alpha`.
    pub fn terms(&self) -> Vec<SymSparse> {
        let inv_mass: Vec<f64> = self.mass.iter().map(|m| 1.0 / m).collect();
        let mut terms = vec![self.mass(), self.stiffness.clone()];
        while terms.len() <= self.alpha as usize {
            let last = terms.last().expect("non-empty");
            let next = self
                .stiffness
                .sandwich(&inv_mass, last)
                .expect("dimensions agree by construction");
            terms.push(next);
        }
        terms.truncate(self.alpha as usize + 1);
        terms
    }

    /// Coefficients `binom(α, i)·κ^{2(α−i)}` of `T_i` in the precision (before τ).
    pub fn term_coefficients(&self, kappa: f64) -> Vec<f64> {
        (0..=self.alpha)
            .map(|i| binomial(self.alpha, i) * kappa.powi(2 * (self.alpha - i) as i32))
            .collect()
    }

    /// Marginal variance of the stationary field for `α ≥ 2`:
    /// `1 / ((α−1)·4π·κ^{2(α−1)}·τ)`.
    pub fn marginal_variance(&self, kappa: f64, tau: f64) -> Option<f64> {
        (self.alpha >= 2).then(|| {
            let nu = (self.alpha - 1) as f64;
            1.0 / (nu * 4.0 * std::f64::consts::PI * kappa.powf(2.0 * nu) * tau)
        })
    }

    /// `τ` giving marginal variance `sigma2` for `α ≥ 2`.
    pub fn tau_for_variance(&self, kappa: f64, sigma2: f64) -> Option<f64> {
        self.marginal_variance(kappa, sigma2)
    }
}

/// Empirical range (distance at which correlation is ≈ 0.13) for `α ≥ 2`.
pub fn practical_range(kappa: f64, alpha: u32) -> f64 {
    let nu = alpha.saturating_sub(1).max(1) as f64;
    (8.0 * nu).sqrt() / kappa
}

/// `κ` giving the practical range `range`.
pub fn kappa_for_range(range: f64, alpha: u32) -> f64 {
    practical_range(1.0, alpha) / range
}

/// `τ·(κ²C + G)(C⁻¹(κ²C + G))^{α−1}`.
pub fn spde_precision(op: &SpdeOperator, kappa: f64, tau: f64) -> Result<SymSparse> {
    if !(kappa > 0.0) || !(tau > 0.0) || !kappa.is_finite() || !tau.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "SPDE parameters must be positive, got kappa={kappa}, tau={tau}"
        )));
    }
    let k2 = kappa * kappa;
    let k1 = op.stiffness.linear_combination(1.0, &op.mass(), k2)?;
    let inv_mass: Vec<f64> = op.mass.iter().map(|m| 1.0 / m).collect();
    let mut q = k1.clone();
    for _ in 1..op.alpha {
        q = k1.sandwich(&inv_mass, &q)?;
    }
    Ok(q.scale(tau))
}
