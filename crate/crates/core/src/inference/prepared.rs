use std::f64::consts::PI;
use std::sync::Arc;

use super::posterior::GaussianPosterior;
use crate::model::{Coef, ModelSpec, PriorTerm};
use crate::sparse::{SparseRows, SymSparse, SymbolicCholesky};
use crate::{Error, Result};

/// A fixed sparsity pattern with every term pre-aligned to it, so that
/// assembling a matrix at new hyperparameters is a weighted sum of value
/// arrays and the symbolic factorization is shared.
#[derive(Debug)]
struct Template {
    pattern: SymSparse,
    terms: Vec<(Coef, Vec<usize>, Vec<f64>)>,
    diag_pos: Vec<usize>,
    symbolic: Arc<SymbolicCholesky>,
}

impl Template {
    fn new(dim: usize, terms: Vec<PriorTerm>) -> Self {
        let entries = terms
            .iter()
            .flat_map(|t| t.matrix.iter().map(|(i, j, _)| (i, j, 0.0)))
            .chain((0..dim).map(|i| (i, i, 0.0)));
        let pattern = SymSparse::from_lower_unpruned(dim, entries);
        let aligned = terms
            .into_iter()
            .map(|t| {
                let pos = t
                    .matrix
                    .iter()
                    .map(|(i, j, _)| pattern.position(i, j).expect("term entry in union pattern"))
                    .collect();
                (t.coef, pos, t.matrix.values().to_vec())
            })
            .collect();
        let diag_pos = (0..dim).map(|i| pattern.position(i, i).expect("full diagonal")).collect();
        let symbolic = Arc::new(SymbolicCholesky::analyze(&pattern));
        Self {
            pattern,
            terms: aligned,
            diag_pos,
            symbolic,
        }
    }

    fn matrix(&self, hyper: &[f64], extra_diag: f64) -> SymSparse {
        let mut values = vec![0.0; self.pattern.nnz()];
        for (coef, pos, vals) in &self.terms {
            let c = coef.eval(hyper);
            for (&p, &v) in pos.iter().zip(vals) {
                values[p] += c * v;
            }
        }
        if extra_diag != 0.0 {
            for &p in &self.diag_pos {
                values[p] += extra_diag;
            }
        }
        self.pattern.with_values(values)
    }
}

/// A model bound to a response vector with everything that does not depend
/// on the hyperparameters precomputed.
#[derive(Debug)]
pub struct PreparedModel<'a> {
    spec: &'a ModelSpec,
    a: SparseRows,
    y: Vec<f64>,
    yty: f64,
    aty: Vec<f64>,
    prior: Template,
    post: Template,
}

/// Pieces of one evaluation of the marginal likelihood.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub log_ml: f64,
    pub post_factor: crate::sparse::CholFactor,
    pub mean: Vec<f64>,
}

impl<'a> PreparedModel<'a> {
    pub fn new(spec: &'a ModelSpec, y: &[f64]) -> Result<Self> {
        if y.len() != spec.n_obs() {
            return Err(Error::DimensionMismatch {
                expected: spec.n_obs(),
                found: y.len(),
            });
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::RangeError(format!("non-finite response {bad}")));
        }
        let dim = spec.latent_dim();
        let a = spec.incidence();
        let prior_terms = spec.prior_terms();
        let mut post_terms = prior_terms.clone();
        post_terms.push(PriorTerm {
            matrix: a.gram(),
            coef: Coef::Hyper { index: 0, factor: 1.0 },
        });
        Ok(Self {
            spec,
            aty: a.transpose_mul_vec(y),
            yty: y.iter().map(|v| v * v).sum(),
            y: y.to_vec(),
            a,
            prior: Template::new(dim, prior_terms),
            post: Template::new(dim, post_terms),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn incidence(&self) -> &SparseRows {
        &self.a
    }

    /// Joint prior precision plus `extra_diag·I`.
    pub fn prior_precision(&self, hyper: &[f64], extra_diag: f64) -> Result<SymSparse> {
        self.spec.check_hyper(hyper)?;
        Ok(self.prior.matrix(hyper, extra_diag))
    }

    /// `Q_prior + extra_diag·I + τ_ε AᵀA`.
    pub fn posterior_precision(&self, hyper: &[f64], extra_diag: f64) -> Result<SymSparse> {
        self.spec.check_hyper(hyper)?;
        Ok(self.post.matrix(hyper, extra_diag))
    }

    pub(crate) fn evaluate(&self, hyper: &[f64], extra_diag: f64) -> Result<Evaluation> {
        self.spec.check_hyper(hyper)?;
        let prior = self.prior.symbolic.factor(&self.prior.matrix(hyper, extra_diag))?;
        let post_factor = self.post.symbolic.factor(&self.post.matrix(hyper, extra_diag))?;
        let noise = hyper[0];
        let b: Vec<f64> = self.aty.iter().map(|v| noise * v).collect();
        let mean = post_factor.solve(&b)?;
        let fit: f64 = b.iter().zip(&mean).map(|(b, m)| b * m).sum();
        let n = self.y.len() as f64;
        let log_ml = 0.5 * prior.logdet() - 0.5 * post_factor.logdet() + 0.5 * n * (noise / (2.0 * PI)).ln()
            - 0.5 * (noise * self.yty - fit);
        Ok(Evaluation {
            log_ml,
            post_factor,
            mean,
        })
    }

    /// Log marginal likelihood of the jittered, unconstrained model.
    pub fn log_marginal_likelihood(&self, hyper: &[f64], extra_diag: f64) -> Result<f64> {
        Ok(self.evaluate(hyper, extra_diag)?.log_ml)
    }

    /// Empirical-Bayes objective: log marginal likelihood plus hyperprior.
    pub fn objective(&self, hyper: &[f64], extra_diag: f64) -> Result<f64> {
        Ok(self.log_marginal_likelihood(hyper, extra_diag)? + self.spec.log_hyperprior(hyper))
    }

    /// Unconstrained Gaussian posterior.
    pub fn posterior(&self, hyper: &[f64], extra_diag: f64) -> Result<GaussianPosterior> {
        let eval = self.evaluate(hyper, extra_diag)?;
        Ok(GaussianPosterior::new(eval.mean, eval.post_factor))
    }
}

/// Log marginal likelihood of `y` under `spec` at `hyper`.
pub fn log_marginal_likelihood(spec: &ModelSpec, hyper: &[f64], y: &[f64]) -> Result<f64> {
    PreparedModel::new(spec, y)?.log_marginal_likelihood(hyper, 0.0)
}

/// Unconstrained posterior of the latent field.
pub fn posterior(spec: &ModelSpec, hyper: &[f64], y: &[f64]) -> Result<GaussianPosterior> {
    PreparedModel::new(spec, y)?.posterior(hyper, 0.0)
}
