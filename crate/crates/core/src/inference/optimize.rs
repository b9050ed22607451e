use serde::{Deserialize, Serialize};

use super::posterior::{apply_sum_to_zero, dense_cholesky, dense_solve, GaussianPosterior};
use super::prepared::PreparedModel;
use crate::model::{HyperKind, ModelSpec, Prior, Scale};
use crate::{Error, Result};

/// Default warm-start schedule of diagonal additions to the latent prior.
pub const DEFAULT_SCHEDULE: [f64; 5] = [1e4, 1e2, 1.0, 1e-2, 1e-5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeOptions {
    /// decreasing diagonal additions, one optimizer stage each
    pub schedule: Vec<f64>,
    pub max_evals: usize,
    /// converged when a fresh simplex around the optimum improves it by less than this
    pub tolerance: f64,
    /// initial simplex edge in log-hyperparameter units
    pub initial_step: f64,
    /// box on the optimizer coordinates (log hyperparameters, with the SPDE
    /// precision taken as `log τ + 2(α−1)·log κ`)
    pub log_lower: f64,
    pub log_upper: f64,
    /// starting point on the natural scale; derived from the data when absent
    pub initial: Option<Vec<f64>>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            schedule: DEFAULT_SCHEDULE.to_vec(),
            max_evals: 5000,
            tolerance: 1e-6,
            initial_step: 1.0,
            log_lower: -15.0,
            log_upper: 20.0,
            initial: None,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::InvalidConfig("schedule must have at least one stage".into()));
        }
        if self.schedule.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidConfig("schedule entries must be non-negative".into()));
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig("schedule must be strictly decreasing".into()));
        }
        if self.max_evals == 0 || !(self.tolerance > 0.0) || !(self.initial_step > 0.0) {
            return Err(Error::InvalidConfig(
                "max_evals, tolerance and initial_step must be positive".into(),
            ));
        }
        if !(self.log_lower < self.log_upper) {
            return Err(Error::InvalidConfig("log_lower must be below log_upper".into()));
        }
        Ok(())
    }
}

/// Outcome of one stage of the schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub extra_diag: f64,
    pub evaluations: usize,
    pub objective: f64,
    pub log_hyper: Vec<f64>,
    pub converged: bool,
    /// evaluations where a precision matrix was not positive definite
    pub not_positive_definite: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperEstimate {
    pub names: Vec<String>,
    /// natural scale
    pub values: Vec<f64>,
    /// log marginal likelihood plus log hyperprior at `values`
    pub log_posterior: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub hyper: HyperEstimate,
    pub posterior: GaussianPosterior,
    pub log_marginal_likelihood: f64,
    pub fitted_mean: Vec<f64>,
    pub fitted_sd: Vec<f64>,
    pub stages: Vec<StageReport>,
    pub converged: bool,
    /// Kullback–Leibler divergence of the Gaussian approximation; the
    /// posterior is exactly Gaussian so this is identically zero.
    pub kld: f64,
}

/// Starting hyperparameters: noise precision from the response variance,
/// unit precisions and a spatial range of a fifth of the domain size.
pub fn default_initial(spec: &ModelSpec, y: &[f64]) -> Vec<f64> {
    let n = y.len().max(1) as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let noise = if var > 0.0 { 1.0 / var } else { 1.0 };
    spec.hypers()
        .iter()
        .map(|h| match h.kind {
            HyperKind::NoisePrecision => noise,
            HyperKind::Precision | HyperKind::SpdeTau => 1.0,
            HyperKind::SpdeKappa => spec.kappa_prior_centre(),
        })
        .collect()
}

/// Linear change of coordinates used by the optimizer: the SPDE precision
/// `log τ` is replaced by `log τ + 2(α−1)·log κ` (minus the log marginal
/// variance up to a constant), which removes the ridge between τ and κ.
struct Coordinates {
    pairs: Vec<(usize, usize, f64)>,
}

impl Coordinates {
    fn new(spec: &ModelSpec) -> Self {
        let pairs = spec
            .components()
            .iter()
            .filter_map(|c| match (&c.prior, c.scale) {
                (Prior::Spde(op), Scale::Spde { tau, kappa }) => {
                    Some((tau, kappa, 2.0 * op.alpha().saturating_sub(1) as f64))
                }
                _ => None,
            })
            .collect();
        Self { pairs }
    }

    fn to_internal(&self, log_hyper: &[f64]) -> Vec<f64> {
        let mut x = log_hyper.to_vec();
        for &(tau, kappa, p) in &self.pairs {
            x[tau] += p * log_hyper[kappa];
        }
        x
    }

    fn to_log_hyper(&self, internal: &[f64]) -> Vec<f64> {
        let mut x = internal.to_vec();
        for &(tau, kappa, p) in &self.pairs {
            x[tau] -= p * internal[kappa];
        }
        x
    }
}

struct NelderMead<'f, F: FnMut(&[f64]) -> f64> {
    f: &'f mut F,
    lower: f64,
    upper: f64,
    evals: usize,
    max_evals: usize,
    best: (Vec<f64>, f64),
}

impl<F: FnMut(&[f64]) -> f64> NelderMead<'_, F> {
    fn eval(&mut self, x: Vec<f64>) -> (Vec<f64>, f64) {
        let x: Vec<f64> = x.into_iter().map(|v| v.clamp(self.lower, self.upper)).collect();
        self.evals += 1;
        let fx = (self.f)(&x);
        // maximizing: keep the best point seen so far
        if fx > self.best.1 {
            self.best = (x.clone(), fx);
        }
        (x, fx)
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.max_evals
    }

    /// One simplex search from `x0`, maximizing. Stops when the simplex
    /// values agree to `ftol` or the budget runs out.
    fn run(&mut self, x0: &[f64], step: f64, ftol: f64) {
        let d = x0.len();
        let mut simplex = vec![self.eval(x0.to_vec())];
        for i in 0..d {
            if self.exhausted() {
                return;
            }
            let mut x = x0.to_vec();
            // step inward if the vertex would leave the box
            x[i] = if x[i] + step <= self.upper { x[i] + step } else { x[i] - step };
            simplex.push(self.eval(x));
        }
        // dimension-adaptive coefficients (Gao & Han, 2012)
        let df = d as f64;
        let (expand, contract, shrink) = (1.0 + 2.0 / df, 0.75 - 0.5 / df, 1.0 - 1.0 / df);
        let order = |s: &mut Vec<(Vec<f64>, f64)>| {
            s.sort_by(|a, b| b.1.total_cmp(&a.1));
        };
        loop {
            order(&mut simplex);
            let (best, worst) = (simplex[0].1, simplex[d].1);
            let spread = if best.is_finite() { best - worst } else { f64::INFINITY };
            if (spread.is_finite() && spread <= ftol) || self.exhausted() {
                return;
            }
            let centroid: Vec<f64> = (0..d)
                .map(|k| simplex[..d].iter().map(|p| p.0[k]).sum::<f64>() / d as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[d].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let reflected = self.eval(along(1.0));
            if reflected.1 > simplex[0].1 {
                let expanded = self.eval(along(expand));
                simplex[d] = if expanded.1 > reflected.1 { expanded } else { reflected };
                continue;
            }
            if reflected.1 > simplex[d - 1].1 {
                simplex[d] = reflected;
                continue;
            }
            let contracted = if reflected.1 > simplex[d].1 {
                self.eval(along(contract))
            } else {
                self.eval(along(-contract))
            };
            if contracted.1 > reflected.1.max(simplex[d].1) {
                simplex[d] = contracted;
                continue;
            }
            // shrink toward the best vertex
            let anchor = simplex[0].0.clone();
            for p in simplex.iter_mut().skip(1) {
                if self.exhausted() {
                    return;
                }
                let x: Vec<f64> = anchor.iter().zip(&p.0).map(|(a, b)| a + shrink * (b - a)).collect();
                *p = self.eval(x);
            }
        }
    }
}

/// Maximizes `f` over the box `[lower, upper]^d` by restarted Nelder–Mead.
///
/// After every simplex search the simplex is rebuilt around the incumbent
/// with a tenth of the previous edge and the search is repeated; the result
/// is converged once such a refresh improves the objective by less than
/// `tolerance`. Returns `(argmax, max, evaluations, converged)`.
pub fn nelder_mead_maximize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    tolerance: f64,
    max_evals: usize,
    (lower, upper): (f64, f64),
) -> (Vec<f64>, f64, usize, bool) {
    const MIN_STEP: f64 = 1e-3;
    let mut nm = NelderMead {
        f: &mut f,
        lower,
        upper,
        evals: 0,
        max_evals,
        best: (x0.to_vec(), f64::NEG_INFINITY),
    };
    let mut step = step;
    let mut converged = false;
    let mut previous = f64::NEG_INFINITY;
    while !nm.exhausted() {
        let start = nm.best.0.clone();
        nm.run(&start, step, tolerance);
        let current = nm.best.1;
        if current.is_finite() && current - previous < tolerance && !nm.exhausted() {
            converged = true;
            break;
        }
        previous = current;
        step = (0.1 * step).max(MIN_STEP);
    }
    let (x, fx) = nm.best;
    (x, fx, nm.evals, converged)
}

/// Newton refinement of a simplex optimum from finite differences.
///
/// The simplex settles once objective values agree, which can leave the
/// point loose along a flat ridge. A few damped Newton steps with central
/// difference derivatives pin the stationary point down. Coordinates within
/// one difference step of the box stay fixed. Returns
/// `(argmax, max, evaluations)`; steps that do not improve are rejected.
pub fn newton_polish<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    f0: f64,
    (lower, upper): (f64, f64),
) -> (Vec<f64>, f64, usize) {
    const H: f64 = 1e-3;
    const ITERATIONS: usize = 4;
    const STEP_TOL: f64 = 1e-7;
    let (mut x, mut fx) = (x0.to_vec(), f0);
    let mut evals = 0;
    for _ in 0..ITERATIONS {
        let free: Vec<usize> = (0..x.len()).filter(|&i| x[i] - H >= lower && x[i] + H <= upper).collect();
        let k = free.len();
        if k == 0 || !fx.is_finite() {
            break;
        }
        let mut at = |moves: &[(usize, f64)]| {
            let mut z = x.clone();
            for &(i, d) in moves {
                z[free[i]] += d;
            }
            evals += 1;
            f(&z)
        };
        let mut grad = vec![0.0; k];
        let mut hess = vec![vec![0.0; k]; k];
        for i in 0..k {
            let (fp, fm) = (at(&[(i, H)]), at(&[(i, -H)]));
            grad[i] = (fp - fm) / (2.0 * H);
            hess[i][i] = (fp - 2.0 * fx + fm) / (H * H);
            for j in 0..i {
                let v = (at(&[(i, H), (j, H)]) - at(&[(i, H), (j, -H)]) - at(&[(i, -H), (j, H)])
                    + at(&[(i, -H), (j, -H)]))
                    / (4.0 * H * H);
                hess[i][j] = v;
                hess[j][i] = v;
            }
        }
        if !grad.iter().chain(hess.iter().flatten()).all(|v| v.is_finite()) {
            break;
        }
        // solve (λI - H) s = g with the smallest shift that makes it definite
        let scale = (0..k).map(|i| hess[i][i].abs()).fold(1e-8, f64::max);
        let mut shift = 0.0;
        let step = loop {
            let m: Vec<Vec<f64>> = (0..k)
                .map(|i| (0..k).map(|j| -hess[i][j] + if i == j { shift } else { 0.0 }).collect())
                .collect();
            match dense_cholesky(m) {
                Ok(l) => break Some(dense_solve(&l, &grad)),
                Err(_) if shift < 1e6 * scale => shift = if shift == 0.0 { 1e-6 * scale } else { 10.0 * shift },
                Err(_) => break None,
            }
        };
        let Some(step) = step else { break };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let mut z = x.clone();
            for (i, s) in step.iter().enumerate() {
                z[free[i]] = (z[free[i]] + t * s).clamp(lower, upper);
            }
            evals += 1;
            let fz = f(&z);
            if fz > fx {
                (x, fx) = (z, fz);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let size = step.iter().fold(0.0, |m: f64, s| m.max(t * s.abs()));
        if !accepted || size < STEP_TOL {
            break;
        }
    }
    (x, fx, evals)
}

/// Empirical-Bayes fit: maximizes the log marginal likelihood plus
/// hyperprior over log hyperparameters through the warm-start schedule, then
/// returns the constrained posterior at the final stage's optimum.
pub fn optimize_hyper(spec: &ModelSpec, y: &[f64], options: &OptimizeOptions) -> Result<FitResult> {
    options.validate()?;
    let prepared = PreparedModel::new(spec, y)?;
    let initial = match &options.initial {
        Some(h) => {
            spec.check_hyper(h)?;
            h.clone()
        }
        None => default_initial(spec, y),
    };
    let coords = Coordinates::new(spec);
    let log_initial: Vec<f64> = initial.iter().map(|v| v.ln()).collect();
    let mut x: Vec<f64> = coords
        .to_internal(&log_initial)
        .into_iter()
        .map(|v| v.clamp(options.log_lower, options.log_upper))
        .collect();
    let mut stages = Vec::new();
    for (stage, &extra) in options.schedule.iter().enumerate() {
        let last = stage + 1 == options.schedule.len();
        let mut not_pd = 0usize;
        let mut failure = None;
        let objective = |internal: &[f64]| -> f64 {
            let hyper: Vec<f64> = coords.to_log_hyper(internal).iter().map(|v| v.exp()).collect();
            match prepared.objective(&hyper, extra) {
                Ok(v) if v.is_finite() => v,
                Ok(_) => f64::NEG_INFINITY,
                Err(Error::NotPositiveDefinite { .. }) => {
                    not_pd += 1;
                    f64::NEG_INFINITY
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            }
        };
        let mut objective = objective;
        let bounds = (options.log_lower, options.log_upper);
        let (mut best, mut value, mut evaluations, converged) = nelder_mead_maximize(
            &mut objective,
            &x,
            options.initial_step,
            options.tolerance,
            options.max_evals,
            bounds,
        );
        if last && value.is_finite() {
            let polished = newton_polish(&mut objective, &best, value, bounds);
            (best, value) = (polished.0, polished.1);
            evaluations += polished.2;
        }
        if let Some(e) = failure {
            return Err(e);
        }
        if !value.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: 0 });
        }
        log::info!(
            "stage diag={extra:e}: objective {value:.6} after {evaluations} evaluations{}",
            if converged { "" } else { " (not converged)" }
        );
        stages.push(StageReport {
            extra_diag: extra,
            evaluations,
            objective: value,
            log_hyper: coords.to_log_hyper(&best),
            converged,
            not_positive_definite: not_pd,
        });
        x = best;
    }

    let final_extra = *options.schedule.last().expect("validated non-empty");
    let hyper: Vec<f64> = coords.to_log_hyper(&x).iter().map(|v| v.exp()).collect();
    let eval = prepared.evaluate(&hyper, final_extra)?;
    let log_ml = eval.log_ml;
    let unconstrained = GaussianPosterior::new(eval.mean, eval.post_factor);
    let posterior = apply_sum_to_zero(&unconstrained, &spec.constraints())?;
    let (fitted_mean, fitted_sd) = posterior.predict(prepared.incidence());
    let converged = stages.last().is_some_and(|s| s.converged);
    Ok(FitResult {
        hyper: HyperEstimate {
            names: spec.hypers().iter().map(|h| h.name.clone()).collect(),
            log_posterior: log_ml + spec.log_hyperprior(&hyper),
            values: hyper,
        },
        posterior,
        log_marginal_likelihood: log_ml,
        fitted_mean,
        fitted_sd,
        stages,
        converged,
        kld: 0.0,
    })
}
