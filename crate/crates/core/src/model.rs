//! Hierarchical additive model: intercept, all-sites and per-site
//! hour-of-week trends, annual spline and SPDE spatial effect, assembled into
//! one latent Gaussian field.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::{column_offsets, evaluate, KnotGrid};
use crate::penalty::{joint_weekly_penalty_with, DayPenalty, COMPONENT_JITTER, HOURS_PER_DAY, HOURS_PER_WEEK};
use crate::sparse::{SparseRows, SymSparse};
use crate::spde::{fem_matrices, SpdeOperator, TriMesh};
use crate::{Error, Result};

/// Rate of the Γ(1, rate) hyperprior on every precision.
pub const HYPERPRIOR_RATE: f64 = 5e-5;
/// Variance of the normal prior on `log κ`.
pub const LOG_KAPPA_PRIOR_VARIANCE: f64 = 10.0;
pub const INTERCEPT_PRECISION: f64 = 1e-6;
pub const DAYS_PER_YEAR: u32 = 365;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// log of the measured concentration
    pub response: f64,
    pub dayno: u32,
    pub hrofday: u32,
    /// 1 = Sunday
    pub dayofweek: u32,
    pub site: i64,
    pub location: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationTable {
    pub rows: Vec<Observation>,
}

/// `24·(dayofweek − 1) + hrofday`, in `1..=168`.
pub fn hour_of_week(dayofweek: u32, hrofday: u32) -> Result<u32> {
    if !(1..=7).contains(&dayofweek) {
        return Err(Error::RangeError(format!("dayofweek {dayofweek} outside 1..7")));
    }
    if !(1..=24).contains(&hrofday) {
        return Err(Error::RangeError(format!("hrofday {hrofday} outside 1..24")));
    }
    Ok(HOURS_PER_DAY as u32 * (dayofweek - 1) + hrofday)
}

/// Hour-of-week column of the table.
pub fn derive_hour_of_week(table: &ObservationTable) -> Result<Vec<u32>> {
    table.rows.iter().map(|r| hour_of_week(r.dayofweek, r.hrofday)).collect()
}

impl ObservationTable {
    pub fn new(rows: Vec<Observation>) -> Result<Self> {
        let table = Self { rows };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.rows {
            if !r.response.is_finite() {
                return Err(Error::RangeError(format!("non-finite response {}", r.response)));
            }
            if !(1..=366).contains(&r.dayno) {
                return Err(Error::RangeError(format!("dayno {} outside 1..366", r.dayno)));
            }
            hour_of_week(r.dayofweek, r.hrofday)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn responses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.response).collect()
    }

    /// Distinct site ids in increasing order.
    pub fn sites(&self) -> Vec<i64> {
        self.rows.iter().map(|r| r.site).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn locations(&self) -> Vec<[f64; 2]> {
        self.rows.iter().map(|r| r.location).collect()
    }

    /// Distinct locations in first-appearance order.
    pub fn unique_locations(&self) -> Vec<[f64; 2]> {
        let mut seen = BTreeSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert((r.location[0].to_bits(), r.location[1].to_bits())))
            .map(|r| r.location)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentKind {
    Intercept,
    GenericPrecision,
    SplineBasis,
    Spde,
}

/// Prior precision of a component before hyperparameter scaling.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Fixed(SymSparse),
    Spde(SpdeOperator),
}

/// How a component's prior is scaled by the hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Fixed,
    /// multiplied by the precision at this hyperparameter index
    Precision(usize),
    Spde { tau: usize, kappa: usize },
}

/// Whether component jitter is multiplied by the component precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JitterMode {
    /// `τ·(K + ε·I)`
    #[default]
    Scaled,
    /// `τ·K + ε·I`
    Absolute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentComponent {
    pub name: String,
    pub kind: ComponentKind,
    pub prior: Prior,
    /// `n_obs × size` map from the component to the linear predictor
    pub incidence: SparseRows,
    pub sum_to_zero: bool,
    pub scale: Scale,
    pub jitter: f64,
}

impl LatentComponent {
    pub fn new(
        name: impl Into<String>,
        kind: ComponentKind,
        prior: Prior,
        incidence: SparseRows,
        sum_to_zero: bool,
        scale: Scale,
    ) -> Self {
        Self {
            name: name.into(),
            kind,
            prior,
            incidence,
            sum_to_zero,
            scale,
            jitter: 0.0,
        }
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn size(&self) -> usize {
        self.incidence.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HyperKind {
    NoisePrecision,
    Precision,
    SpdeTau,
    SpdeKappa,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperSpec {
    pub name: String,
    pub kind: HyperKind,
}

impl HyperSpec {
    pub fn new(name: impl Into<String>, kind: HyperKind) -> Self {
        Self { name: name.into(), kind }
    }
}

/// Options for [`build_standard_model`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    /// share one precision across all site-specific trends
    pub tie_site_precisions: bool,
    pub spde_alpha: u32,
    pub max_edge: f64,
    pub component_jitter: f64,
    pub jitter_mode: JitterMode,
    pub day_penalty: DayPenalty,
    pub annual_knots: usize,
    pub annual_degree: usize,
    pub intercept_precision: f64,
    pub site_trends: bool,
    pub spatial: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            tie_site_precisions: true,
            spde_alpha: 2,
            max_edge: 0.1,
            component_jitter: COMPONENT_JITTER,
            jitter_mode: JitterMode::Scaled,
            day_penalty: DayPenalty::Rw1c,
            annual_knots: 10,
            annual_degree: 3,
            intercept_precision: INTERCEPT_PRECISION,
            site_trends: true,
            spatial: true,
        }
    }
}

/// Hyperparameter-dependent coefficient of one prior term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Coef {
    Const(f64),
    Hyper { index: usize, factor: f64 },
    Spde { tau: usize, kappa: usize, power: i32, factor: f64 },
}

impl Coef {
    pub(crate) fn eval(&self, hyper: &[f64]) -> f64 {
        match *self {
            Coef::Const(c) => c,
            Coef::Hyper { index, factor } => factor * hyper[index],
            Coef::Spde { tau, kappa, power, factor } => factor * hyper[tau] * hyper[kappa].powi(power),
        }
    }
}

/// One term `coef(θ)·matrix` of the joint prior precision.
#[derive(Debug, Clone)]
pub(crate) struct PriorTerm {
    pub matrix: SymSparse,
    pub coef: Coef,
}

/// Linear equality constraints `A_c x = e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    pub rows: SparseRows,
    pub e: Vec<f64>,
}

impl Constraints {
    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }
}

/// Joint prior precision, stacked incidence and constraints at one
/// hyperparameter point.
#[derive(Debug, Clone)]
pub struct JointModel {
    pub q_prior: SymSparse,
    pub a: SparseRows,
    pub constraints: Constraints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    components: Vec<LatentComponent>,
    hypers: Vec<HyperSpec>,
    n_obs: usize,
    jitter_mode: JitterMode,
    sites: Vec<i64>,
}

impl ModelSpec {
    /// `hypers[0]` must be the noise precision.
    pub fn new(n_obs: usize, components: Vec<LatentComponent>, hypers: Vec<HyperSpec>) -> Result<Self> {
        let intercepts = components.iter().filter(|c| c.kind == ComponentKind::Intercept).count();
        if intercepts != 1 {
            return Err(Error::InvalidSpec(format!("model needs exactly one intercept, found {intercepts}")));
        }
        if hypers.first().map(|h| h.kind) != Some(HyperKind::NoisePrecision)
            || hypers.iter().skip(1).any(|h| h.kind == HyperKind::NoisePrecision)
        {
            return Err(Error::InvalidSpec("the first hyperparameter, and only it, is the noise precision".into()));
        }
        let check = |i: usize, kind: HyperKind| -> Result<()> {
            match hypers.get(i) {
                Some(h) if h.kind == kind => Ok(()),
                _ => Err(Error::InvalidSpec(format!("hyperparameter {i} is not a {kind:?}"))),
            }
        };
        let mut names = BTreeSet::new();
        for c in &components {
            if !names.insert(c.name.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate component name {}", c.name)));
            }
            if c.incidence.nrows() != n_obs {
                return Err(Error::DimensionMismatch {
                    expected: n_obs,
                    found: c.incidence.nrows(),
                });
            }
            let prior_dim = match &c.prior {
                Prior::Fixed(k) => k.dim(),
                Prior::Spde(op) => op.dim(),
            };
            if prior_dim != c.size() {
                return Err(Error::DimensionMismatch {
                    expected: c.size(),
                    found: prior_dim,
                });
            }
            match (c.scale, &c.prior) {
                (Scale::Fixed, Prior::Fixed(_)) => {}
                (Scale::Precision(i), Prior::Fixed(_)) => check(i, HyperKind::Precision)?,
                (Scale::Spde { tau, kappa }, Prior::Spde(_)) => {
                    check(tau, HyperKind::SpdeTau)?;
                    check(kappa, HyperKind::SpdeKappa)?;
                }
                _ => return Err(Error::InvalidSpec(format!("component {} mixes prior and scale kinds", c.name))),
            }
            if !(c.jitter >= 0.0) {
                return Err(Error::InvalidSpec(format!("component {} has negative jitter", c.name)));
            }
        }
        Ok(Self {
            components,
            hypers,
            n_obs,
            jitter_mode: JitterMode::Scaled,
            sites: Vec::new(),
        })
    }

    pub fn with_jitter_mode(mut self, mode: JitterMode) -> Self {
        self.jitter_mode = mode;
        self
    }

    pub fn components(&self) -> &[LatentComponent] {
        &self.components
    }

    pub fn hypers(&self) -> &[HyperSpec] {
        &self.hypers
    }

    pub fn hyper_dim(&self) -> usize {
        self.hypers.len()
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn jitter_mode(&self) -> JitterMode {
        self.jitter_mode
    }

    /// Site ids of the site-specific trends, in block order.
    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    pub fn latent_dim(&self) -> usize {
        self.components.iter().map(LatentComponent::size).sum()
    }

    /// Starting index of every component in the latent vector.
    pub fn offsets(&self) -> Vec<usize> {
        self.components
            .iter()
            .scan(0, |acc, c| {
                let start = *acc;
                *acc += c.size();
                Some(start)
            })
            .collect()
    }

    /// Offset and component with the given name.
    pub fn component(&self, name: &str) -> Option<(usize, &LatentComponent)> {
        self.offsets()
            .into_iter()
            .zip(&self.components)
            .find(|(_, c)| c.name == name)
    }

    pub fn check_hyper(&self, hyper: &[f64]) -> Result<()> {
        if hyper.len() != self.hypers.len() {
            return Err(Error::HyperDimensionMismatch {
                expected: self.hypers.len(),
                found: hyper.len(),
            });
        }
        if let Some(bad) = hyper.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidSpec(format!("hyperparameters must be positive and finite, got {bad}")));
        }
        Ok(())
    }

    /// Γ(1, 5e-5) log densities of the precisions plus, for the SPDE, a
    /// normal log density on `log κ` centred where the range is a fifth of
    /// the mesh's size.
    pub fn log_hyperprior(&self, hyper: &[f64]) -> f64 {
        let centre = self.kappa_prior_centre();
        self.hypers
            .iter()
            .zip(hyper)
            .map(|(h, &t)| match h.kind {
                HyperKind::SpdeKappa => {
                    let z = t.ln() - centre.ln();
                    -0.5 * (2.0 * PI * LOG_KAPPA_PRIOR_VARIANCE).ln() - 0.5 * z * z / LOG_KAPPA_PRIOR_VARIANCE
                }
                _ => HYPERPRIOR_RATE.ln() - HYPERPRIOR_RATE * t,
            })
            .sum()
    }

    /// `κ` whose range `√8/κ` is 20% of the square root of the SPDE mesh
    /// area (1 without a spatial component).
    pub fn kappa_prior_centre(&self) -> f64 {
        self.components
            .iter()
            .find_map(|c| match &c.prior {
                Prior::Spde(op) => Some(8f64.sqrt() / (0.2 * op.mass_diag().iter().sum::<f64>().sqrt())),
                _ => None,
            })
            .unwrap_or(1.0)
    }

    /// Stacked incidence matrix `A = [A_1 … A_m]`.
    pub fn incidence(&self) -> SparseRows {
        let blocks: Vec<&SparseRows> = self.components.iter().map(|c| &c.incidence).collect();
        SparseRows::hstack(&blocks)
    }

    /// One `1ᵀx = 0` row per sum-to-zero component.
    pub fn constraints(&self) -> Constraints {
        let mut rows = SparseRows::new(self.latent_dim());
        for (offset, c) in self.offsets().into_iter().zip(&self.components) {
            if c.sum_to_zero {
                rows.push_row((offset..offset + c.size()).map(|i| (i, 1.0)));
            }
        }
        let e = vec![0.0; rows.nrows()];
        Constraints { rows, e }
    }

    /// Decomposition of the joint prior precision into hyperparameter-scaled
    /// terms in global coordinates.
    pub(crate) fn prior_terms(&self) -> Vec<PriorTerm> {
        let dim = self.latent_dim();
        let mut terms = Vec::new();
        for (offset, c) in self.offsets().into_iter().zip(&self.components) {
            let place = |m: &SymSparse| m.embed(dim, offset);
            match (&c.prior, c.scale) {
                (Prior::Fixed(k), scale) => {
                    let coef = |factor: f64| match scale {
                        Scale::Precision(index) => Coef::Hyper { index, factor },
                        _ => Coef::Const(factor),
                    };
                    terms.push(PriorTerm {
                        matrix: place(k),
                        coef: coef(1.0),
                    });
                    if c.jitter > 0.0 {
                        let coef = match self.jitter_mode {
                            JitterMode::Scaled => coef(c.jitter),
                            JitterMode::Absolute => Coef::Const(c.jitter),
                        };
                        terms.push(PriorTerm {
                            matrix: place(&SymSparse::identity(c.size())),
                            coef,
                        });
                    }
                }
                (Prior::Spde(op), Scale::Spde { tau, kappa }) => {
                    let alpha = op.alpha() as i32;
                    let binom = op.term_coefficients(1.0);
                    for (i, t) in op.terms().iter().enumerate() {
                        terms.push(PriorTerm {
                            matrix: place(t),
                            coef: Coef::Spde {
                                tau,
                                kappa,
                                power: 2 * (alpha - i as i32),
                                factor: binom[i],
                            },
                        });
                    }
                    if c.jitter > 0.0 {
                        terms.push(PriorTerm {
                            matrix: place(&SymSparse::identity(c.size())),
                            coef: Coef::Const(c.jitter),
                        });
                    }
                }
                (Prior::Spde(_), _) => unreachable!("validated in ModelSpec::new"),
            }
        }
        terms
    }
}

/// Joint prior precision, incidence and constraints at `hyper`
/// (natural scale, in the order of [`ModelSpec::hypers`]).
pub fn assemble_joint_precision(spec: &ModelSpec, hyper: &[f64]) -> Result<JointModel> {
    assemble_joint_precision_with(spec, hyper, 0.0)
}

/// As [`assemble_joint_precision`] with `extra_diag` added to every latent
/// prior diagonal entry.
pub fn assemble_joint_precision_with(spec: &ModelSpec, hyper: &[f64], extra_diag: f64) -> Result<JointModel> {
    spec.check_hyper(hyper)?;
    let dim = spec.latent_dim();
    let entries = spec.prior_terms().into_iter().flat_map(|t| {
        let c = t.coef.eval(hyper);
        t.matrix.iter().map(move |(i, j, v)| (i, j, c * v)).collect::<Vec<_>>()
    });
    let mut q = SymSparse::from_triplets(dim, &entries.collect::<Vec<_>>())?;
    if extra_diag > 0.0 {
        q = q.add_diag(extra_diag);
    }
    Ok(JointModel {
        q_prior: q,
        a: spec.incidence(),
        constraints: spec.constraints(),
    })
}

/// Annual basis grid on days `1..=365`.
pub fn annual_grid(options: &ModelOptions) -> Result<KnotGrid> {
    KnotGrid::new(
        1.0,
        DAYS_PER_YEAR as f64,
        options.annual_knots,
        options.annual_degree,
        true,
    )
}

/// Centered annual basis rows at the given day numbers (366 maps to 365).
pub fn annual_basis(options: &ModelOptions, days: &[u32]) -> Result<Vec<Vec<f64>>> {
    let grid = annual_grid(options)?;
    let reference: Vec<f64> = (1..=DAYS_PER_YEAR).map(f64::from).collect();
    let offsets = column_offsets(&grid, &reference)?;
    let x: Vec<f64> = days.iter().map(|&d| d.min(DAYS_PER_YEAR) as f64).collect();
    let b = evaluate(&grid, &x)?;
    Ok((0..b.nrows())
        .map(|i| b.row(i).iter().zip(&offsets).map(|(v, m)| v - m).collect())
        .collect())
}

pub const INTERCEPT: &str = "intercept";
pub const TREND_ALL: &str = "hrofweek";
pub const ANNUAL: &str = "dayno";
pub const SPATIAL: &str = "spde";

/// Name of the site-specific trend component.
pub fn site_trend_name(site: i64) -> String {
    format!("hrofweek.{site}")
}

/// Standard model: intercept, all-sites hour-of-week trend, one masked trend
/// per site, centered cyclic annual spline and SPDE spatial effect.
pub fn build_standard_model(table: &ObservationTable, mesh: &TriMesh, options: &ModelOptions) -> Result<ModelSpec> {
    if table.is_empty() {
        return Err(Error::EmptyAfterFiltering);
    }
    table.validate()?;
    let sites = table.sites();
    if sites.len() < 2 {
        return Err(Error::SiteCountError(sites.len()));
    }
    let n = table.len();
    let how = derive_hour_of_week(table)?;
    let weekly = joint_weekly_penalty_with(options.day_penalty, 0.0)?;

    let mut hypers = vec![HyperSpec::new("noise", HyperKind::NoisePrecision)];
    let mut add_hyper = |name: String, kind| {
        hypers.push(HyperSpec::new(name, kind));
        hypers.len() - 1
    };
    let mut components = Vec::new();

    let mut ones = SparseRows::new(1);
    (0..n).for_each(|_| ones.push_row([(0, 1.0)]));
    components.push(LatentComponent::new(
        INTERCEPT,
        ComponentKind::Intercept,
        Prior::Fixed(SymSparse::diagonal(&[options.intercept_precision])),
        ones,
        false,
        Scale::Fixed,
    ));

    let trend_incidence = |site: Option<i64>| {
        let mut a = SparseRows::new(HOURS_PER_WEEK);
        for (r, &h) in table.rows.iter().zip(&how) {
            if site.is_none_or(|s| s == r.site) {
                a.push_row([(h as usize - 1, 1.0)]);
            } else {
                a.push_row([]);
            }
        }
        a
    };
    let tau_all = add_hyper(format!("precision for {TREND_ALL}"), HyperKind::Precision);
    components.push(
        LatentComponent::new(
            TREND_ALL,
            ComponentKind::GenericPrecision,
            Prior::Fixed(weekly.clone()),
            trend_incidence(None),
            true,
            Scale::Precision(tau_all),
        )
        .with_jitter(options.component_jitter),
    );

    if options.site_trends {
        let mut tied = None;
        for &site in &sites {
            let name = site_trend_name(site);
            let tau = if options.tie_site_precisions {
                *tied.get_or_insert_with(|| add_hyper("precision for hrofweek.site".into(), HyperKind::Precision))
            } else {
                add_hyper(format!("precision for {name}"), HyperKind::Precision)
            };
            components.push(
                LatentComponent::new(
                    name,
                    ComponentKind::GenericPrecision,
                    Prior::Fixed(weekly.clone()),
                    trend_incidence(Some(site)),
                    true,
                    Scale::Precision(tau),
                )
                .with_jitter(options.component_jitter),
            );
        }
    }

    let days: Vec<u32> = table.rows.iter().map(|r| r.dayno).collect();
    let rows = annual_basis(options, &days)?;
    let ncol = rows.first().map_or(0, Vec::len);
    let mut annual = SparseRows::new(ncol);
    for row in rows {
        annual.push_row(row.into_iter().enumerate());
    }
    let tau_z = add_hyper(format!("precision for {ANNUAL}"), HyperKind::Precision);
    components.push(LatentComponent::new(
        ANNUAL,
        ComponentKind::SplineBasis,
        Prior::Fixed(SymSparse::identity(ncol)),
        annual,
        true,
        Scale::Precision(tau_z),
    ));

    if options.spatial {
        let op = fem_matrices(mesh).with_alpha(options.spde_alpha)?;
        let mut vertex_of: HashMap<(u64, u64), usize> = HashMap::new();
        let mut a = SparseRows::new(mesh.n_vertices());
        for r in &table.rows {
            let key = (r.location[0].to_bits(), r.location[1].to_bits());
            let v = match vertex_of.get(&key) {
                Some(&v) => v,
                None => {
                    let v = mesh
                        .find_vertex(r.location)
                        .ok_or(Error::MissingMeshVertex(r.location[0], r.location[1]))?;
                    vertex_of.insert(key, v);
                    v
                }
            };
            a.push_row([(v, 1.0)]);
        }
        let tau = add_hyper(format!("tau for {SPATIAL}"), HyperKind::SpdeTau);
        let kappa = add_hyper(format!("kappa for {SPATIAL}"), HyperKind::SpdeKappa);
        components.push(LatentComponent::new(
            SPATIAL,
            ComponentKind::Spde,
            Prior::Spde(op),
            a,
            false,
            Scale::Spde { tau, kappa },
        ));
    }

    let mut spec = ModelSpec::new(n, components, hypers)?.with_jitter_mode(options.jitter_mode);
    if options.site_trends {
        spec.sites = sites;
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hour_of_week_examples() {
        assert_eq!(hour_of_week(1, 1).unwrap(), 1);
        assert_eq!(hour_of_week(7, 24).unwrap(), 168);
        assert_eq!(hour_of_week(3, 12).unwrap(), 60);
        assert!(matches!(hour_of_week(8, 1), Err(Error::RangeError(_))));
        assert!(matches!(hour_of_week(1, 0), Err(Error::RangeError(_))));
    }

    fn generic(name: &str, k: SymSparse, scale: Scale) -> LatentComponent {
        let mut a = SparseRows::new(k.dim());
        for i in 0..k.dim() {
            a.push_row([(i, 1.0)]);
        }
        LatentComponent::new(name, ComponentKind::GenericPrecision, Prior::Fixed(k), a, false, scale)
    }

    #[test]
    fn generic_block_is_scaled_with_jitter() {
        let mut intercept = SparseRows::new(1);
        (0..3).for_each(|_| intercept.push_row([(0, 1.0)]));
        let comps = vec![
            LatentComponent::new(
                INTERCEPT,
                ComponentKind::Intercept,
                Prior::Fixed(SymSparse::diagonal(&[1e-6])),
                intercept,
                false,
                Scale::Fixed,
            ),
            generic("g", SymSparse::identity(3), Scale::Precision(1)).with_jitter(1e-3),
        ];
        let hypers = vec![
            HyperSpec::new("noise", HyperKind::NoisePrecision),
            HyperSpec::new("tau", HyperKind::Precision),
        ];
        let spec = ModelSpec::new(3, comps, hypers).unwrap();
        let joint = assemble_joint_precision(&spec, &[1.0, 2.0]).unwrap();
        for i in 1..4 {
            assert!((joint.q_prior.get(i, i) - 2.0 * 1.001).abs() < 1e-15);
        }
        assert!(matches!(
            assemble_joint_precision(&spec, &[1.0]),
            Err(Error::HyperDimensionMismatch { expected: 2, found: 1 })
        ));
        let abs = spec.clone().with_jitter_mode(JitterMode::Absolute);
        let joint = assemble_joint_precision(&abs, &[1.0, 2.0]).unwrap();
        assert!((joint.q_prior.get(1, 1) - 2.001).abs() < 1e-15);
    }

    #[test]
    fn spec_requires_one_intercept() {
        let comps = vec![generic("g", SymSparse::identity(2), Scale::Fixed)];
        let hypers = vec![HyperSpec::new("noise", HyperKind::NoisePrecision)];
        assert!(ModelSpec::new(2, comps, hypers).is_err());
    }
}
