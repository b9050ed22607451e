//! Random small models and dense reference computations.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use panelgmrf::model::{
    assemble_joint_precision, ComponentKind, Constraints, HyperKind, HyperSpec, LatentComponent, ModelSpec, Prior, Scale,
};
use panelgmrf::penalty::{penalty_matrix, PenaltySpec};
use panelgmrf::sparse::{SparseRows, SymSparse};
use panelgmrf::spde::{fem_matrices, TriMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Instance {
    pub spec: ModelSpec,
    pub hyper: Vec<f64>,
    pub y: Vec<f64>,
}

fn levels(rng: &mut ChaCha8Rng, n: usize, size: usize, random_weights: bool) -> SparseRows {
    let mut a = SparseRows::new(size);
    for _ in 0..n {
        let k = rng.random_range(0..size);
        let w = if random_weights { rng.random_range(0.5..1.5) } else { 1.0 };
        a.push_row([(k, w)]);
    }
    a
}

/// Intercept, a cyclic second-order walk and an open first-order walk (both
/// sum-to-zero), an iid block and optionally an SPDE field on a 4×4 grid.
/// Latent dimension stays below 200.
pub fn random_instance(seed: u64, with_spde: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(40..160);
    let (m1, m2, m3) = (rng.random_range(6..80), rng.random_range(4..50), rng.random_range(3..30));
    let mut hypers = vec![HyperSpec::new("noise", HyperKind::NoisePrecision)];
    let mut ones = SparseRows::new(1);
    (0..n).for_each(|_| ones.push_row([(0, 1.0)]));
    let mut components = vec![LatentComponent::new(
        "intercept",
        ComponentKind::Intercept,
        Prior::Fixed(SymSparse::diagonal(&[1e-3])),
        ones,
        false,
        Scale::Fixed,
    )];
    let walks = [("cyclic", 2, true, m1), ("open", 1, false, m2)];
    for (name, order, cyclic, m) in walks {
        hypers.push(HyperSpec::new(format!("precision for {name}"), HyperKind::Precision));
        let k = penalty_matrix(&PenaltySpec::new(order, cyclic, m).with_jitter(0.0)).unwrap();
        components.push(
            LatentComponent::new(
                name,
                ComponentKind::GenericPrecision,
                Prior::Fixed(k),
                levels(&mut rng, n, m, false),
                true,
                Scale::Precision(hypers.len() - 1),
            )
            .with_jitter(1e-3),
        );
    }
    hypers.push(HyperSpec::new("precision for iid", HyperKind::Precision));
    components.push(LatentComponent::new(
        "iid",
        ComponentKind::GenericPrecision,
        Prior::Fixed(SymSparse::identity(m3)),
        levels(&mut rng, n, m3, true),
        false,
        Scale::Precision(hypers.len() - 1),
    ));
    if with_spde {
        let mesh = TriMesh::regular_grid(4, 4, [0.0, 0.0], [1.0, 1.0]).unwrap();
        hypers.push(HyperSpec::new("tau", HyperKind::SpdeTau));
        hypers.push(HyperSpec::new("kappa", HyperKind::SpdeKappa));
        let k = hypers.len();
        components.push(LatentComponent::new(
            "spde",
            ComponentKind::Spde,
            Prior::Spde(fem_matrices(&mesh)),
            levels(&mut rng, n, mesh.n_vertices(), false),
            false,
            Scale::Spde { tau: k - 2, kappa: k - 1 },
        ));
    }
    let spec = ModelSpec::new(n, components, hypers).unwrap();
    let hyper = spec
        .hypers()
        .iter()
        .map(|h| match h.kind {
            HyperKind::NoisePrecision => rng.random_range(0.5..4.0),
            HyperKind::Precision => rng.random_range(0.5..20.0),
            HyperKind::SpdeTau => rng.random_range(0.5..2.0),
            HyperKind::SpdeKappa => rng.random_range(1.0..5.0),
        })
        .collect();
    let y = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Instance { spec, hyper, y }
}

pub fn dense_sym(q: &SymSparse) -> DMatrix<f64> {
    let n = q.dim();
    let mut m = DMatrix::zeros(n, n);
    for (i, j, v) in q.iter() {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    m
}

pub fn dense_rows(a: &SparseRows) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            m[(i, j)] += v;
        }
    }
    m
}

/// Posterior moments and marginal likelihood by dense linear algebra.
pub struct DenseOracle {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub log_ml: f64,
}

pub fn dense_oracle(inst: &Instance) -> DenseOracle {
    let joint = assemble_joint_precision(&inst.spec, &inst.hyper).unwrap();
    let q = dense_sym(&joint.q_prior);
    let a = dense_rows(&joint.a);
    let noise = inst.hyper[0];
    let y = DVector::from_column_slice(&inst.y);
    let q_post = &q + noise * a.transpose() * &a;
    let cov = q_post.clone().try_inverse().unwrap();
    let cov = 0.5 * (&cov + cov.transpose());
    let mean = &cov * (noise * a.transpose() * &y);

    // marginal of y: N(0, A Q⁻¹ Aᵀ + I/τ)
    let n = inst.y.len();
    let q_inv = q.try_inverse().unwrap();
    let s = &a * q_inv * a.transpose() + DMatrix::identity(n, n) / noise;
    let s = 0.5 * (&s + s.transpose());
    let chol = s.cholesky().unwrap();
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let quad = y.dot(&chol.solve(&y));
    let log_ml = -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * logdet - 0.5 * quad;
    DenseOracle { mean, cov, log_ml }
}

/// Conditions `N(mean, cov)` on `A_c x = e`.
pub fn dense_condition(mean: &DVector<f64>, cov: &DMatrix<f64>, c: &Constraints) -> (DVector<f64>, DMatrix<f64>) {
    let ac = dense_rows(&c.rows);
    let e = DVector::from_column_slice(&c.e);
    let sa = cov * ac.transpose();
    let w = &ac * &sa;
    let w_inv = w.try_inverse().unwrap();
    let m = mean - &sa * &w_inv * (&ac * mean - e);
    let s = cov - &sa * w_inv * sa.transpose();
    (m, s)
}

/// `max |a - b| / max |b|`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
