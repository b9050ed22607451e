mod common;

use common::{dense_condition, dense_oracle, dense_rows, random_instance, rel_err};
use nalgebra::DVector;
use panelgmrf::inference::{
    apply_sum_to_zero, covariance_block, lincomb, lincomb_many, log_marginal_likelihood, posterior, PreparedModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-8;

fn random_weights(rng: &mut ChaCha8Rng, dim: usize) -> Vec<(usize, f64)> {
    let k = rng.random_range(1..6);
    (0..k).map(|_| (rng.random_range(0..dim), rng.random_range(-2.0..2.0))).collect()
}

fn dense_lincomb_sd(cov: &nalgebra::DMatrix<f64>, w: &[(usize, f64)]) -> f64 {
    let mut v = DVector::zeros(cov.nrows());
    w.iter().for_each(|&(i, x)| v[i] += x);
    (v.dot(&(cov * &v))).sqrt()
}

#[test]
fn unconstrained_posterior_matches_dense() {
    for seed in 0..12 {
        let inst = random_instance(seed, seed % 2 == 0);
        let oracle = dense_oracle(&inst);
        let post = posterior(&inst.spec, &inst.hyper, &inst.y).unwrap();
        let sd: Vec<f64> = oracle.cov.diagonal().iter().map(|v| v.sqrt()).collect();
        assert!(rel_err(post.mean(), oracle.mean.as_slice()) < TOL, "mean, seed {seed}");
        assert!(rel_err(post.marginal_sd(), &sd) < TOL, "sd, seed {seed}");
        let lml = log_marginal_likelihood(&inst.spec, &inst.hyper, &inst.y).unwrap();
        assert!(((lml - oracle.log_ml) / oracle.log_ml).abs() < TOL, "log ml {lml} vs {}", oracle.log_ml);
    }
}

#[test]
fn constrained_posterior_matches_dense_conditioning() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for seed in 20..30 {
        let inst = random_instance(seed, seed % 3 == 0);
        let oracle = dense_oracle(&inst);
        let constraints = inst.spec.constraints();
        let (mean, cov) = dense_condition(&oracle.mean, &oracle.cov, &constraints);
        let post = apply_sum_to_zero(&posterior(&inst.spec, &inst.hyper, &inst.y).unwrap(), &constraints).unwrap();
        assert!(post.is_constrained());
        let sd: Vec<f64> = cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
        assert!(rel_err(post.mean(), mean.as_slice()) < TOL);
        // the constrained coordinates have tiny sds, so compare on the overall scale
        assert!(rel_err(post.marginal_sd(), &sd) < TOL);
        for r in 0..constraints.rows.nrows() {
            let (cols, _) = constraints.rows.row(r);
            let total: f64 = cols.iter().map(|&i| post.mean()[i]).sum();
            assert!(total.abs() <= 1e-10, "block sum {total}");
        }
        for _ in 0..10 {
            let w = random_weights(&mut rng, post.dim());
            let got = lincomb(&post, &w).unwrap();
            let want = dense_lincomb_sd(&cov, &w);
            assert!((got.sd - want).abs() <= TOL * want.max(1.0), "lincomb sd {} vs {want}", got.sd);
            let m: f64 = w.iter().map(|&(i, x)| x * mean[i]).sum();
            assert!((got.mean - m).abs() <= TOL * m.abs().max(1.0));
        }
    }
}

#[test]
fn conditioning_twice_changes_nothing() {
    let inst = random_instance(7, true);
    let c = inst.spec.constraints();
    let once = apply_sum_to_zero(&posterior(&inst.spec, &inst.hyper, &inst.y).unwrap(), &c).unwrap();
    let twice = apply_sum_to_zero(&once, &c).unwrap();
    assert_eq!(once.mean(), twice.mean());
    assert_eq!(once.marginal_sd(), twice.marginal_sd());
}

#[test]
fn covariance_block_and_prediction_match_dense() {
    let inst = random_instance(3, true);
    let oracle = dense_oracle(&inst);
    let c = inst.spec.constraints();
    let (_, cov) = dense_condition(&oracle.mean, &oracle.cov, &c);
    let post = apply_sum_to_zero(&posterior(&inst.spec, &inst.hyper, &inst.y).unwrap(), &c).unwrap();

    let idx = [0, 3, 5, post.dim() - 1];
    let block = covariance_block(&post, &idx).unwrap();
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            assert!((block[a][b] - cov[(i, j)]).abs() < 1e-9);
        }
    }

    let a = inst.spec.incidence();
    let (mean, sd) = post.predict(&a);
    let ad = dense_rows(&a);
    let want_cov = &ad * &cov * ad.transpose();
    let want_sd: Vec<f64> = want_cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    let want_mean = &ad * DVector::from_column_slice(post.mean());
    assert!(rel_err(&mean, want_mean.as_slice()) < TOL);
    assert!(rel_err(&sd, &want_sd) < TOL);

    let combos: Vec<Vec<(usize, f64)>> = (0..a.nrows())
        .map(|r| {
            let (cols, vals) = a.row(r);
            cols.iter().copied().zip(vals.iter().copied()).collect()
        })
        .collect();
    let many = lincomb_many(&post, &combos).unwrap();
    let many_sd: Vec<f64> = many.iter().map(|s| s.sd).collect();
    assert!(rel_err(&many_sd, &want_sd) < TOL);
}

#[test]
fn prepared_model_objective_adds_hyperprior() {
    let inst = random_instance(11, true);
    let prepared = PreparedModel::new(&inst.spec, &inst.y).unwrap();
    let lml = prepared.log_marginal_likelihood(&inst.hyper, 0.0).unwrap();
    let obj = prepared.objective(&inst.hyper, 0.0).unwrap();
    assert!((obj - lml - inst.spec.log_hyperprior(&inst.hyper)).abs() < 1e-9);
    assert!(prepared.log_marginal_likelihood(&inst.hyper, 1.0).unwrap() != lml);
}

#[test]
fn rejects_wrong_response_length() {
    let inst = random_instance(2, false);
    assert!(PreparedModel::new(&inst.spec, &inst.y[1..]).is_err());
}
