mod common;

use common::{dense_sym, rel_err};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use panelgmrf::archive::{SummaryRow, SummaryTable};
use panelgmrf::basis::{bspline_basis, center_basis};
use panelgmrf::inference::lognormal_summary;
use panelgmrf::penalty::{penalty_matrix, PenaltySpec};
use panelgmrf::spde::{build_mesh, fem_matrices, mesh_from_str, mesh_to_string};
use panelgmrf::sparse::{cholesky, kron, selected_inverse, SymSparse};
use proptest::prelude::*;

/// Random diagonally dominant (hence positive definite) sparse matrix.
fn spd_matrix() -> impl Strategy<Value = SymSparse> {
    (2usize..40).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, -1.0f64..1.0), 0..3 * n).prop_map(move |entries| {
            let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
            let mut row_abs = vec![0.0; n];
            for (i, j, v) in entries {
                if i == j {
                    continue;
                }
                let (i, j) = if i > j { (i, j) } else { (j, i) };
                triplets.push((i, j, v));
                row_abs[i] += v.abs();
                row_abs[j] += v.abs();
            }
            for (i, s) in row_abs.iter().enumerate() {
                triplets.push((i, i, s + 0.5));
            }
            SymSparse::from_triplets(n, &triplets).unwrap()
        })
    })
}

fn small_sym() -> impl Strategy<Value = SymSparse> {
    (1usize..6).prop_flat_map(|n| {
        prop::collection::vec(-2.0f64..2.0, n * (n + 1) / 2).prop_map(move |v| {
            let mut t = Vec::new();
            let mut k = 0;
            for j in 0..n {
                for i in j..n {
                    t.push((i, j, v[k]));
                    k += 1;
                }
            }
            SymSparse::from_triplets(n, &t).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matvec_and_quad_form_match_dense(q in spd_matrix(), seed in 0u64..1000) {
        let n = q.dim();
        let x: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 13) as f64 - 6.0).collect();
        let d = dense_sym(&q);
        let want = &d * DVector::from_column_slice(&x);
        prop_assert!(rel_err(&q.matvec(&x), want.as_slice()) < 1e-12);
        let quad = DVector::from_column_slice(&x).dot(&want);
        prop_assert!((q.quad_form(&x) - quad).abs() <= 1e-10 * quad.abs().max(1.0));
    }

    #[test]
    fn cholesky_solves_and_logdet(q in spd_matrix()) {
        let n = q.dim();
        let f = cholesky(&q).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b).unwrap();
        prop_assert!(rel_err(&q.matvec(&x), &b) < 1e-10);
        let d = dense_sym(&q);
        let logdet = 2.0 * d.cholesky().unwrap().l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        prop_assert!((f.logdet() - logdet).abs() < 1e-10 * logdet.abs().max(1.0));
    }

    #[test]
    fn factor_reproduces_permuted_matrix(q in spd_matrix()) {
        let n = q.dim();
        let f = cholesky(&q).unwrap();
        let mut l = DMatrix::zeros(n, n);
        for (i, j, v) in f.factor_entries() {
            l[(i, j)] = v;
        }
        let p = f.permutation();
        let d = dense_sym(&q);
        let permuted = DMatrix::from_fn(n, n, |i, j| d[(p[i], p[j])]);
        let diff = (&l * l.transpose() - &permuted).abs().max();
        prop_assert!(diff < 1e-10 * d.abs().max());
    }

    #[test]
    fn selected_inverse_matches_dense_inverse(q in spd_matrix()) {
        let f = cholesky(&q).unwrap();
        let s = selected_inverse(&f);
        let inv = dense_sym(&q).try_inverse().unwrap();
        for (i, j, v) in s.iter() {
            prop_assert!((v - inv[(i, j)]).abs() < 1e-10 * inv.abs().max());
        }
        prop_assert!(rel_err(&s.diag(), inv.diagonal().as_slice()) < 1e-10);
    }

    #[test]
    fn kron_matches_dense(a in small_sym(), b in small_sym()) {
        let k = kron(&a, &b).unwrap();
        let (da, db) = (dense_sym(&a), dense_sym(&b));
        prop_assert_eq!(dense_sym(&k), da.kronecker(&db));
    }

    #[test]
    fn penalty_rows_sum_to_zero_with_expected_rank(order in 1usize..3, cyclic: bool, n in 5usize..40) {
        let spec = PenaltySpec::new(order, cyclic, n).with_jitter(0.0);
        let k = penalty_matrix(&spec).unwrap();
        let d = dense_sym(&k);
        for i in 0..n {
            prop_assert!(d.row(i).sum().abs() < 1e-12);
        }
        let eig = SymmetricEigen::new(d).eigenvalues;
        prop_assert!(eig.iter().all(|&l| l > -1e-9));
        let rank = eig.iter().filter(|&&l| l > 1e-9).count();
        prop_assert_eq!(rank, spec.rank());
    }

    #[test]
    fn jitter_lands_on_the_diagonal(n in 3usize..30, jitter in 1e-8f64..1.0) {
        let plain = penalty_matrix(&PenaltySpec::new(2, true, n).with_jitter(0.0)).unwrap();
        let jittered = penalty_matrix(&PenaltySpec::new(2, true, n).with_jitter(jitter)).unwrap();
        let diff = dense_sym(&jittered) - dense_sym(&plain);
        prop_assert!((diff - DMatrix::identity(n, n) * jitter).abs().max() < 1e-14);
    }

    #[test]
    fn basis_partition_of_unity(knots in 5usize..20, degree in 1usize..4, cyclic: bool, xs in prop::collection::vec(0.0f64..1.0, 1..50)) {
        prop_assume!(knots > degree + 1);
        let x: Vec<f64> = xs.iter().map(|t| 1.0 + 364.0 * t).collect();
        let b = bspline_basis(&x, knots, degree, cyclic, 1.0, 365.0).unwrap();
        for i in 0..x.len() {
            prop_assert!((b.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(b.row(i).iter().all(|&v| v >= -1e-12));
        }
    }

    #[test]
    fn centered_basis_has_zero_column_means(knots in 5usize..15) {
        let grid: Vec<f64> = (1..=365).map(f64::from).collect();
        let b = bspline_basis(&grid, knots, 3, true, 1.0, 365.0).unwrap();
        let c = center_basis(&b, &grid).unwrap();
        prop_assert!(c.column_means().iter().all(|m| m.abs() < 1e-10));
    }

    #[test]
    fn lognormal_summary_is_monotone(mean in -5.0f64..10.0, sd in 0.0f64..2.0, shift in 0.0f64..1.0) {
        let a = lognormal_summary(mean, sd).unwrap();
        let b = lognormal_summary(mean + shift, sd).unwrap();
        prop_assert!(a.lower <= a.median && a.median <= a.upper);
        prop_assert!(b.median >= a.median && b.lower >= a.lower && b.upper >= a.upper);
    }

    #[test]
    fn summary_table_round_trips(values in prop::collection::vec((-1e6f64..1e6, 0.0f64..1e3), 0..30)) {
        let mut t = SummaryTable::new("key");
        for (i, (m, s)) in values.iter().enumerate() {
            t.rows.push(SummaryRow::new(format!("k{i}"), *m, *s));
        }
        let text = t.to_csv().unwrap();
        let back = SummaryTable::from_csv(&text).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(back.to_csv().unwrap(), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mesh_covers_locations_within_edge_bound(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3..25),
        max_edge in 0.15f64..0.5,
    ) {
        let locations: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
        let mesh = match build_mesh(&locations, max_edge) {
            Ok(m) => m,
            // random points may be collinear
            Err(_) => return Ok(()),
        };
        prop_assert!(mesh.max_edge_length() <= max_edge * (1.0 + 1e-9));
        for (k, &v) in mesh.loc_index().iter().enumerate() {
            let p = mesh.vertices()[v];
            let q = locations[k];
            prop_assert!(p == q || locations[..k].contains(&p));
        }
        for t in 0..mesh.triangles().len() {
            prop_assert!(mesh.triangle_area(t) > 0.0);
        }
        let op = fem_matrices(&mesh);
        let mass: f64 = op.mass_diag().iter().sum();
        prop_assert!((mass - mesh.total_area()).abs() < 1e-10 * mesh.total_area());
        let c = dense_sym(op.stiffness());
        for i in 0..c.nrows() {
            prop_assert!(c.row(i).sum().abs() < 1e-9 * c[(i, i)].abs().max(1.0));
        }
        let back = mesh_from_str(&mesh_to_string(&mesh)).unwrap();
        prop_assert_eq!(back.vertices(), mesh.vertices());
        prop_assert_eq!(back.triangles(), mesh.triangles());
    }
}
