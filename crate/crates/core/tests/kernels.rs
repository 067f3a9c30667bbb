//! Dense kernels checked against nalgebra, an independent implementation.

mod common;

use common::*;
use nalgebra::{DMatrix, SymmetricEigen, SVD};
use rand::Rng;
use toprank::prox::rank_prox;
use toprank::{gram, solve_spd, svd, DcSettings, DenseMatrix, RankSurrogateParams};

#[test]
fn gram_matches_nalgebra_product() {
    let mut r = rng(11);
    for _ in 0..5 {
        let x = random_ratings(&mut r, 30, 12, 0.3);
        let xd = dense_of(&x);
        let expected = xd.transpose() * &xd;
        assert!(max_abs_diff(&gram(&x), &expected) < 1e-10);
    }
}

#[test]
fn spd_solve_matches_nalgebra_cholesky() {
    let mut r = rng(12);
    for n in [1, 5, 17, 40] {
        let b = DenseMatrix::random_uniform(n, n, &mut r);
        let a = b.transpose().matmul(&b).add(&DenseMatrix::identity(n).scale(0.5));
        let rhs = DenseMatrix::random_uniform(n, 3, &mut r);
        let ours = solve_spd(&a, &rhs).unwrap();
        let theirs = to_nalgebra(&a).cholesky().unwrap().solve(&to_nalgebra(&rhs));
        assert!(max_abs_diff(&ours, &theirs) < 1e-9, "n = {n}");
    }
}

#[test]
fn singular_values_match_nalgebra() {
    let mut r = rng(13);
    for (rows, cols) in [(6, 6), (9, 4), (4, 9), (30, 30)] {
        let a = DenseMatrix::from_fn(rows, cols, |_, _| r.gen_range(-2.0..2.0));
        let ours = svd(&a).unwrap();
        let mut theirs = SVD::new(to_nalgebra(&a), false, false).singular_values.as_slice().to_vec();
        theirs.sort_by(|x, y| y.total_cmp(x));
        assert_eq!(ours.singular_values.len(), theirs.len());
        for (s, t) in ours.singular_values.iter().zip(&theirs) {
            assert!((s - t).abs() < 1e-10, "{s} vs {t}");
        }
        assert!(ours.reconstruct().max_abs_diff(&a) < 1e-10);
    }
}

#[test]
fn gram_eigenvalue_route_matches_nalgebra_svd() {
    let mut r = rng(14);
    let a = DenseMatrix::from_fn(20, 20, |_, _| r.gen_range(0.0..1.0));
    let ours = toprank::matrix::singular_values_from_gram(&a).unwrap();
    let ata = to_nalgebra(&a).transpose() * to_nalgebra(&a);
    let mut eig: Vec<f64> = SymmetricEigen::new(ata).eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    for (s, t) in ours.iter().zip(&eig) {
        assert!((s - t).abs() < 1e-7);
    }
}

/// The rank prox rebuilt from nalgebra's SVD and a bisection on the scalar
/// stationarity condition; it must agree with the library wherever the scalar
/// problem has a unique stationary point.
#[test]
fn rank_prox_matches_independent_composition() {
    let mut r = rng(15);
    let (delta, beta, mu) = (0.5, 0.3, 2.0);
    // phi'' >= mu - beta / delta^2 > 0: strictly convex, one stationary point.
    assert!(mu - beta / (delta * delta) > 0.0);
    let params = RankSurrogateParams::new(delta, beta).unwrap();
    for _ in 0..5 {
        let a = DenseMatrix::from_fn(8, 8, |_, _| r.gen_range(-1.0..1.0));
        let ours = rank_prox(&a, params, mu, DcSettings::default()).unwrap();

        let svd = SVD::new(to_nalgebra(&a), true, true);
        let shrunk: Vec<f64> = svd
            .singular_values
            .iter()
            .map(|&sa| {
                let grad = |s: f64| beta / delta * (-s / delta).exp() + mu * (s - sa);
                if grad(0.0) >= 0.0 {
                    return 0.0;
                }
                let (mut lo, mut hi) = (0.0, sa);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if grad(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let theirs: DMatrix<f64> = &u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(shrunk)) * &vt;
        assert!(max_abs_diff(&ours, &theirs) < 1e-7);
    }
}
