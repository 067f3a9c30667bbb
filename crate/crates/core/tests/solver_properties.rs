mod common;

use common::*;
use rand::Rng;
use toprank::data::{synth_planted, PlantedConfig};
use toprank::solver::{
    update_w, update_z1, update_z2, update_z3, w_subproblem_solution, w_subproblem_solution_zero_diag,
};
use toprank::{gram, rank_surrogate, solve, svd, CoefficientMatrix, DenseMatrix, DiagMode, SolverConfig, UserItemMatrix};

fn planted_config() -> SolverConfig {
    SolverConfig { alpha: 1.0, beta: 1.0, mu0: 1.0, feas_tolerance: 1e-5, ..SolverConfig::default() }
}

#[test]
fn every_block_update_decreases_its_subproblem() {
    let mut r = rng(21);
    for trial in 0..40 {
        let x = random_ratings(&mut r, 12, 8, 0.4);
        let mu = r.gen_range(0.5..20.0);
        let config = SolverConfig {
            alpha: r.gen_range(0.0..2.0),
            beta: r.gen_range(0.0..3.0),
            delta: [0.05, 0.1, 0.5][trial % 3],
            ..SolverConfig::default()
        };
        let mut state = random_iterate(&mut r, 8, mu);
        let g = gram(&x);

        let before = Subproblems::new(&x, &state, &config);
        let w_new = to_nalgebra(&w_subproblem_solution(&state, &g).unwrap());
        assert!(before.w_objective(&w_new) <= before.w_objective(&before.w) * (1.0 + 1e-12));
        assert!(before.w_residual(&w_new) <= 1e-8);
        state.w = update_w(&state, &g, &config).unwrap();

        let p = Subproblems::new(&x, &state, &config);
        let z1 = to_nalgebra(&update_z1(&state, &config));
        assert!(p.z1_objective(&z1) <= p.z1_objective(&p.z[0]) + 1e-12);
        let z2 = to_nalgebra(&update_z2(&state, &config).unwrap());
        let start = &p.w - &p.y[1] / mu;
        assert!(p.z2_objective(&z2) <= p.z2_objective(&start) + 1e-10);
        assert!(p.z2_objective(&z2) <= p.z2_objective(&p.z[1]) + 1e-10);
        let z3 = to_nalgebra(&update_z3(&state));
        assert!(p.z3_objective(&z3) <= p.z3_objective(&p.z[2]));
    }
}

#[test]
fn z1_and_z3_are_exact_minimizers() {
    let mut r = rng(22);
    let config = SolverConfig { alpha: 0.7, ..SolverConfig::default() };
    let mut state = random_iterate(&mut r, 6, 3.0);
    state.w = DenseMatrix::from_fn(6, 6, |_, _| r.gen_range(-1.0..1.0));
    let x = random_ratings(&mut r, 5, 6, 0.5);
    let p = Subproblems::new(&x, &state, &config);
    let z1 = to_nalgebra(&update_z1(&state, &config));
    let z3 = to_nalgebra(&update_z3(&state));
    for _ in 0..200 {
        let d = nalgebra::DMatrix::from_fn(6, 6, |_, _| r.gen_range(-0.01..0.01));
        assert!(p.z1_objective(&z1) <= p.z1_objective(&(&z1 + &d)));
        let probe = (&z3 + &d).map(|v| v.max(0.0));
        assert!(p.z3_objective(&z3) <= p.z3_objective(&probe));
    }
}

#[test]
fn solves_are_bitwise_reproducible() {
    let (x, _) = synth_planted(&PlantedConfig { n_users: 60, n_items: 12, ..Default::default() }).unwrap();
    let config = SolverConfig { alpha: 1.0, beta: 1.0, mu0: 1.0, max_outer: 40, seed: 5, ..SolverConfig::default() };
    let a = solve(&x, &config).unwrap();
    let b = solve(&x, &config).unwrap();
    let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
    assert_eq!(bits(a.objective_trace()), bits(b.objective_trace()));
    assert_eq!(a.final_w, b.final_w);

    let c = solve(&x, &SolverConfig { seed: 6, ..config }).unwrap();
    assert_ne!(bits(a.objective_trace()), bits(c.objective_trace()));
}

/// Nonnegative lasso with zero diagonal, solved column by column with cyclic
/// coordinate descent: an oracle for the rank-free problem.
fn coordinate_descent(x: &UserItemMatrix, alpha: f64, sweeps: usize) -> nalgebra::DMatrix<f64> {
    let xd = dense_of(x);
    let g = xd.transpose() * &xd;
    let n = g.nrows();
    let mut w = nalgebra::DMatrix::zeros(n, n);
    for j in 0..n {
        for _ in 0..sweeps {
            for i in 0..n {
                if i == j || g[(i, i)] == 0.0 {
                    continue;
                }
                let mut partial = g[(i, j)];
                for k in 0..n {
                    if k != i {
                        partial -= g[(i, k)] * w[(k, j)];
                    }
                }
                w[(i, j)] = ((partial - alpha) / g[(i, i)]).max(0.0);
            }
        }
    }
    w
}

fn lasso_objective(x: &nalgebra::DMatrix<f64>, w: &nalgebra::DMatrix<f64>, alpha: f64) -> f64 {
    let r = x - x * w;
    0.5 * r.iter().map(|v| v * v).sum::<f64>() + alpha * w.iter().map(|v| v.abs()).sum::<f64>()
}

#[test]
fn without_rank_term_the_solver_matches_coordinate_descent() {
    let mut r = rng(23);
    let x = random_ratings(&mut r, 40, 8, 0.35);
    let alpha = 2.0;
    // A capped penalty turns the loop into plain ADMM, which reaches the optimum.
    let config = SolverConfig {
        alpha,
        beta: 0.0,
        mu0: 5.0,
        mu_max: 5.0,
        feas_tolerance: 1e-10,
        max_outer: 20_000,
        diag_mode: DiagMode::Exact,
        ..SolverConfig::default()
    };
    let report = solve(&x, &config).unwrap();
    assert!(report.converged);
    let ours = to_nalgebra(report.final_w.as_dense());
    let oracle = coordinate_descent(&x, alpha, 2000);
    let xd = dense_of(&x);
    let (fo, fc) = (lasso_objective(&xd, &ours, alpha), lasso_objective(&xd, &oracle, alpha));
    assert!((fo - fc).abs() <= 1e-6 * fc.max(1.0), "{fo} vs {fc}");
    assert!((&ours - &oracle).amax() < 1e-4);
}

#[test]
fn planted_instance_reaches_feasibility_with_small_residual() {
    let (x, _) = synth_planted(&PlantedConfig::default()).unwrap();
    let report = solve(&x, &planted_config()).unwrap();
    assert!(report.converged && report.outer_iterations <= 300);
    assert!(report.final_feasibility_gap <= 1e-4);
    let w: &CoefficientMatrix = &report.final_w;
    assert!(x.reconstruction_error_sq(w.as_dense()).sqrt() / x.frobenius_norm() < 0.1);
    assert!(report.trace.iter().all(|t| t.objective.is_finite()));
}

#[test]
fn zero_diagonal_w_step_is_the_constrained_minimizer() {
    let mut r = rng(24);
    for _ in 0..20 {
        let x = random_ratings(&mut r, 15, 7, 0.4);
        let mu = r.gen_range(0.5..10.0);
        let state = random_iterate(&mut r, 7, mu);
        let g = gram(&x);
        let p = Subproblems::new(&x, &state, &SolverConfig::default());
        let exact = to_nalgebra(&w_subproblem_solution_zero_diag(&state, &g).unwrap());
        let mut projected = to_nalgebra(&w_subproblem_solution(&state, &g).unwrap());
        projected.fill_diagonal(0.0);
        assert!(exact.diagonal().iter().all(|&d| d == 0.0));
        assert!(p.w_objective(&exact) <= p.w_objective(&projected) + 1e-9);
        for _ in 0..50 {
            let mut d = nalgebra::DMatrix::from_fn(7, 7, |_, _| r.gen_range(-1e-3..1e-3));
            d.fill_diagonal(0.0);
            assert!(p.w_objective(&exact) <= p.w_objective(&(&exact + d)) + 1e-12);
        }
    }
}

#[test]
fn feasibility_gap_moving_average_settles() {
    let (x, _) = synth_planted(&PlantedConfig::default()).unwrap();
    for config in [planted_config(), SolverConfig { beta: 100.0, ..planted_config() }] {
        let gaps: Vec<f64> = solve(&x, &config).unwrap().trace.iter().map(|t| t.feasibility_gap).collect();
        let avg: Vec<f64> = gaps.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
        let tail = &avg[avg.len() - 10..];
        assert!(tail.windows(2).all(|p| p[1] <= p[0]), "{tail:?}");
    }
}

// Reference run: the fitting setting lands at f = 20.0 against 6.0 planted, so the
// recorded bound there is 3.5x; a rank-heavy beta reaches the factor of two.
#[test]
fn planted_rank_is_recovered_up_to_recorded_factor() {
    let (x, w_true) = synth_planted(&PlantedConfig::default()).unwrap();
    let planted = rank_surrogate(&svd(w_true.as_dense()).unwrap().singular_values, 0.1);
    let learned = |config: &SolverConfig| {
        let w = solve(&x, config).unwrap().final_w;
        let rel = x.reconstruction_error_sq(w.as_dense()).sqrt() / x.frobenius_norm();
        (rel, rank_surrogate(&svd(w.as_dense()).unwrap().singular_values, 0.1))
    };
    let (rel, f) = learned(&planted_config());
    assert!(rel < 0.1 && f <= 3.5 * planted, "rel {rel}, f {f}");
    let (_, f) = learned(&SolverConfig { beta: 300.0, ..planted_config() });
    assert!(f <= 2.0 * planted, "f {f}");
}
