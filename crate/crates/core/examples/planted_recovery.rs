//! Fit the model on the planted synthetic instance and compare with the truth.
//!
//! `cargo run --release --example planted_recovery -- [alpha] [beta] [mu0] [delta]`

use toprank::data::{synth_planted, PlantedConfig};
use toprank::{rank_surrogate, solve_with_progress, svd, SolverConfig};

fn main() -> toprank::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let (x, w_true) = synth_planted(&PlantedConfig::default())?;
    println!("planted X: {} users x {} items, {} entries", x.n_users(), x.n_items(), x.nnz());

    let defaults = planted_config();
    let config = SolverConfig {
        alpha: args.first().copied().unwrap_or(defaults.alpha),
        beta: args.get(1).copied().unwrap_or(defaults.beta),
        mu0: args.get(2).copied().unwrap_or(defaults.mu0),
        delta: args.get(3).copied().unwrap_or(defaults.delta),
        ..defaults
    };
    let report = solve_with_progress(&x, &config, |r| {
        if r.iteration % 25 == 0 {
            println!("iter {:>3}  gap {:.3e}  objective {:.5e}", r.iteration, r.feasibility_gap, r.objective);
        }
    })?;
    let w = report.final_w.as_dense();
    let rel = x.reconstruction_error_sq(w).sqrt() / x.frobenius_norm();
    println!(
        "converged={} after {} iterations, gap {:.2e}",
        report.converged, report.outer_iterations, report.final_feasibility_gap
    );
    println!("relative residual ||X - XW|| / ||X||: {rel:.4}");
    println!(
        "f(sigma) at delta 0.1: learned {:.3}, planted {:.3}",
        rank_surrogate(&svd(w)?.singular_values, 0.1),
        rank_surrogate(&svd(w_true.as_dense())?.singular_values, 0.1)
    );
    let off_block = (0..40)
        .flat_map(|i| (0..40).map(move |j| (i, j)))
        .filter(|&(i, j)| (i < 20) != (j < 20))
        .map(|(i, j)| w.get(i, j))
        .sum::<f64>();
    println!("mass outside the diagonal blocks: {off_block:.3e}, nonzeros {}", w.count_nonzero());
    Ok(())
}

/// Settings used for the planted fixture throughout the tests.
fn planted_config() -> SolverConfig {
    SolverConfig {
        alpha: 1.0,
        beta: 1.0,
        mu0: 1.0,
        feas_tolerance: 1e-5,
        ..SolverConfig::default()
    }
}
