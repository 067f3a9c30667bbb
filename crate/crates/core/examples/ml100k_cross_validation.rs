//! Five-fold leave-one-out evaluation of the low-rank model on MovieLens-100K.
//!
//! Each fold needs a few dozen full SVDs of a 1682 x 1682 matrix, so expect
//! several minutes per fold. `--jobs`-style concurrency is the second argument.
//!
//! `cargo run --release --example ml100k_cross_validation -- [path/to/u.data] [jobs]`

use toprank::data::{load_triplets, split_folds, FormatOptions};
use toprank::eval::{cross_validate, ModelSpec};
use toprank::SolverConfig;

fn main() -> toprank::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "data/ml-100k/u.data".into());
    let jobs: usize = args.next().map_or(1, |j| j.parse().expect("jobs must be an integer"));
    let data = load_triplets(&path, FormatOptions::default())?;
    let folds = split_folds(&data.matrix, 5, 0);
    let config = SolverConfig::default();
    println!(
        "alpha={} beta={} delta={} mu0={} gamma={}",
        config.alpha, config.beta, config.delta, config.mu0, config.gamma
    );
    let cv = cross_validate(&folds, &ModelSpec::Ours(config), &[5, 10, 15, 20, 25], jobs)?;
    for f in &cv.folds {
        let s = f.solve.as_ref().expect("solver report");
        let at10 = f.reports.iter().find(|r| r.n == 10).unwrap();
        println!(
            "fold {}: {} iterations, {:.0} s, HR@10 {:.4}, ARHR@10 {:.4}",
            f.fold_index,
            s.outer_iterations,
            s.wall_time.as_secs_f64(),
            at10.hr,
            at10.arhr
        );
    }
    println!("n\thr\tarhr");
    for r in &cv.mean {
        println!("{}\t{:.4}\t{:.4}", r.n, r.hr, r.arhr);
    }
    Ok(())
}
