//! HR@10 over an alpha grid on the planted fixture.

use toprank::data::{split_folds, synth_planted, PlantedConfig};
use toprank::eval::{cross_validate, ModelSpec};
use toprank::SolverConfig;

fn main() -> toprank::Result<()> {
    let (x, _) = synth_planted(&PlantedConfig::default())?;
    let folds = split_folds(&x, 5, 0);
    println!("alpha\thr@10\tarhr@10");
    for alpha in [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0] {
        let config = SolverConfig {
            alpha,
            beta: 1.0,
            mu0: 1.0,
            ..SolverConfig::default()
        };
        let cv = cross_validate(&folds, &ModelSpec::Ours(config), &[10], 1)?;
        println!("{alpha}\t{:.4}\t{:.4}", cv.mean[0].hr, cv.mean[0].arhr);
    }
    Ok(())
}
