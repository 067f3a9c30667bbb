//! Reconstruction statistics of a fitted model: how dense `X W` is and how
//! its values compare with the ratings. Uses the planted fixture and ItemKNN
//! so it runs in a second.

use toprank::cli::{corruption_report, reconstruction_stats};
use toprank::data::{synth_planted, PlantedConfig};
use toprank::eval::item_knn;
use toprank::{rank_surrogate, svd};

fn main() -> toprank::Result<()> {
    let (x, w_true) = synth_planted(&PlantedConfig::default())?;
    for (name, w) in [("planted", w_true), ("itemknn k=5", item_knn(&x, 5))] {
        let w = w.as_dense();
        assert!(corruption_report(w).is_empty());
        let s = reconstruction_stats(&x, w);
        let sigma = svd(w)?.singular_values;
        println!("{name}:");
        println!(
            "  density {:.4}  nonzero mean {:.4}  mean on support {:.4}  data mean {:.4}",
            s.density, s.nonzero_mean, s.support_mean, s.data_mean
        );
        println!("  f(sigma) at delta 0.1: {:.3}", rank_surrogate(&sigma, 0.1));
        println!("  leading singular values: {:.3?}", &sigma[..8]);
    }
    Ok(())
}
