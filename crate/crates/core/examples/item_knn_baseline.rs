//! Cosine ItemKNN on MovieLens-100K with the leave-one-out protocol.
//!
//! `cargo run --release --example item_knn_baseline -- [path/to/u.data] [k]`

use toprank::data::{load_triplets, split_folds, FormatOptions};
use toprank::eval::{cross_validate, ModelSpec};

fn main() -> toprank::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "data/ml-100k/u.data".into());
    let k: usize = args.next().map_or(10, |k| k.parse().expect("k must be an integer"));
    let data = load_triplets(&path, FormatOptions::default())?;
    let folds = split_folds(&data.matrix, 5, 0);
    let cv = cross_validate(&folds, &ModelSpec::ItemKnn { k }, &[5, 10, 15, 20, 25], 1)?;
    println!("ItemKNN k={k} on {path}");
    println!("n\thr\tarhr");
    for r in &cv.mean {
        println!("{}\t{:.4}\t{:.4}", r.n, r.hr, r.arhr);
    }
    Ok(())
}
