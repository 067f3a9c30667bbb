//! Split a triplet file into leave-one-out folds on disk and read one back.
//!
//! `cargo run --example fold_export -- [path/to/u.data] [out_dir]`

use toprank::data::{load_triplets, read_fold, split_folds, write_folds, FormatOptions};

fn main() -> toprank::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "data/ml-100k/u.data".into());
    let out = args.next().unwrap_or_else(|| "runs/folds".into());
    let data = load_triplets(&path, FormatOptions::default())?;
    let x = &data.matrix;
    println!("{} users, {} items, {} entries", x.n_users(), x.n_items(), x.nnz());
    let folds = split_folds(x, 5, 0);
    for dir in write_folds(&out, &folds)? {
        let fold = read_fold(&dir)?;
        println!(
            "{}: train {} entries (density {:.5}), test {} entries",
            dir.display(),
            fold.train.nnz(),
            fold.train.density(),
            fold.test.len()
        );
    }
    Ok(())
}
