//! The three proximal blocks of the solver on a small matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use toprank::{
    dc_prox_scalar, nonneg_project, rank_prox, soft_threshold, svd, DcSettings, DenseMatrix,
    RankSurrogateParams,
};

fn print(name: &str, m: &DenseMatrix) {
    println!("{name}:");
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format!("{:7.3}", m.get(i, j))).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> toprank::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = DenseMatrix::random_uniform(4, 4, &mut rng).map(|v| 4.0 * v - 1.0);
    print("A", &a);
    print("soft_threshold(A, 0.5)", &soft_threshold(&a, 0.5));
    print("nonneg_project(A)", &nonneg_project(&a));

    let params = RankSurrogateParams::new(0.1, 2.0)?;
    let mu = 1.0;
    let z = rank_prox(&a, params, mu, DcSettings::default())?;
    print("rank prox of A (beta = 2, delta = 0.1, mu = 1)", &z);
    println!("singular values before: {:.4?}", svd(&a)?.singular_values);
    println!("singular values after:  {:.4?}", svd(&z)?.singular_values);

    // One singular value in detail: the DC fixed point and its residual.
    let r = dc_prox_scalar(&[0.3], params, mu, DcSettings::default())?;
    println!(
        "scalar prox of 0.3: {:.6} after {} steps (residual {:.1e})",
        r.sigma_star[0], r.inner_iterations, r.stationarity_residual
    );
    Ok(())
}
