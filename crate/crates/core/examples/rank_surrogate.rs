//! The smooth rank surrogate and how far it is from the true rank.
//!
//! Prints `f(sigma)` for a fixed spectrum at several `delta`, and the squared
//! gap between the surrogate and the unit step, measured by quadrature next to
//! its closed form `delta / 2`.

use toprank::prox::surrogate_step_error;
use toprank::rank_surrogate;

fn main() {
    let sigma = [5.0, 2.0, 0.5, 0.05, 0.0];
    println!("spectrum {sigma:?}, true rank 4");
    println!("delta\tf(sigma)\tmeasured_error\tdelta/2");
    for delta in [1.0, 0.1, 0.01, 0.001] {
        println!(
            "{delta}\t{:.6}\t{:.6e}\t{:.6e}",
            rank_surrogate(&sigma, delta),
            surrogate_step_error(delta),
            delta / 2.0
        );
    }
}
