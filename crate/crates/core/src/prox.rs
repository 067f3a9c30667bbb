//! Proximal operators for the three split blocks and the exponential rank
//! surrogate `f(sigma) = sum_i (1 - exp(-|sigma_i| / delta))`.

use crate::error::{Error, Result};
use crate::matrix::{svd, DenseMatrix};

/// Singular values below this fraction of the largest one are exact zeros.
const RELATIVE_ZERO: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankSurrogateParams {
    delta: f64,
    beta: f64,
}

impl RankSurrogateParams {
    pub fn new(delta: f64, beta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidConfig(format!("delta must be > 0, got {delta}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidConfig(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Self { delta, beta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Stopping rule for the inner DC loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcSettings {
    pub tolerance: f64,
    pub max_inner: usize,
}

impl Default for DcSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_inner: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DcResult {
    pub sigma_star: Vec<f64>,
    /// Largest step count over all components.
    pub inner_iterations: usize,
    pub stationarity_residual: f64,
}

/// `sum_i (1 - exp(-|sigma_i| / delta))`
pub fn rank_surrogate(sigma: &[f64], delta: f64) -> f64 {
    sigma.iter().map(|s| -(-s.abs() / delta).exp_m1()).sum()
}

/// `int_0^inf (f(s) - step(s))^2 ds` for one component, by composite Simpson
/// on `[0, 40 delta]` (the tail beyond is below `e^-80`). Equals `delta / 2`.
pub fn surrogate_step_error(delta: f64) -> f64 {
    const PANELS: usize = 4000;
    let upper = 40.0 * delta;
    let h = upper / PANELS as f64;
    // f(s) - step(s) = -exp(-s/delta) for s > 0; the point s = 0 has measure zero.
    let g = |s: f64| (-2.0 * s / delta).exp();
    let mut acc = g(0.0) + g(upper);
    for k in 1..PANELS {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    acc * h / 3.0
}

/// Gradient of the surrogate on the nonnegative orthant; equals `1/delta` at 0.
pub fn surrogate_gradient(sigma: &[f64], delta: f64) -> Vec<f64> {
    sigma
        .iter()
        .map(|&s| if s == 0.0 { 1.0 / delta } else { (-s / delta).exp() / delta })
        .collect()
}

/// Entrywise `max(|q| - tau, 0) * sign(q)`, the prox of `tau * ||.||_1`.
pub fn soft_threshold(q: &DenseMatrix, tau: f64) -> DenseMatrix {
    assert!(tau >= 0.0, "threshold must be nonnegative");
    q.map(|v| (v.abs() - tau).max(0.0).copysign(v))
        .map(|v| if v == 0.0 { 0.0 } else { v })
}

/// Entrywise `max(a, 0)`, the projection onto the nonnegative orthant.
pub fn nonneg_project(a: &DenseMatrix) -> DenseMatrix {
    a.map(|v| v.max(0.0))
}

/// Scalar objective `beta * f(sigma) + (mu / 2) * ||sigma - sigma_a||^2`.
pub fn scalar_prox_objective(
    sigma: &[f64],
    sigma_a: &[f64],
    params: RankSurrogateParams,
    mu: f64,
) -> f64 {
    let quad: f64 = sigma
        .iter()
        .zip(sigma_a)
        .map(|(s, a)| (s - a) * (s - a))
        .sum();
    params.beta * rank_surrogate(sigma, params.delta) + 0.5 * mu * quad
}

/// Moreau-Yosida prox of `beta * f` at `sigma_a` by DC programming.
///
/// Each component runs `s <- (sigma_a - (beta / mu) * f'(s))_+` from
/// `s = sigma_a`. The sequence decreases monotonically to the largest
/// stationary point below `sigma_a`. Where the DC step is slow (near a tangency
/// of the fixed-point map) a Newton step on the same fixed-point equation is
/// taken instead; that step also never passes the limit point, so the result is
/// the one plain DC converges to, only reached in fewer steps.
pub fn dc_prox_scalar(
    sigma_a: &[f64],
    params: RankSurrogateParams,
    mu: f64,
    settings: DcSettings,
) -> Result<DcResult> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidConfig(format!("mu must be > 0, got {mu}")));
    }
    let top = sigma_a.iter().cloned().fold(0.0, f64::max);
    let floor = RELATIVE_ZERO * top;
    let shift = params.beta / mu;

    let mut sigma_star = Vec::with_capacity(sigma_a.len());
    let mut inner_iterations = 0;
    let mut worst = 0.0f64;
    for &a in sigma_a {
        assert!(a >= 0.0, "singular values must be nonnegative");
        let a = if a <= floor { 0.0 } else { a };
        let (s, steps, residual) = dc_component(a, shift, params.delta, settings);
        inner_iterations = inner_iterations.max(steps);
        worst = worst.max(residual);
        sigma_star.push(s);
    }
    if worst > settings.tolerance {
        return Err(Error::MaxInnerIterationsExceeded {
            iterations: inner_iterations,
            residual: worst,
        });
    }
    Ok(DcResult {
        sigma_star,
        inner_iterations,
        stationarity_residual: worst,
    })
}

/// Fixed point of `s = (a - shift * exp(-s/delta) / delta)_+`, approached from `a`.
/// Returns the iterate, the number of steps and the final residual.
fn dc_component(a: f64, shift: f64, delta: f64, settings: DcSettings) -> (f64, usize, f64) {
    let step = |s: f64| (a - shift * (-s / delta).exp() / delta).max(0.0);
    if shift == 0.0 || a == 0.0 {
        return (a, 0, 0.0);
    }
    let mut s = a;
    let mut residual = (s - step(s)).abs();
    let mut steps = 0;
    while residual > settings.tolerance && steps < settings.max_inner {
        let dc = step(s);
        // h(s) = s - a + c e^{-s/delta} is convex; its largest root is the limit.
        let weight = shift * (-s / delta).exp() / delta;
        let h = s - a + weight;
        let slope = 1.0 - weight / delta;
        s = if h <= 0.0 {
            dc
        } else if slope > 0.0 {
            dc.min((s - h / slope).max(0.0))
        } else {
            // h is positive and decreasing on [0, s]: no root left, only 0 is stationary.
            0.0
        };
        steps += 1;
        residual = (s - step(s)).abs();
    }
    (s, steps, residual)
}

/// Output of [`rank_prox_detailed`].
#[derive(Clone, Debug)]
pub struct RankProx {
    pub matrix: DenseMatrix,
    pub dc: DcResult,
}

/// Prox of `beta * f(sigma(.))` with weight `mu` at `a`: the DC scalar prox
/// applied to the singular values, recomposed with the singular vectors of `a`.
pub fn rank_prox(
    a: &DenseMatrix,
    params: RankSurrogateParams,
    mu: f64,
    settings: DcSettings,
) -> Result<DenseMatrix> {
    rank_prox_detailed(a, params, mu, settings).map(|p| p.matrix)
}

pub fn rank_prox_detailed(
    a: &DenseMatrix,
    params: RankSurrogateParams,
    mu: f64,
    settings: DcSettings,
) -> Result<RankProx> {
    if params.beta == 0.0 {
        let sigma = Vec::new();
        return Ok(RankProx {
            matrix: a.clone(),
            dc: DcResult {
                sigma_star: sigma,
                inner_iterations: 0,
                stationarity_residual: 0.0,
            },
        });
    }
    let dec = svd(a)?;
    let dc = dc_prox_scalar(&dec.singular_values, params, mu, settings)?;
    let keep = dc.sigma_star.iter().rposition(|&s| s > 0.0).map_or(0, |k| k + 1);
    let matrix = if keep == 0 {
        DenseMatrix::zeros(a.rows(), a.cols())
    } else {
        dec.recompose(&dc.sigma_star[..keep])
    };
    Ok(RankProx { matrix, dc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(delta: f64, beta: f64) -> RankSurrogateParams {
        RankSurrogateParams::new(delta, beta).unwrap()
    }

    /// Dense grid search of the scalar objective over [0, a].
    fn grid_minimizer(a: f64, beta: f64, mu: f64, delta: f64, step: f64) -> (f64, f64) {
        let obj = |s: f64| beta * (1.0 - (-s / delta).exp()) + 0.5 * mu * (s - a) * (s - a);
        let n = (a / step).ceil() as usize;
        (0..=n)
            .map(|k| (k as f64 * step).min(a))
            .map(|s| (s, obj(s)))
            .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    #[test]
    fn surrogate_values() {
        assert_eq!(rank_surrogate(&[0.0, 0.0, 0.0], 0.3), 0.0);
        let v = rank_surrogate(&[1.0], 0.1);
        assert!((v - (1.0 - (-10.0f64).exp())).abs() < 1e-15);
        assert!((v - 0.9999546).abs() < 1e-7);
    }

    #[test]
    fn surrogate_tracks_rank_for_small_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let delta = 0.01;
        let sigma: Vec<f64> = (0..10)
            .map(|k| if k % 3 == 0 { 0.0 } else { rng.gen_range(10.0 * delta..5.0) })
            .collect();
        let rank = sigma.iter().filter(|&&s| s >= 10.0 * delta).count() as f64;
        assert!((rank_surrogate(&sigma, delta) - rank).abs() <= 0.01 * 10.0);
    }

    #[test]
    fn gradient_at_zero_and_delta() {
        assert_eq!(surrogate_gradient(&[0.0], 0.5), vec![2.0]);
        for delta in [0.05, 0.3, 2.0] {
            let g = surrogate_gradient(&[delta], delta)[0];
            assert!((g - (-1.0f64).exp() / delta).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let delta = rng.gen_range(0.05..2.0);
            let s = rng.gen_range(0.01..5.0);
            let h = 1e-6 * delta;
            let fd = (rank_surrogate(&[s + h], delta) - rank_surrogate(&[s - h], delta)) / (2.0 * h);
            let g = surrogate_gradient(&[s], delta)[0];
            if g > 1e-3 {
                assert!(((fd - g) / g).abs() < 1e-6, "s={s} delta={delta}: {fd} vs {g}");
            }
        }
    }

    #[test]
    fn soft_threshold_cases() {
        let q = DenseMatrix::from_row_major(1, 2, &[5.0, -1.0]).unwrap();
        assert_eq!(soft_threshold(&q, 2.0).to_row_major(), vec![3.0, 0.0]);
        assert_eq!(soft_threshold(&q, 0.0), q);
        let q = DenseMatrix::from_row_major(1, 2, &[-5.0, 1.5]).unwrap();
        assert_eq!(soft_threshold(&q, 2.0).to_row_major(), vec![-3.0, 0.0]);
    }

    #[test]
    fn soft_threshold_beats_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = DenseMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let tau = 0.3;
        let obj = |z: &DenseMatrix| tau * z.sum_abs() + 0.5 * z.sub(&q).frobenius_norm().powi(2);
        let z = soft_threshold(&q, tau);
        let best = obj(&z);
        for _ in 0..10_000 {
            let scale = rng.gen_range(1e-4..0.5);
            let probe = z.map(|v| v + scale * rng.gen_range(-1.0..1.0));
            assert!(obj(&probe) >= best - 1e-15);
        }
    }

    #[test]
    fn nonneg_project_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DenseMatrix::from_fn(3, 3, |_, _| rng.gen_range(0.0..1.0));
        assert_eq!(nonneg_project(&a), a);
        assert_eq!(nonneg_project(&DenseMatrix::identity(3).scale(-1.0)), DenseMatrix::zeros(3, 3));

        let a = DenseMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let p = nonneg_project(&a);
        for i in 0..5 {
            for j in 0..5 {
                let v = a.get(i, j);
                // two candidates {v, 0}; the feasible one closest to v wins
                let best = if v >= 0.0 { v } else { 0.0 };
                assert_eq!(p.get(i, j), best);
            }
        }
    }

    #[test]
    fn dc_prox_trivial_cases() {
        let r = dc_prox_scalar(&[0.0, 0.0], params(0.1, 1.0), 1.0, DcSettings::default()).unwrap();
        assert_eq!(r.sigma_star, vec![0.0, 0.0]);

        let a = [4.0, 2.5, 0.3];
        let r = dc_prox_scalar(&a, params(0.1, 0.0), 1.0, DcSettings::default()).unwrap();
        assert_eq!(r.sigma_star, a.to_vec());
    }

    #[test]
    fn dc_prox_matches_grid_search_scalar() {
        let r = dc_prox_scalar(&[2.0], params(0.1, 1.0), 1.0, DcSettings::default()).unwrap();
        let (s_grid, _) = grid_minimizer(2.0, 1.0, 1.0, 0.1, 1e-5);
        assert!((r.sigma_star[0] - s_grid).abs() < 1e-4, "{} vs {s_grid}", r.sigma_star[0]);
    }

    #[test]
    fn dc_prox_is_stationary_and_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let mut a: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..5.0)).collect();
            a.sort_by(|x, y| y.total_cmp(x));
            let p = params([0.05, 0.1, 0.5][rng.gen_range(0..3)], rng.gen_range(0.0..5.0));
            let mu = rng.gen_range(0.1..10.0);
            let r = dc_prox_scalar(&a, p, mu, DcSettings::default()).unwrap();
            for (s, sa) in r.sigma_star.iter().zip(&a) {
                assert!(*s >= 0.0 && s <= sa);
                let fixed = (sa - (p.beta() / mu) * (-s / p.delta()).exp() / p.delta()).max(0.0);
                assert!((s - fixed).abs() <= 1e-8);
            }
            assert!(r.sigma_star.windows(2).all(|w| w[0] >= w[1]));
            assert!(scalar_prox_objective(&r.sigma_star, &a, p, mu) <= scalar_prox_objective(&a, &a, p, mu));
        }
    }

    #[test]
    fn dc_prox_handles_near_tangent_components() {
        // a = c + delta*ln(c/delta) puts the fixed-point map tangent at s = delta*ln(c/delta)
        let (delta, beta, mu): (f64, f64, f64) = (0.1, 2.0, 1.0);
        let c = beta / (mu * delta);
        let tangent_a = delta * (c / delta).ln() + delta;
        for eps in [-1e-6, -1e-9, 0.0, 1e-9, 1e-6] {
            let r = dc_prox_scalar(&[tangent_a + eps], params(delta, beta), mu, DcSettings::default());
            let r = r.expect("DC prox must converge near tangency");
            assert!(r.stationarity_residual <= 1e-8);
        }
    }

    #[test]
    fn dc_prox_reports_exhausted_budget() {
        let settings = DcSettings {
            tolerance: 1e-300,
            max_inner: 1,
        };
        let err = dc_prox_scalar(&[0.9], params(0.1, 1.0), 1.0, settings).unwrap_err();
        assert!(matches!(err, Error::MaxInnerIterationsExceeded { .. }));
    }

    #[test]
    fn rank_prox_trivial_cases() {
        let p = params(0.1, 1.0);
        let z = rank_prox(&DenseMatrix::zeros(3, 3), p, 1.0, DcSettings::default()).unwrap();
        assert_eq!(z.max_abs(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = DenseMatrix::random_uniform(4, 4, &mut rng);
        let z = rank_prox(&a, params(0.1, 0.0), 1.0, DcSettings::default()).unwrap();
        assert_eq!(z, a);
    }

    #[test]
    fn rank_prox_on_diagonal_matches_scalar_oracle() {
        let a = DenseMatrix::from_diagonal(&[5.0, 0.01]);
        let z = rank_prox(&a, params(0.1, 1.0), 1.0, DcSettings::default()).unwrap();
        for (k, sa) in [5.0, 0.01].into_iter().enumerate() {
            let (grid, _) = grid_minimizer(sa, 1.0, 1.0, 0.1, 1e-5);
            assert!((z.get(k, k) - grid).abs() < 1e-4, "{} vs {grid}", z.get(k, k));
        }
        assert!(z.get(0, 1).abs() < 1e-12 && z.get(1, 0).abs() < 1e-12);
    }

    #[test]
    fn rank_prox_decreases_matrix_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = params(0.1, 0.5);
        let mu = 2.0;
        for _ in 0..20 {
            let a = DenseMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
            let z = rank_prox(&a, p, mu, DcSettings::default()).unwrap();
            let obj = |m: &DenseMatrix| {
                let s = svd(m).unwrap().singular_values;
                p.beta() * rank_surrogate(&s, p.delta()) + 0.5 * mu * m.sub(&a).frobenius_norm().powi(2)
            };
            assert!(obj(&z) <= obj(&a) + 1e-12);
        }
    }
}
