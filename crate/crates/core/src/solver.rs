//! Augmented-Lagrangian solver for
//!
//! ```text
//! min_W  1/2 ||X - XW||_F^2 + alpha ||W||_1 + beta * f(sigma(W))
//! s.t.   W >= 0, diag(W) = 0
//! ```
//!
//! with `f` the exponential rank surrogate. `W` is split into three copies
//! (`Z1` for the l1 term, `Z2` for the rank term, `Z3` for nonnegativity) that
//! are driven to agreement by multipliers `Y1..Y3` and a geometrically growing
//! penalty `mu`.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{gram, singular_values_from_gram, solve_spd, DenseMatrix, UserItemMatrix};
use crate::prox::{
    nonneg_project, rank_prox_detailed, rank_surrogate, soft_threshold, DcSettings,
    RankSurrogateParams,
};

/// When the `diag(W) = 0` constraint is enforced on the `W` iterate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagMode {
    /// Zero the diagonal right after every `W` solve.
    ProjectEachIter,
    /// Leave the iterates alone and zero the diagonal of the reported model.
    ProjectAtEnd,
    /// Minimize the `W` subproblem exactly under `diag(W) = 0`.
    #[default]
    Exact,
}

/// Which iterate becomes the reported model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportMatrix {
    /// `max(W, 0)` with zero diagonal.
    #[default]
    ProjectedW,
    /// The nonnegative copy `Z3`, with zero diagonal.
    Z3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// l1 weight.
    pub alpha: f64,
    /// Rank-surrogate weight.
    pub beta: f64,
    /// Surrogate sharpness; smaller is closer to the true rank.
    pub delta: f64,
    /// Initial penalty.
    pub mu0: f64,
    /// Penalty growth factor per outer iteration, > 1.
    pub gamma: f64,
    pub mu_max: f64,
    /// Stop once `max_i ||Z_i - W||_inf <= feas_tolerance * max(1, ||W||_inf)`.
    pub feas_tolerance: f64,
    pub max_outer: usize,
    pub dc_tolerance: f64,
    pub max_inner: usize,
    /// Seed for the uniform `[0, 1)` initialization of `Z1 = Z2 = Z3`.
    pub seed: u64,
    pub diag_mode: DiagMode,
    pub report: ReportMatrix,
}

impl Default for SolverConfig {
    /// Parameters tuned for MovieLens-100K.
    fn default() -> Self {
        Self {
            alpha: 200.0,
            beta: 0.2,
            delta: 0.1,
            mu0: 700.0,
            gamma: 1.1,
            mu_max: 1e10,
            feas_tolerance: 1e-4,
            max_outer: 300,
            dc_tolerance: 1e-8,
            max_inner: 100,
            seed: 0,
            diag_mode: DiagMode::default(),
            report: ReportMatrix::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::InvalidConfig(msg)) };
        check(self.alpha.is_finite() && self.alpha >= 0.0, format!("alpha must be >= 0, got {}", self.alpha))?;
        RankSurrogateParams::new(self.delta, self.beta)?;
        check(self.mu0.is_finite() && self.mu0 > 0.0, format!("mu0 must be > 0, got {}", self.mu0))?;
        check(self.gamma.is_finite() && self.gamma > 1.0, format!("gamma must be > 1, got {}", self.gamma))?;
        check(self.mu_max >= self.mu0, format!("mu_max ({}) must be >= mu0 ({})", self.mu_max, self.mu0))?;
        check(self.feas_tolerance > 0.0, format!("feas_tolerance must be > 0, got {}", self.feas_tolerance))?;
        check(self.dc_tolerance > 0.0, format!("dc_tolerance must be > 0, got {}", self.dc_tolerance))?;
        check(self.max_inner >= 1, "max_inner must be >= 1".into())?;
        Ok(())
    }

    pub fn rank_params(&self) -> RankSurrogateParams {
        RankSurrogateParams::new(self.delta, self.beta).expect("validated config")
    }

    pub fn dc_settings(&self) -> DcSettings {
        DcSettings {
            tolerance: self.dc_tolerance,
            max_inner: self.max_inner,
        }
    }
}

/// All iterates of one solve.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub w: DenseMatrix,
    pub z1: DenseMatrix,
    pub z2: DenseMatrix,
    pub z3: DenseMatrix,
    pub y1: DenseMatrix,
    pub y2: DenseMatrix,
    pub y3: DenseMatrix,
    pub mu: f64,
    pub outer_iteration: usize,
    /// `max_i ||Z_i - W||_inf` after the last multiplier update.
    pub feasibility_gap: f64,
    pub objective_trace: Vec<f64>,
}

impl SolverState {
    /// `Z1 = Z2 = Z3` uniform in `[0, 1)`, multipliers and `W` zero.
    pub fn initial(n_items: usize, config: &SolverConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let z = DenseMatrix::random_uniform(n_items, n_items, &mut rng);
        let zero = DenseMatrix::zeros(n_items, n_items);
        Self {
            w: zero.clone(),
            z1: z.clone(),
            z2: z.clone(),
            z3: z,
            y1: zero.clone(),
            y2: zero.clone(),
            y3: zero,
            mu: config.mu0,
            outer_iteration: 0,
            feasibility_gap: f64::INFINITY,
            objective_trace: Vec::new(),
        }
    }

    pub fn n_items(&self) -> usize {
        self.w.rows()
    }

    fn max_gap(&self) -> f64 {
        [&self.z1, &self.z2, &self.z3]
            .iter()
            .map(|z| z.max_abs_diff(&self.w))
            .fold(0.0, f64::max)
    }
}

/// Item-item aggregation matrix: square, nonnegative, zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientMatrix {
    values: DenseMatrix,
}

impl CoefficientMatrix {
    pub fn new(values: DenseMatrix) -> Result<Self> {
        if values.rows() != values.cols() {
            return Err(Error::InvalidMatrix(format!(
                "coefficient matrix must be square, got {}x{}",
                values.rows(),
                values.cols()
            )));
        }
        if let Some(i) = values.diagonal().iter().position(|&d| d != 0.0) {
            return Err(Error::InvalidMatrix(format!("nonzero diagonal at item {i}")));
        }
        if values.min_entry() < 0.0 {
            return Err(Error::InvalidMatrix("negative coefficient".into()));
        }
        Ok(Self { values })
    }

    /// Nearest feasible matrix: negatives clipped, diagonal zeroed.
    pub fn project(values: &DenseMatrix) -> Self {
        assert_eq!(values.rows(), values.cols(), "coefficient matrix must be square");
        let mut v = nonneg_project(values);
        v.zero_diagonal();
        Self { values: v }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: DenseMatrix::zeros(n, n),
        }
    }

    pub fn size(&self) -> usize {
        self.values.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn as_dense(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn into_dense(self) -> DenseMatrix {
        self.values
    }
}

/// One row of the per-iteration trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Penalty used during this iteration.
    pub mu: f64,
    pub feasibility_gap: f64,
    /// `1/2 ||X - XW||^2 + alpha ||W||_1 + beta f(sigma(W))`, nonnegativity excluded.
    pub objective: f64,
    /// `min(W)`: how far the iterate sits outside the nonnegative orthant.
    pub min_entry: f64,
    /// `f(sigma(Z2))`
    pub surrogate_rank: f64,
    pub inner_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub final_w: CoefficientMatrix,
    pub converged: bool,
    pub outer_iterations: usize,
    pub final_feasibility_gap: f64,
    /// The gap bound that `converged` was tested against.
    pub feasibility_threshold: f64,
    pub trace: Vec<IterationRecord>,
    pub wall_time: Duration,
    pub seed: u64,
}

impl SolveReport {
    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }
}

/// `(3 mu I + X^T X, mu (Z1 + Z2 + Z3) + (Y1 + Y2 + Y3) + X^T X)`
fn w_system(state: &SolverState, gram: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let mu = state.mu;
    let mut rhs = gram.clone();
    for z in [&state.z1, &state.z2, &state.z3] {
        rhs.add_scaled_in_place(mu, z);
    }
    for y in [&state.y1, &state.y2, &state.y3] {
        rhs.add_scaled_in_place(1.0, y);
    }
    let mut system = gram.clone();
    system.add_scaled_in_place(3.0 * mu, &DenseMatrix::identity(gram.rows()));
    (system, rhs)
}

/// Unconstrained minimizer of the `W` subproblem:
/// `(3 mu I + X^T X)^{-1} [mu (Z1 + Z2 + Z3) + (Y1 + Y2 + Y3) + X^T X]`.
pub fn w_subproblem_solution(state: &SolverState, gram: &DenseMatrix) -> Result<DenseMatrix> {
    let (system, rhs) = w_system(state, gram);
    solve_spd(&system, &rhs)
}

/// Minimizer of the `W` subproblem under `diag(W) = 0`.
///
/// Column `j` is the unconstrained solution `u_j` minus the multiple of
/// `A^{-1} e_j` that cancels its `j`-th entry, `A` being the system matrix.
pub fn w_subproblem_solution_zero_diag(state: &SolverState, gram: &DenseMatrix) -> Result<DenseMatrix> {
    let (system, rhs) = w_system(state, gram);
    let n = system.rows();
    let inverse = solve_spd(&system, &DenseMatrix::identity(n))?;
    let mut w = inverse.matmul(&rhs);
    for j in 0..n {
        let lambda = w.get(j, j) / inverse.get(j, j);
        for i in 0..n {
            w.set(i, j, w.get(i, j) - lambda * inverse.get(i, j));
        }
        w.set(j, j, 0.0);
    }
    Ok(w)
}

/// `W` step according to the configured diagonal handling.
pub fn update_w(state: &SolverState, gram: &DenseMatrix, config: &SolverConfig) -> Result<DenseMatrix> {
    match config.diag_mode {
        DiagMode::Exact => w_subproblem_solution_zero_diag(state, gram),
        DiagMode::ProjectEachIter => {
            let mut w = w_subproblem_solution(state, gram)?;
            w.zero_diagonal();
            Ok(w)
        }
        DiagMode::ProjectAtEnd => w_subproblem_solution(state, gram),
    }
}

/// `Z1 = soft_threshold(W - Y1/mu, alpha/mu)`
pub fn update_z1(state: &SolverState, config: &SolverConfig) -> DenseMatrix {
    let q = shifted(&state.w, &state.y1, state.mu);
    soft_threshold(&q, config.alpha / state.mu)
}

/// `Z2 = rank_prox(W - Y2/mu)`
pub fn update_z2(state: &SolverState, config: &SolverConfig) -> Result<DenseMatrix> {
    update_z2_detailed(state, config).map(|(z, _)| z)
}

fn update_z2_detailed(state: &SolverState, config: &SolverConfig) -> Result<(DenseMatrix, crate::prox::DcResult)> {
    let a = shifted(&state.w, &state.y2, state.mu);
    let prox = rank_prox_detailed(&a, config.rank_params(), state.mu, config.dc_settings())?;
    Ok((prox.matrix, prox.dc))
}

/// `Z3 = max(W - Y3/mu, 0)`
pub fn update_z3(state: &SolverState) -> DenseMatrix {
    nonneg_project(&shifted(&state.w, &state.y3, state.mu))
}

/// `Y_i += mu (Z_i - W)`, then `mu <- min(gamma mu, mu_max)`.
pub fn update_multipliers_and_mu(state: &mut SolverState, config: &SolverConfig) {
    let mu = state.mu;
    for (y, z) in [
        (&mut state.y1, &state.z1),
        (&mut state.y2, &state.z2),
        (&mut state.y3, &state.z3),
    ] {
        y.add_scaled_in_place(mu, &z.sub(&state.w));
    }
    state.feasibility_gap = state.max_gap();
    state.mu = (mu * config.gamma).min(config.mu_max);
    state.outer_iteration += 1;
}

fn shifted(w: &DenseMatrix, y: &DenseMatrix, mu: f64) -> DenseMatrix {
    let mut out = w.clone();
    out.add_scaled_in_place(-1.0 / mu, y);
    out
}

/// Model objective at `w` without the nonnegativity indicator.
pub fn model_objective(x: &UserItemMatrix, w: &DenseMatrix, config: &SolverConfig) -> Result<f64> {
    let fit = 0.5 * x.reconstruction_error_sq(w);
    let l1 = config.alpha * w.sum_abs();
    let rank = if config.beta == 0.0 {
        0.0
    } else {
        config.beta * rank_surrogate(&singular_values_from_gram(w)?, config.delta)
    };
    Ok(fit + l1 + rank)
}

fn ensure_finite(m: &DenseMatrix, block: &'static str, iteration: usize) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { block, iteration })
    }
}

pub fn solve(x: &UserItemMatrix, config: &SolverConfig) -> Result<SolveReport> {
    solve_with_progress(x, config, |_| {})
}

/// Runs the block loop, calling `progress` after every outer iteration.
pub fn solve_with_progress(
    x: &UserItemMatrix,
    config: &SolverConfig,
    mut progress: impl FnMut(&IterationRecord),
) -> Result<SolveReport> {
    config.validate()?;
    if x.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let started = Instant::now();
    let g = gram(x);
    let mut state = SolverState::initial(x.n_items(), config);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut threshold = config.feas_tolerance;

    while state.outer_iteration < config.max_outer {
        let t = state.outer_iteration;
        let mu = state.mu;
        state.w = update_w(&state, &g, config)?;
        ensure_finite(&state.w, "W", t)?;
        state.z1 = update_z1(&state, config);
        ensure_finite(&state.z1, "Z1", t)?;
        let (z2, dc) = update_z2_detailed(&state, config)?;
        state.z2 = z2;
        ensure_finite(&state.z2, "Z2", t)?;
        state.z3 = update_z3(&state);
        update_multipliers_and_mu(&mut state, config);
        for (y, name) in [(&state.y1, "Y1"), (&state.y2, "Y2"), (&state.y3, "Y3")] {
            ensure_finite(y, name, t)?;
        }

        let objective = model_objective(x, &state.w, config)?;
        state.objective_trace.push(objective);
        let record = IterationRecord {
            iteration: t,
            mu,
            feasibility_gap: state.feasibility_gap,
            objective,
            min_entry: state.w.min_entry(),
            surrogate_rank: if config.beta == 0.0 {
                f64::NAN
            } else {
                rank_surrogate(&dc.sigma_star, config.delta)
            },
            inner_iterations: dc.inner_iterations,
        };
        progress(&record);
        trace.push(record);

        threshold = config.feas_tolerance * state.w.max_abs().max(1.0);
        if state.feasibility_gap <= threshold {
            converged = true;
            break;
        }
    }

    let mut final_w = match config.report {
        ReportMatrix::ProjectedW => state.w.clone(),
        ReportMatrix::Z3 => state.z3.clone(),
    };
    final_w.zero_diagonal();
    Ok(SolveReport {
        final_w: CoefficientMatrix::project(&final_w),
        converged,
        outer_iterations: state.outer_iteration,
        final_feasibility_gap: state.feasibility_gap,
        feasibility_threshold: threshold,
        trace,
        wall_time: started.elapsed(),
        seed: config.seed,
    })
}
