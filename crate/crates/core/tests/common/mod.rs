#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toprank::{DenseMatrix, UserItemMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random ratings in 1..=5 with the given density; every user gets at least one item.
pub fn random_ratings(rng: &mut ChaCha8Rng, users: usize, items: usize, density: f64) -> UserItemMatrix {
    let mut entries = Vec::new();
    for u in 0..users {
        let forced = rng.gen_range(0..items);
        for i in 0..items {
            if i == forced || rng.gen::<f64>() < density {
                entries.push((u, i, rng.gen_range(1..=5) as f64));
            }
        }
    }
    UserItemMatrix::new(users, items, entries).unwrap()
}

pub fn to_nalgebra(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j))
}

pub fn dense_of(x: &UserItemMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(x.n_users(), x.n_items());
    for (u, i, v) in x.entries() {
        m[(u, i)] = v;
    }
    m
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DMatrix<f64>) -> f64 {
    assert_eq!((a.rows(), a.cols()), b.shape());
    let mut worst: f64 = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            worst = worst.max((a.get(i, j) - b[(i, j)]).abs());
        }
    }
    worst
}

/// `phi(s) = beta (1 - exp(-s/delta)) + mu/2 (s - a)^2`, written out independently of the library.
pub fn scalar_objective(s: f64, a: f64, beta: f64, delta: f64, mu: f64) -> f64 {
    beta * (1.0 - (-s / delta).exp()) + 0.5 * mu * (s - a) * (s - a)
}

/// Global minimum of `phi` over a grid of `[0, a]` with the given step.
pub fn grid_minimum(a: f64, beta: f64, delta: f64, mu: f64, step: f64) -> (f64, f64) {
    let steps = (a / step).ceil() as usize;
    let mut best = (scalar_objective(0.0, a, beta, delta, mu), 0.0);
    for k in 1..=steps {
        let s = (k as f64 * step).min(a);
        let v = scalar_objective(s, a, beta, delta, mu);
        if v < best.0 {
            best = (v, s);
        }
    }
    best
}

fn frob_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Split-copy penalty `mu/2 ||Z - (W - Y/mu)||^2`.
pub fn coupling(z: &DMatrix<f64>, w: &DMatrix<f64>, y: &DMatrix<f64>, mu: f64) -> f64 {
    0.5 * mu * frob_sq(&(z - (w - y / mu)))
}

/// The four block subproblems, evaluated with nalgebra only.
pub struct Subproblems {
    pub x: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub z: [DMatrix<f64>; 3],
    pub y: [DMatrix<f64>; 3],
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl Subproblems {
    pub fn new(x: &UserItemMatrix, s: &toprank::SolverState, c: &toprank::SolverConfig) -> Self {
        Self {
            x: dense_of(x),
            w: to_nalgebra(&s.w),
            z: [to_nalgebra(&s.z1), to_nalgebra(&s.z2), to_nalgebra(&s.z3)],
            y: [to_nalgebra(&s.y1), to_nalgebra(&s.y2), to_nalgebra(&s.y3)],
            mu: s.mu,
            alpha: c.alpha,
            beta: c.beta,
            delta: c.delta,
        }
    }

    pub fn w_objective(&self, w: &DMatrix<f64>) -> f64 {
        let fit = 0.5 * frob_sq(&(&self.x - &self.x * w));
        fit + (0..3).map(|k| coupling(&self.z[k], w, &self.y[k], self.mu)).sum::<f64>()
    }

    pub fn z1_objective(&self, z: &DMatrix<f64>) -> f64 {
        self.alpha * z.iter().map(|v| v.abs()).sum::<f64>() + coupling(z, &self.w, &self.y[0], self.mu)
    }

    pub fn z2_objective(&self, z: &DMatrix<f64>) -> f64 {
        let sigma = nalgebra::SVD::new(z.clone(), false, false).singular_values;
        let f: f64 = sigma.iter().map(|s| 1.0 - (-s / self.delta).exp()).sum();
        self.beta * f + coupling(z, &self.w, &self.y[1], self.mu)
    }

    pub fn z3_objective(&self, z: &DMatrix<f64>) -> f64 {
        if z.iter().any(|&v| v < 0.0) {
            return f64::INFINITY;
        }
        coupling(z, &self.w, &self.y[2], self.mu)
    }

    /// `||(3 mu I + X^T X) W - [mu sum Z + sum Y + X^T X]|| / ||rhs||`
    pub fn w_residual(&self, w: &DMatrix<f64>) -> f64 {
        let g = self.x.transpose() * &self.x;
        let n = g.nrows();
        let lhs = (&g + DMatrix::identity(n, n) * (3.0 * self.mu)) * w;
        let rhs = &g + (&self.z[0] + &self.z[1] + &self.z[2]) * self.mu + &self.y[0] + &self.y[1] + &self.y[2];
        frob_sq(&(lhs - &rhs)).sqrt() / frob_sq(&rhs).sqrt()
    }
}

/// A random mid-solve iterate: everything drawn independently.
pub fn random_iterate(r: &mut ChaCha8Rng, n: usize, mu: f64) -> toprank::SolverState {
    let mut s = toprank::SolverState::initial(n, &toprank::SolverConfig::default());
    let mut draw = |scale: f64| DenseMatrix::from_fn(n, n, |_, _| scale * r.gen_range(-1.0..1.0));
    s.w = draw(1.0);
    s.z1 = draw(1.0);
    s.z2 = draw(1.0);
    s.z3 = draw(1.0).map(f64::abs);
    s.y1 = draw(2.0);
    s.y2 = draw(2.0);
    s.y3 = draw(2.0);
    s.mu = mu;
    s
}
