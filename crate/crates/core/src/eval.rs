//! Top-N ranking, hit-rate metrics and the ItemKNN reference model.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{gram, DenseMatrix, UserItemMatrix};
use crate::data::FoldSplit;
use crate::solver::{solve, CoefficientMatrix, SolveReport, SolverConfig};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedList {
    pub user: usize,
    /// Recommendation order, best first.
    pub items: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// List length `N`.
    pub n: usize,
    pub hr: f64,
    pub arhr: f64,
    pub hits: usize,
    pub users_evaluated: usize,
    /// `(hr, arhr)` of each fold when this report aggregates several.
    pub per_fold: Vec<(f64, f64)>,
}

impl EvaluationReport {
    /// Pools several folds evaluated at the same `N`: hit and user counts add
    /// up, so `hr` is the mean of the fold HRs when every fold has the same users.
    pub fn aggregate(folds: &[EvaluationReport]) -> Option<EvaluationReport> {
        let n = folds.first()?.n;
        assert!(folds.iter().all(|f| f.n == n), "folds evaluated at different N");
        let hits = folds.iter().map(|f| f.hits).sum();
        let users_evaluated = folds.iter().map(|f| f.users_evaluated).sum();
        let reciprocal: f64 = folds.iter().map(|f| f.arhr * f.users_evaluated as f64).sum();
        let (hr, arhr) = if users_evaluated == 0 {
            (0.0, 0.0)
        } else {
            (
                hits as f64 / users_evaluated as f64,
                reciprocal / users_evaluated as f64,
            )
        };
        Some(EvaluationReport {
            n,
            hr,
            arhr,
            hits,
            users_evaluated,
            per_fold: folds.iter().map(|f| (f.hr, f.arhr)).collect(),
        })
    }

    /// `key=value` lines.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        writeln!(out, "n={}", self.n).unwrap();
        writeln!(out, "hr={}", self.hr).unwrap();
        writeln!(out, "arhr={}", self.arhr).unwrap();
        writeln!(out, "hits={}", self.hits).unwrap();
        writeln!(out, "users_evaluated={}", self.users_evaluated).unwrap();
        for (k, (hr, arhr)) in self.per_fold.iter().enumerate() {
            writeln!(out, "fold{k}_hr={hr}").unwrap();
            writeln!(out, "fold{k}_arhr={arhr}").unwrap();
        }
        out
    }

    pub const TSV_HEADER: &'static str = "n\thr\tarhr\thits\tusers";

    pub fn to_tsv_row(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{}\t{}",
            self.n, self.hr, self.arhr, self.hits, self.users_evaluated
        )
    }
}

/// `X_train * W`
pub fn score_users(x_train: &UserItemMatrix, w: &CoefficientMatrix) -> DenseMatrix {
    x_train.times_dense(w.as_dense())
}

/// Best-first order: higher score, then lower item index.
fn rank_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// The `n` best unrated items for every user.
///
/// Users without training items get the popularity ranking (item column sums).
pub fn top_n(x_train: &UserItemMatrix, scores: &DenseMatrix, n: usize) -> Vec<RankedList> {
    assert!(n >= 1, "list length must be at least 1");
    assert_eq!(scores.shape(), (x_train.n_users(), x_train.n_items()));
    let popularity = x_train.column_sums();
    let mut row = vec![0.0; x_train.n_items()];
    (0..x_train.n_users())
        .map(|u| {
            let (rated, _) = x_train.user_row(u);
            let source: &[f64] = if rated.is_empty() {
                &popularity
            } else {
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = scores.get(u, j);
                }
                &row
            };
            RankedList {
                user: u,
                items: best_unrated(source, rated, n),
            }
        })
        .collect()
}

fn best_unrated(scores: &[f64], rated: &[usize], n: usize) -> Vec<usize> {
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(scores.len() - rated.len());
    let mut next_rated = rated.iter().peekable();
    for (j, &s) in scores.iter().enumerate() {
        if next_rated.peek() == Some(&&j) {
            next_rated.next();
            continue;
        }
        candidates.push((s, j));
    }
    let take = n.min(candidates.len());
    if take == 0 {
        return Vec::new();
    }
    if take < candidates.len() {
        candidates.select_nth_unstable_by(take - 1, rank_order);
        candidates.truncate(take);
    }
    candidates.sort_unstable_by(rank_order);
    candidates.into_iter().map(|(_, j)| j).collect()
}

/// HR and ARHR at list length `n` for leave-one-out test pairs `(user, item)`.
pub fn evaluate(lists: &[RankedList], test: &[(usize, usize)], n: usize) -> Result<EvaluationReport> {
    let by_user: HashMap<usize, &RankedList> = lists.iter().map(|l| (l.user, l)).collect();
    let mut hits = 0;
    let mut reciprocal = 0.0;
    for &(user, item) in test {
        let list = by_user.get(&user).ok_or(Error::MissingList { user })?;
        if let Some(pos) = list.items.iter().take(n).position(|&j| j == item) {
            hits += 1;
            reciprocal += 1.0 / (pos + 1) as f64;
        }
    }
    let users = test.len();
    let (hr, arhr) = if users == 0 {
        (0.0, 0.0)
    } else {
        (hits as f64 / users as f64, reciprocal / users as f64)
    };
    Ok(EvaluationReport {
        n,
        hr,
        arhr,
        hits,
        users_evaluated: users,
        per_fold: Vec::new(),
    })
}

/// Cosine ItemKNN: column `j` keeps the `k` items most similar to item `j`.
pub fn item_knn(x_train: &UserItemMatrix, k: usize) -> CoefficientMatrix {
    assert!(k >= 1, "k must be at least 1");
    let n = x_train.n_items();
    let g = gram(x_train);
    let norms: Vec<f64> = (0..n).map(|i| g.get(i, i).sqrt()).collect();
    let mut w = DenseMatrix::zeros(n, n);
    for j in 0..n {
        if norms[j] == 0.0 {
            continue;
        }
        let mut sims: Vec<(f64, usize)> = (0..n)
            .filter(|&i| i != j && norms[i] > 0.0)
            .map(|i| (g.get(i, j) / (norms[i] * norms[j]), i))
            .filter(|&(s, _)| s > 0.0)
            .collect();
        let take = k.min(sims.len());
        if take == 0 {
            continue;
        }
        if take < sims.len() {
            sims.select_nth_unstable_by(take - 1, rank_order);
        }
        for &(s, i) in &sims[..take] {
            w.set(i, j, s.min(1.0));
        }
    }
    CoefficientMatrix::new(w).expect("cosine of nonnegative columns is feasible")
}

/// Which recommender to fit on a training matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Ours(SolverConfig),
    ItemKnn { k: usize },
}

/// A fitted model plus the solver report when there was a solve.
#[derive(Clone, Debug)]
pub struct FittedModel {
    pub w: CoefficientMatrix,
    pub solve: Option<SolveReport>,
}

pub fn fit(x_train: &UserItemMatrix, spec: &ModelSpec) -> Result<FittedModel> {
    match spec {
        ModelSpec::Ours(config) => {
            let report = solve(x_train, config)?;
            Ok(FittedModel {
                w: report.final_w.clone(),
                solve: Some(report),
            })
        }
        ModelSpec::ItemKnn { k } => Ok(FittedModel {
            w: item_knn(x_train, *k),
            solve: None,
        }),
    }
}

/// Per-fold outcome of [`cross_validate`].
#[derive(Clone, Debug)]
pub struct FoldOutcome {
    pub fold_index: usize,
    /// One report per requested list length, in request order.
    pub reports: Vec<EvaluationReport>,
    pub solve: Option<SolveReport>,
}

#[derive(Clone, Debug)]
pub struct CrossValidation {
    /// Sorted by fold index.
    pub folds: Vec<FoldOutcome>,
    /// Pooled reports, one per list length.
    pub mean: Vec<EvaluationReport>,
}

/// Fits and evaluates every fold at every list length in `ns`, running up to
/// `jobs` folds at a time.
pub fn cross_validate(folds: &[FoldSplit], spec: &ModelSpec, ns: &[usize], jobs: usize) -> Result<CrossValidation> {
    assert!(!ns.is_empty(), "no list lengths requested");
    let max_n = *ns.iter().max().unwrap();
    let outcomes = run_jobs(jobs, folds, |fold| -> Result<FoldOutcome> {
        let fitted = fit(&fold.train, spec)?;
        let scores = score_users(&fold.train, &fitted.w);
        let lists = top_n(&fold.train, &scores, max_n);
        let test = fold.test_pairs();
        let reports = ns.iter().map(|&n| evaluate(&lists, &test, n)).collect::<Result<_>>()?;
        Ok(FoldOutcome {
            fold_index: fold.fold_index,
            reports,
            solve: fitted.solve,
        })
    });
    let mut folds: Vec<FoldOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
    folds.sort_by_key(|f| f.fold_index);
    let mean = (0..ns.len())
        .map(|k| {
            let per_n: Vec<EvaluationReport> = folds.iter().map(|f| f.reports[k].clone()).collect();
            EvaluationReport::aggregate(&per_n).expect("at least one fold")
        })
        .collect();
    Ok(CrossValidation { folds, mean })
}

/// Maps `task` over `items` on at most `jobs` threads; output order follows input.
pub fn run_jobs<T, R, F>(jobs: usize, items: &[T], task: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&task).collect();
    }
    let next = AtomicUsize::new(0);
    let mut results: Vec<(usize, R)> = std::thread::scope(|scope| {
        let workers: Vec<_> = (0..jobs)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let k = next.fetch_add(1, AtomicOrdering::Relaxed);
                        if k >= items.len() {
                            break done;
                        }
                        done.push((k, task(&items[k])));
                    }
                })
            })
            .collect();
        workers.into_iter().flat_map(|w| w.join().expect("worker panicked")).collect()
    });
    results.sort_by_key(|r| r.0);
    results.into_iter().map(|r| r.1).collect()
}
