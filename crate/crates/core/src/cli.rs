//! The `toprank` command line.
//!
//! Every command writes a `manifest.json` into its output directory; tables are
//! tab-separated with a header row. Exit codes: 0 success, 1 bad input,
//! 2 numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{
    self, file_sha256, format_g17, load_triplets, split_folds, synth_planted, Dataset, FormatOptions,
    PlantedConfig,
};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, fit, run_jobs, CrossValidation, EvaluationReport, ModelSpec};
use crate::matrix::{svd, DenseMatrix, UserItemMatrix};
use crate::prox::{rank_surrogate, surrogate_step_error};
use crate::solver::{solve_with_progress, DiagMode, ReportMatrix, SolveReport, SolverConfig};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "TOPRANK_OUT";

#[derive(Parser, Debug)]
#[command(name = "toprank", version, about = "Sparse low-rank item-item models for Top-N recommendation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model on the whole dataset.
    Train(TrainArgs),
    /// Leave-one-out cross-validation with HR/ARHR at several list lengths.
    Cv(CvArgs),
    /// Reconstruction statistics and singular-value profile of a trained model.
    Inspect(InspectArgs),
    /// Cross-validation over a grid of one or two hyperparameters.
    Sweep(SweepArgs),
    /// Write leave-one-out folds to disk.
    Split(SplitArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Triplet file: `user item [value]` per line.
    #[arg(long, required_unless_present = "planted")]
    data: Option<PathBuf>,
    /// Use the bundled planted synthetic instance instead of --data.
    #[arg(long, conflicts_with = "data")]
    planted: bool,
    /// Replace every value with 1.
    #[arg(long)]
    binarize: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Ours,
    Itemknn,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DiagArg {
    ProjectEachIter,
    ProjectAtEnd,
    Exact,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ReportArg {
    ProjectedW,
    Z3,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "ours")]
    model: ModelKind,
    /// Neighbors per item for itemknn.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 200.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 700.0)]
    mu0: f64,
    #[arg(long, default_value_t = 1.1)]
    gamma: f64,
    #[arg(long, default_value_t = 1e10)]
    mu_max: f64,
    /// Relative feasibility tolerance.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 300)]
    max_outer: usize,
    #[arg(long, value_enum, default_value = "exact")]
    diag_mode: DiagArg,
    /// Iterate reported as the model.
    #[arg(long, value_enum, default_value = "projected-w")]
    report: ReportArg,
    /// Seed for initialization and fold draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            alpha: self.alpha,
            beta: self.beta,
            delta: self.delta,
            mu0: self.mu0,
            gamma: self.gamma,
            mu_max: self.mu_max,
            feas_tolerance: self.tol,
            max_outer: self.max_outer,
            seed: self.seed,
            diag_mode: match self.diag_mode {
                DiagArg::ProjectEachIter => DiagMode::ProjectEachIter,
                DiagArg::ProjectAtEnd => DiagMode::ProjectAtEnd,
                DiagArg::Exact => DiagMode::Exact,
            },
            report: match self.report {
                ReportArg::ProjectedW => ReportMatrix::ProjectedW,
                ReportArg::Z3 => ReportMatrix::Z3,
            },
            ..SolverConfig::default()
        }
    }

    fn spec(&self) -> Result<ModelSpec> {
        match self.model {
            ModelKind::Ours => {
                let config = self.solver_config();
                config.validate()?;
                Ok(ModelSpec::Ours(config))
            }
            ModelKind::Itemknn if self.k == 0 => Err(Error::InvalidConfig("k must be >= 1".into())),
            ModelKind::Itemknn => Ok(ModelSpec::ItemKnn { k: self.k }),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct EvalArgs {
    /// List lengths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 15, 20, 25])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Folds (or grid points) run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Output directory (default: a fresh directory under $TOPRANK_OUT or ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print every outer iteration to standard error.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    eval: EvalArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// Directory written by `train`.
    #[arg(long)]
    model_dir: PathBuf,
    /// Dataset the model was trained on (default: the one in the manifest).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    binarize: bool,
    /// Surrogate sharpness (default: the run's delta).
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    eval: EvalArgs,
    /// `name=v1,v2,...` with name one of alpha, beta, delta, mu0; at most twice.
    #[arg(long, required = true)]
    grid: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Where a run's data came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    /// File path, or `planted` for the synthetic fixture.
    pub path: String,
    pub sha256: Option<String>,
    pub binarize: bool,
    pub n_users: usize,
    pub n_items: usize,
    pub entries: usize,
}

/// Everything needed to repeat a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub command: String,
    pub version: String,
    pub model: Option<String>,
    pub solver: Option<SolverConfig>,
    pub knn_k: Option<usize>,
    pub dataset: Option<DatasetInfo>,
    pub seed: u64,
    pub fold_seeds: Vec<u64>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    fn new(command_line: &[String], command: &str) -> Self {
        Self {
            command_line: command_line.to_vec(),
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            model: None,
            solver: None,
            knn_k: None,
            dataset: None,
            seed: 0,
            fold_seeds: Vec::new(),
            started_unix_ms: unix_ms(),
            finished_unix_ms: 0,
            artifacts: Vec::new(),
        }
    }

    fn set_model(&mut self, spec: &ModelSpec) {
        match spec {
            ModelSpec::Ours(config) => {
                self.model = Some("ours".into());
                self.solver = Some(config.clone());
            }
            ModelSpec::ItemKnn { k } => {
                self.model = Some("itemknn".into());
                self.knn_k = Some(*k);
            }
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            reason: format!("{}: {e}", path.display()),
        })
    }

    fn finish(mut self, out: &Path) -> Result<()> {
        self.finished_unix_ms = unix_ms();
        self.artifacts.push("manifest.json".into());
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        write_file(&out.join("manifest.json"), &json)
    }
}

fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn output_dir(out: Option<&PathBuf>, command: &str) -> Result<PathBuf> {
    let dir = match out {
        Some(dir) => dir.clone(),
        None => {
            let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
            root.join(format!("{command}-{}", unix_ms()))
        }
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn load_data(args: &DataArgs) -> Result<(Dataset, DatasetInfo)> {
    let (dataset, path, sha256) = if args.planted {
        let (mut x, _) = synth_planted(&PlantedConfig::default())?;
        if args.binarize {
            x = x.binarized();
        }
        let user_ids = (0..x.n_users()).map(|u| u.to_string()).collect();
        let item_ids = (0..x.n_items()).map(|i| i.to_string()).collect();
        (Dataset { matrix: x, user_ids, item_ids }, "planted".to_owned(), None)
    } else {
        let path = args.data.as_ref().expect("clap enforces --data or --planted");
        let options = FormatOptions {
            binarize: args.binarize,
            ..Default::default()
        };
        let dataset = load_triplets(path, options)?;
        (dataset, path.display().to_string(), Some(file_sha256(path)?))
    };
    let info = DatasetInfo {
        path,
        sha256,
        binarize: args.binarize,
        n_users: dataset.matrix.n_users(),
        n_items: dataset.matrix.n_items(),
        entries: dataset.matrix.nnz(),
    };
    Ok((dataset, info))
}

fn write_id_maps(out: &Path, dataset: &Dataset, manifest: &mut RunManifest) -> Result<()> {
    for (name, ids) in [("users.tsv", &dataset.user_ids), ("items.tsv", &dataset.item_ids)] {
        let mut text = String::from("index\tid\n");
        for (k, id) in ids.iter().enumerate() {
            writeln!(text, "{k}\t{id}").unwrap();
        }
        write_file(&out.join(name), &text)?;
        manifest.artifacts.push(name.into());
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let command_line: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a, &command_line),
        Command::Cv(a) => cmd_cv(a, &command_line),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Sweep(a) => cmd_sweep(a, &command_line),
        Command::Split(a) => cmd_split(a, &command_line),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn trace_table(report: &SolveReport) -> String {
    let mut out = String::from("iteration\tmu\tfeasibility_gap\tobjective\tmin_entry\tsurrogate_rank\tinner_iterations\n");
    for r in &report.trace {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.iteration,
            format_g17(r.mu),
            format_g17(r.feasibility_gap),
            format_g17(r.objective),
            format_g17(r.min_entry),
            format_g17(r.surrogate_rank),
            r.inner_iterations
        )
        .unwrap();
    }
    out
}

/// Summary of a solve, written as `report.json`.
#[derive(Serialize)]
struct SolveSummary {
    converged: bool,
    outer_iterations: usize,
    final_feasibility_gap: f64,
    feasibility_threshold: f64,
    final_objective: Option<f64>,
    wall_time_seconds: f64,
    seed: u64,
    nonzeros: usize,
}

fn solve_summary(report: &SolveReport) -> SolveSummary {
    SolveSummary {
        converged: report.converged,
        outer_iterations: report.outer_iterations,
        final_feasibility_gap: report.final_feasibility_gap,
        feasibility_threshold: report.feasibility_threshold,
        final_objective: report.trace.last().map(|r| r.objective),
        wall_time_seconds: report.wall_time.as_secs_f64(),
        seed: report.seed,
        nonzeros: report.final_w.as_dense().count_nonzero(),
    }
}

fn cmd_train(args: &TrainArgs, command_line: &[String]) -> Result<()> {
    let spec = args.model.spec()?;
    let (dataset, info) = load_data(&args.data)?;
    let out = output_dir(args.out.as_ref(), "train")?;
    let mut manifest = RunManifest::new(command_line, "train");
    manifest.set_model(&spec);
    manifest.dataset = Some(info);
    manifest.seed = args.model.seed;

    let x = &dataset.matrix;
    let (w, report) = match &spec {
        ModelSpec::Ours(config) => {
            let verbose = args.verbose;
            let report = solve_with_progress(x, config, |r| {
                if verbose {
                    eprintln!(
                        "iter {:>3}  mu {:.3e}  gap {:.3e}  objective {:.6e}  f {:.3}",
                        r.iteration, r.mu, r.feasibility_gap, r.objective, r.surrogate_rank
                    );
                }
            })?;
            if !report.converged {
                eprintln!(
                    "warning: feasibility gap {:.3e} above {:.3e} after {} iterations",
                    report.final_feasibility_gap, report.feasibility_threshold, report.outer_iterations
                );
            }
            (report.final_w.clone(), Some(report))
        }
        ModelSpec::ItemKnn { .. } => (fit(x, &spec)?.w, None),
    };

    data::write_coefficients(out.join("w.bin"), &w)?;
    let mut text = String::new();
    let n = w.size();
    for j in 0..n {
        for i in 0..n {
            let v = w.get(i, j);
            if v != 0.0 {
                writeln!(text, "{}\t{}\t{}", dataset.item_ids[i], dataset.item_ids[j], format_g17(v)).unwrap();
            }
        }
    }
    write_file(&out.join("w.tsv"), &text)?;
    manifest.artifacts.extend(["w.bin".into(), "w.tsv".into()]);
    if let Some(report) = &report {
        write_file(&out.join("trace.tsv"), &trace_table(report))?;
        let summary = serde_json::to_string_pretty(&solve_summary(report)).expect("summary serializes");
        write_file(&out.join("report.json"), &summary)?;
        manifest.artifacts.extend(["trace.tsv".into(), "report.json".into()]);
        println!(
            "converged={} iterations={} gap={:.3e} seconds={:.1}",
            report.converged,
            report.outer_iterations,
            report.final_feasibility_gap,
            report.wall_time.as_secs_f64()
        );
    }
    write_id_maps(&out, &dataset, &mut manifest)?;
    manifest.finish(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cv_table(cv: &CrossValidation) -> String {
    let mut out = format!("fold\t{}\n", EvaluationReport::TSV_HEADER);
    for f in &cv.folds {
        for r in &f.reports {
            writeln!(out, "{}\t{}", f.fold_index, r.to_tsv_row()).unwrap();
        }
    }
    for r in &cv.mean {
        writeln!(out, "mean\t{}", r.to_tsv_row()).unwrap();
    }
    out
}

fn solves_table(cv: &CrossValidation) -> String {
    let mut out = String::from("fold\tconverged\touter_iterations\tfeasibility_gap\tseconds\n");
    for f in &cv.folds {
        if let Some(s) = &f.solve {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.3}",
                f.fold_index,
                s.converged,
                s.outer_iterations,
                format_g17(s.final_feasibility_gap),
                s.wall_time.as_secs_f64()
            )
            .unwrap();
        }
    }
    out
}

fn check_eval_args(eval: &EvalArgs) -> Result<()> {
    if eval.folds == 0 {
        return Err(Error::InvalidConfig("--folds must be >= 1".into()));
    }
    if eval.n.is_empty() || eval.n.contains(&0) {
        return Err(Error::InvalidConfig("--n values must be >= 1".into()));
    }
    Ok(())
}

fn cmd_cv(args: &CvArgs, command_line: &[String]) -> Result<()> {
    let spec = args.model.spec()?;
    check_eval_args(&args.eval)?;
    let (dataset, info) = load_data(&args.data)?;
    let out = output_dir(args.out.as_ref(), "cv")?;
    let mut manifest = RunManifest::new(command_line, "cv");
    manifest.set_model(&spec);
    manifest.dataset = Some(info);
    manifest.seed = args.model.seed;

    let folds = split_folds(&dataset.matrix, args.eval.folds, args.model.seed);
    manifest.fold_seeds = folds.iter().map(|f| f.seed).collect();
    let cv = cross_validate(&folds, &spec, &args.eval.n, args.eval.jobs)?;
    let table = cv_table(&cv);
    write_file(&out.join("cv.tsv"), &table)?;
    manifest.artifacts.push("cv.tsv".into());
    if matches!(spec, ModelSpec::Ours(_)) {
        write_file(&out.join("solves.tsv"), &solves_table(&cv))?;
        manifest.artifacts.push("solves.tsv".into());
    }
    manifest.finish(&out)?;
    println!("{}", EvaluationReport::TSV_HEADER);
    for r in &cv.mean {
        println!("{}", r.to_tsv_row());
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// Statistics of `X W` relative to `X`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReconstructionStats {
    /// Fraction of positive entries in `X W`.
    pub density: f64,
    /// Mean of the positive entries of `X W`.
    pub nonzero_mean: f64,
    /// Mean of `X W` over the nonzero positions of `X`.
    pub support_mean: f64,
    /// Mean of the nonzero values of `X`.
    pub data_mean: f64,
}

pub fn reconstruction_stats(x: &UserItemMatrix, w: &DenseMatrix) -> ReconstructionStats {
    let xhat = x.times_dense(w);
    let (mut positive, mut positive_sum) = (0usize, 0.0);
    for v in xhat.to_row_major() {
        if v > 0.0 {
            positive += 1;
            positive_sum += v;
        }
    }
    let support_sum: f64 = x.entries().map(|(u, i, _)| xhat.get(u, i)).sum();
    let mean = |sum: f64, count: usize| if count == 0 { 0.0 } else { sum / count as f64 };
    ReconstructionStats {
        density: positive as f64 / (x.n_users() * x.n_items()) as f64,
        nonzero_mean: mean(positive_sum, positive),
        support_mean: mean(support_sum, x.nnz()),
        data_mean: x.mean_value(),
    }
}

/// Entries that a valid model cannot have: nonzero diagonal, negative values.
pub fn corruption_report(w: &DenseMatrix) -> Vec<String> {
    let mut problems = Vec::new();
    for (i, d) in w.diagonal().iter().enumerate() {
        if *d != 0.0 {
            problems.push(format!("nonzero diagonal entry W[{i}][{i}] = {d}"));
        }
    }
    let negatives = w.to_row_major().iter().filter(|&&v| v < 0.0).count();
    if negatives > 0 {
        problems.push(format!("{negatives} negative entries"));
    }
    if !w.is_finite() {
        problems.push("non-finite entries".into());
    }
    problems
}

fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    let dir = &args.model_dir;
    let w = data::read_coefficients(dir.join("w.bin"))?;
    let problems = corruption_report(&w);
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("corrupt model: {p}");
        }
        return Err(Error::InvalidMatrix(format!("{} is not a valid coefficient matrix", dir.display())));
    }
    let manifest_path = dir.join("manifest.json");
    let manifest = if manifest_path.exists() {
        Some(RunManifest::read(&manifest_path)?)
    } else {
        None
    };
    let delta = args
        .delta
        .or_else(|| manifest.as_ref().and_then(|m| m.solver.as_ref()).map(|s| s.delta))
        .unwrap_or(0.1);

    let dataset_info = manifest.as_ref().and_then(|m| m.dataset.clone());
    let data_args = match (&args.data, &dataset_info) {
        (Some(path), _) => Some(DataArgs { data: Some(path.clone()), planted: false, binarize: args.binarize }),
        (None, Some(info)) if info.path == "planted" => Some(DataArgs { data: None, planted: true, binarize: info.binarize }),
        (None, Some(info)) => Some(DataArgs { data: Some(info.path.clone().into()), planted: false, binarize: info.binarize }),
        (None, None) => None,
    };
    if let Some(data_args) = data_args {
        let (dataset, _) = load_data(&data_args)?;
        if dataset.matrix.n_items() != w.rows() {
            return Err(Error::InvalidMatrix(format!(
                "model has {} items, dataset has {}",
                w.rows(),
                dataset.matrix.n_items()
            )));
        }
        let stats = reconstruction_stats(&dataset.matrix, &w);
        println!("density={}", stats.density);
        println!("nonzero_mean={}", stats.nonzero_mean);
        println!("support_mean={}", stats.support_mean);
        println!("data_mean={}", stats.data_mean);
        let rel = dataset.matrix.reconstruction_error_sq(&w).sqrt() / dataset.matrix.frobenius_norm();
        println!("relative_residual={rel}");
    } else {
        eprintln!("note: no dataset given, skipping reconstruction statistics");
    }

    let sigma = svd(&w)?.singular_values;
    let profile: String = std::iter::once("index\tsigma\n".to_owned())
        .chain(sigma.iter().enumerate().map(|(k, s)| format!("{k}\t{}\n", format_g17(*s))))
        .collect();
    write_file(&dir.join("singular_values.tsv"), &profile)?;
    let largest = sigma.first().copied().unwrap_or(0.0);
    let numeric_rank = sigma.iter().filter(|&&s| s > 1e-10 * largest.max(f64::MIN_POSITIVE)).count();
    println!("w_nonzeros={}", w.count_nonzero());
    println!("numeric_rank={numeric_rank}");
    println!("surrogate_rank={} (delta={delta})", rank_surrogate(&sigma, delta));
    let head: Vec<String> = sigma.iter().take(10).map(|s| format!("{s:.4}")).collect();
    println!("top_singular_values={}", head.join(","));
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GridParam {
    Alpha,
    Beta,
    Delta,
    Mu0,
}

impl GridParam {
    fn name(self) -> &'static str {
        match self {
            GridParam::Alpha => "alpha",
            GridParam::Beta => "beta",
            GridParam::Delta => "delta",
            GridParam::Mu0 => "mu0",
        }
    }

    fn apply(self, config: &mut SolverConfig, v: f64) {
        match self {
            GridParam::Alpha => config.alpha = v,
            GridParam::Beta => config.beta = v,
            GridParam::Delta => config.delta = v,
            GridParam::Mu0 => config.mu0 = v,
        }
    }
}

fn parse_grid(spec: &str) -> Result<(GridParam, Vec<f64>)> {
    let bad = |why: &str| Error::InvalidConfig(format!("grid `{spec}`: {why}"));
    let (name, values) = spec.split_once('=').ok_or_else(|| bad("expected name=v1,v2,..."))?;
    let param = match name.trim() {
        "alpha" => GridParam::Alpha,
        "beta" => GridParam::Beta,
        "delta" => GridParam::Delta,
        "mu0" => GridParam::Mu0,
        _ => return Err(bad("name must be alpha, beta, delta or mu0")),
    };
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad("values must be numbers")))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(bad("no values"));
    }
    Ok((param, values))
}

fn cmd_sweep(args: &SweepArgs, command_line: &[String]) -> Result<()> {
    if args.model.model != ModelKind::Ours {
        return Err(Error::InvalidConfig("sweep grids apply to --model ours".into()));
    }
    check_eval_args(&args.eval)?;
    let grids = args.grid.iter().map(|g| parse_grid(g)).collect::<Result<Vec<_>>>()?;
    if grids.len() > 2 || (grids.len() == 2 && grids[0].0 == grids[1].0) {
        return Err(Error::InvalidConfig("at most two distinct grid parameters".into()));
    }
    let base = args.model.solver_config();
    let mut points: Vec<(Vec<f64>, SolverConfig)> = vec![(Vec::new(), base.clone())];
    for (param, values) in &grids {
        points = points
            .into_iter()
            .flat_map(|(coords, config)| {
                values.iter().map(move |&v| {
                    let mut config = config.clone();
                    param.apply(&mut config, v);
                    let mut coords = coords.clone();
                    coords.push(v);
                    (coords, config)
                })
            })
            .collect();
    }
    for (_, config) in &points {
        config.validate()?;
    }

    let (dataset, info) = load_data(&args.data)?;
    let out = output_dir(args.out.as_ref(), "sweep")?;
    let mut manifest = RunManifest::new(command_line, "sweep");
    manifest.set_model(&ModelSpec::Ours(base));
    manifest.dataset = Some(info);
    manifest.seed = args.model.seed;
    let folds = split_folds(&dataset.matrix, args.eval.folds, args.model.seed);
    manifest.fold_seeds = folds.iter().map(|f| f.seed).collect();

    // Parallelize across grid points when there are several, across folds otherwise.
    let (outer_jobs, inner_jobs) = if points.len() > 1 { (args.eval.jobs, 1) } else { (1, args.eval.jobs) };
    let results = run_jobs(outer_jobs, &points, |(_, config)| {
        cross_validate(&folds, &ModelSpec::Ours(config.clone()), &args.eval.n, inner_jobs)
    });

    let names: Vec<&str> = grids.iter().map(|g| g.0.name()).collect();
    let mut table = format!("{}\t{}\n", names.join("\t"), EvaluationReport::TSV_HEADER);
    for ((coords, _), cv) in points.iter().zip(results) {
        let cv = cv?;
        let coords: Vec<String> = coords.iter().map(|v| format_g17(*v)).collect();
        for r in &cv.mean {
            writeln!(table, "{}\t{}", coords.join("\t"), r.to_tsv_row()).unwrap();
        }
    }
    write_file(&out.join("sweep.tsv"), &table)?;
    manifest.artifacts.push("sweep.tsv".into());
    print!("{table}");

    if let Some((_, deltas)) = grids.iter().find(|g| g.0 == GridParam::Delta) {
        let mut surrogate = String::from("delta\tanalytic_error\tmeasured_error\trelative_difference\n");
        for &d in deltas {
            let analytic = d / 2.0;
            let measured = surrogate_step_error(d);
            writeln!(
                surrogate,
                "{}\t{}\t{}\t{:.3e}",
                format_g17(d),
                format_g17(analytic),
                format_g17(measured),
                ((measured - analytic) / analytic).abs()
            )
            .unwrap();
        }
        write_file(&out.join("surrogate_error.tsv"), &surrogate)?;
        manifest.artifacts.push("surrogate_error.tsv".into());
        print!("{surrogate}");
    }
    manifest.finish(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_split(args: &SplitArgs, command_line: &[String]) -> Result<()> {
    if args.folds == 0 {
        return Err(Error::InvalidConfig("--folds must be >= 1".into()));
    }
    let (dataset, info) = load_data(&args.data)?;
    let out = output_dir(args.out.as_ref(), "split")?;
    let mut manifest = RunManifest::new(command_line, "split");
    manifest.dataset = Some(info);
    manifest.seed = args.seed;
    let folds = split_folds(&dataset.matrix, args.folds, args.seed);
    manifest.fold_seeds = folds.iter().map(|f| f.seed).collect();
    for dir in data::write_folds(&out, &folds)? {
        let name = dir.file_name().expect("fold directory").to_string_lossy().into_owned();
        manifest.artifacts.push(name);
    }
    write_id_maps(&out, &dataset, &mut manifest)?;
    manifest.finish(&out)?;
    println!("wrote {} folds to {}", folds.len(), out.display());
    Ok(())
}
