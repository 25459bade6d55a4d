//! Command-line front end.
//!
//! Exit codes: 0 success, 2 bad arguments, 3 I/O, 4 invalid data,
//! 5 numerical failure. Every command that writes an artifact also writes
//! `<artifact>.manifest.json` with the resolved flags.

mod plot;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::anneal::{anneal, SaConfig};
use crate::dataset::{self, read_dataset, read_dataset_any, write_dataset, DatasetKind};
use crate::error::{Error, Result};
use crate::harness::{bootstrap_mean_ci, evaluate, instance_seed, EvalConfig};
use crate::objective::{CostMode, EdgeCache, SurrogateObjective};
use crate::ood::{self, CostParams};
use crate::surrogate::{self, load_model, save_model, EncoderConfig, TrainConfig};
use crate::tsp::{self, ProblemInstance};

pub use plot::render_svg;

const TOOL: &str = env!("CARGO_PKG_NAME");
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "offline-co",
    version,
    about = "Offline TSP optimization with a learned ranking surrogate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Generate historical (instance, random route, length) triplets.
    GenTrain(GenTrainArgs),
    /// Generate test instances with a range of city counts.
    GenTest(GenTestArgs),
    /// Train the ranking surrogate and calibrate the distribution gate.
    Train(TrainArgs),
    /// Anneal one instance against the surrogate.
    Optimize(OptimizeArgs),
    /// Compare the regularized and baseline arms over a test set.
    Eval(EvalArgs),
    /// Plot true tour length against iteration from trajectory CSVs.
    Plot(PlotArgs),
    /// Estimate the Lipschitz constant of tour length over route distance.
    Lipschitz(LipschitzArgs),
}

#[derive(Debug, Args, Serialize)]
struct GenTrainArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 100)]
    cities: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct GenTestArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 40)]
    min_cities: usize,
    #[arg(long, default_value_t = 120)]
    max_cities: usize,
    #[arg(long, default_value_t = 2)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    /// Training dataset (line-delimited JSON).
    #[arg(long)]
    data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Training report CSV; defaults to `<out>.report.csv`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    #[arg(long, default_value_t = 2000)]
    pairs_per_epoch: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.1)]
    holdout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 32)]
    feature_dim: usize,
    #[arg(long, default_value_t = ood::DEFAULT_ALPHA_QUANTILE)]
    alpha_quantile: f64,
    #[arg(long, default_value_t = ood::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = ood::DEFAULT_RIDGE_SCALE)]
    ridge_scale: f64,
}

#[derive(Debug, Args, Serialize)]
struct SaArgs {
    #[arg(long, default_value_t = 20_000)]
    iters: usize,
    #[arg(long, default_value_t = 100)]
    t0_samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    final_temp_ratio: f64,
    #[arg(long, default_value_t = 50)]
    log_every: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SaArgs {
    fn config(&self) -> SaConfig {
        SaConfig {
            iterations: self.iters,
            t0_samples: self.t0_samples,
            final_temp_ratio: self.final_temp_ratio,
            log_every: self.log_every,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Proposed,
    Baseline,
}

#[derive(Debug, Args, Serialize)]
struct GateOverrides {
    /// Replace the model's penalty weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Replace the model's calibrated distance threshold.
    #[arg(long)]
    alpha: Option<f64>,
}

impl GateOverrides {
    fn apply(&self, stored: Option<CostParams>) -> Result<CostParams> {
        let mut params = stored.ok_or_else(|| Error::Config("model has no calibrated cost params".into()))?;
        if let Some(l) = self.lambda {
            params.lambda = l;
        }
        if let Some(a) = self.alpha {
            params.alpha = a;
        }
        params.validate().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(params)
    }
}

#[derive(Debug, Args, Serialize)]
struct OptimizeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Dataset holding the instance (train or test).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    id: u64,
    #[arg(long, value_enum, default_value_t = Mode::Proposed)]
    mode: Mode,
    /// Trajectory CSV to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    gate: GateOverrides,
    #[command(flatten)]
    sa: SaArgs,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    summary: PathBuf,
    /// Directory for per-instance trajectory CSVs.
    #[arg(long)]
    trajectories: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    #[arg(long, default_value_t = 40)]
    min_cities: usize,
    #[arg(long, default_value_t = 120)]
    max_cities: usize,
    #[command(flatten)]
    gate: GateOverrides,
    #[command(flatten)]
    sa: SaArgs,
}

#[derive(Debug, Args, Serialize)]
struct PlotArgs {
    /// Trajectory CSV; repeat for several series.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Legend label per input, in order; defaults to file stems.
    #[arg(long = "label")]
    labels: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct LipschitzArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    id: u64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enumerate every route pair instead of sampling (small instances only).
    #[arg(long)]
    exhaustive: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a Command,
    outputs: Vec<&'a Path>,
}

fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_manifest(command: &Command, artifact: &Path, outputs: Vec<&Path>) -> Result<()> {
    let manifest = Manifest {
        tool: TOOL,
        version: VERSION,
        command,
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Numerical(format!("cannot serialize manifest: {e}")))?;
    text.push('\n');
    write_file(&manifest_path(artifact), &text)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: &Command) -> Result<()> {
    match command {
        Command::GenTrain(a) => {
            let ds = dataset::generate_training_set(a.count, a.cities, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
            write_dataset(&ds, &a.out)?;
            write_manifest(command, &a.out, vec![&a.out])?;
            println!("wrote {} training records to {}", ds.len(), a.out.display());
        }
        Command::GenTest(a) => {
            let ds = dataset::generate_test_set(
                a.count,
                a.min_cities,
                a.max_cities,
                &mut ChaCha8Rng::seed_from_u64(a.seed),
            )?;
            write_dataset(&ds, &a.out)?;
            write_manifest(command, &a.out, vec![&a.out])?;
            println!("wrote {} test records to {}", ds.len(), a.out.display());
        }
        Command::Train(a) => cmd_train(command, a)?,
        Command::Optimize(a) => cmd_optimize(command, a)?,
        Command::Eval(a) => cmd_eval(command, a)?,
        Command::Plot(a) => cmd_plot(command, a)?,
        Command::Lipschitz(a) => cmd_lipschitz(a)?,
    }
    Ok(())
}

fn cmd_train(command: &Command, a: &TrainArgs) -> Result<()> {
    let ds = read_dataset(&a.data, DatasetKind::Train)?;
    let records = ds.as_train().unwrap_or_default();
    let encoder = EncoderConfig {
        hidden_dim: a.hidden_dim,
        feature_dim: a.feature_dim,
        ..EncoderConfig::default()
    };
    let config = TrainConfig {
        epochs: a.epochs as usize,
        pairs_per_epoch: a.pairs_per_epoch,
        learning_rate: a.lr,
        holdout_fraction: a.holdout,
        seed: a.seed,
    };
    if !(0.0..=1.0).contains(&a.alpha_quantile) {
        return Err(Error::InvalidArgument(format!(
            "alpha quantile {} outside [0, 1]",
            a.alpha_quantile
        )));
    }
    if records.len() < 2 {
        return Err(Error::validation(format!(
            "{} holds {} training records, at least 2 required",
            a.data.display(),
            records.len()
        )));
    }
    let (mut model, report) = surrogate::train(records, encoder, config)?;
    ood::calibrate_model(&mut model, records, a.ridge_scale, a.alpha_quantile, a.lambda)?;
    save_model(&model, &a.out)?;
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut p = a.out.as_os_str().to_owned();
        p.push(".report.csv");
        PathBuf::from(p)
    });
    write_file(&report_path, &report.to_csv())?;
    write_manifest(command, &a.out, vec![&a.out, &report_path])?;
    let acc = report
        .final_accuracy()
        .map(|v| format!("{v:.6}"))
        .unwrap_or_else(|| "n/a".into());
    let alpha = model.cost_params.map(|c| c.alpha).unwrap_or_default();
    println!(
        "trained {} epochs, held-out pairwise accuracy {acc}, alpha {alpha:.6}",
        a.epochs
    );
    Ok(())
}

fn find_instance(path: &Path, id: u64) -> Result<ProblemInstance> {
    let ds = read_dataset_any(path)?;
    ds.instance(id)
        .cloned()
        .ok_or_else(|| Error::validation(format!("no instance with id {id} in {}", path.display())))
}

fn cmd_optimize(command: &Command, a: &OptimizeArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let instance = find_instance(&a.data, a.id)?;
    let sa = a.sa.config();
    sa.validate()?;
    let mode = match a.mode {
        Mode::Baseline => CostMode::Baseline,
        Mode::Proposed => CostMode::Regularized(a.gate.apply(model.cost_params)?),
    };
    let cache = EdgeCache::build(&model, &instance);
    let objective = SurrogateObjective::new(&model, &cache, mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed(sa.seed, instance.id()));
    let result = anneal(&objective, &instance, &sa, &mut rng, true)?;
    write_file(&a.out, &result.trajectory.to_csv())?;
    write_manifest(command, &a.out, vec![&a.out])?;
    let length = tsp::tour_length(&instance, &result.best_route)?;
    println!(
        "instance {} mode {:?}: true length {length:.6}, cost {:.6}",
        instance.id(),
        a.mode,
        result.best_cost
    );
    Ok(())
}

fn cmd_eval(command: &Command, a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = read_dataset_any(&a.data)?;
    let config = EvalConfig {
        sa: a.sa.config(),
        jobs: a.jobs as usize,
        min_cities: a.min_cities,
        max_cities: a.max_cities,
        cost_params: Some(a.gate.apply(model.cost_params)?),
    };
    let run = evaluate(&model, &ds.instances(), &config)?;
    write_file(&a.report, &run.report.report_csv())?;
    write_file(&a.summary, &run.report.summary_csv())?;
    let mut outputs: Vec<PathBuf> = vec![a.report.clone(), a.summary.clone()];
    if let Some(dir) = &a.trajectories {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (result, pair) in run.report.results.iter().zip(&run.pairs) {
            for (arm, opt) in [("baseline", &pair.baseline), ("proposed", &pair.proposed)] {
                let path = dir.join(format!("{}_{arm}.csv", result.instance_id));
                write_file(&path, &opt.trajectory.to_csv())?;
            }
        }
        outputs.push(dir.clone());
    }
    write_manifest(command, &a.report, outputs.iter().map(PathBuf::as_path).collect())?;

    print!("{}", run.report.summary_csv());
    let reductions: Vec<f64> = run.report.results.iter().map(|r| r.reduction()).collect();
    let (lo, hi) = bootstrap_mean_ci(&reductions, 10_000, 0.95, a.sa.seed)?;
    let (rb, rp) = run.report.mean_rebounds();
    println!("overall reduction 95% bootstrap CI [{lo:.6}, {hi:.6}]");
    println!("mean rebound baseline {rb:.6} proposed {rp:.6}");
    Ok(())
}

fn cmd_plot(command: &Command, a: &PlotArgs) -> Result<()> {
    let mut series = Vec::with_capacity(a.inputs.len());
    for (i, path) in a.inputs.iter().enumerate() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let label = a.labels.get(i).cloned().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("series {}", i + 1))
        });
        let points = plot::read_series(&text).map_err(|e| e.context(path.display()))?;
        series.push(plot::Series { label, points });
    }
    write_file(&a.out, &render_svg(&series))?;
    write_manifest(command, &a.out, vec![&a.out])?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_lipschitz(a: &LipschitzArgs) -> Result<()> {
    let instance = find_instance(&a.data, a.id)?;
    let estimate = if a.exhaustive {
        tsp::exhaustive_lipschitz(&instance)?
    } else {
        tsp::estimate_lipschitz(&instance, a.samples as usize, &mut ChaCha8Rng::seed_from_u64(a.seed))?
    };
    println!("k_hat {:.6} pairs {}", estimate.k_hat, estimate.sample_pairs);
    Ok(())
}
