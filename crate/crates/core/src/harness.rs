//! Proposed-versus-baseline evaluation over a test set.
//!
//! Every instance is annealed twice with identical SA settings and seed: once
//! against the raw surrogate score, once against the distribution-regularized
//! cost. Results are normalized per instance by the baseline length and
//! grouped into city-count buckets.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::anneal::{anneal, OptResult, SaConfig};
use crate::error::{Error, Result};
use crate::objective::{CostMode, EdgeCache, SurrogateObjective};
use crate::ood::CostParams;
use crate::surrogate::RankingModel;
use crate::tsp::{self, ProblemInstance};

/// Seed of the random stream for one instance.
pub fn instance_seed(base: u64, instance_id: u64) -> u64 {
    base.wrapping_add(instance_id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    pub baseline: OptResult,
    pub proposed: OptResult,
}

/// Runs both arms on one instance with the model's calibrated cost params.
pub fn run_pair(model: &RankingModel, instance: &ProblemInstance, sa: &SaConfig) -> Result<PairOutcome> {
    let params = model
        .cost_params
        .ok_or_else(|| Error::Config("model has no calibrated cost params".into()))?;
    run_pair_with(model, instance, sa, params)
}

pub fn run_pair_with(
    model: &RankingModel,
    instance: &ProblemInstance,
    sa: &SaConfig,
    params: CostParams,
) -> Result<PairOutcome> {
    if model.gaussian.is_none() {
        return Err(Error::Config("model has no fitted gaussian statistics".into()));
    }
    let cache = EdgeCache::build(model, instance);
    let seed = instance_seed(sa.seed, instance.id());
    let baseline_obj = SurrogateObjective::new(model, &cache, CostMode::Baseline)?;
    let proposed_obj = SurrogateObjective::new(model, &cache, CostMode::Regularized(params))?;
    let baseline = anneal(&baseline_obj, instance, sa, &mut ChaCha8Rng::seed_from_u64(seed), true)?;
    let proposed = anneal(&proposed_obj, instance, sa, &mut ChaCha8Rng::seed_from_u64(seed), true)?;
    Ok(PairOutcome { baseline, proposed })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rebound {
    pub min: f64,
    pub last: f64,
    /// `(last - min) / min`
    pub rebound: f64,
}

/// How far the final incumbent fell back from the best true length reached.
pub fn rebound_metric(true_lengths: &[f64]) -> Result<Rebound> {
    let Some(&last) = true_lengths.last() else {
        return Err(Error::InvalidArgument("rebound of an empty trajectory".into()));
    };
    let min = true_lengths.iter().copied().fold(f64::INFINITY, f64::min);
    if min.is_nan() || min <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "rebound needs positive lengths, minimum is {min}"
        )));
    }
    Ok(Rebound {
        min,
        last,
        rebound: (last - min) / min,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceResult {
    pub instance_id: u64,
    pub n_cities: usize,
    pub baseline_length: f64,
    pub proposed_length: f64,
    /// `proposed_length / baseline_length`
    pub ratio: f64,
    pub baseline_rebound: f64,
    pub proposed_rebound: f64,
}

impl InstanceResult {
    pub fn reduction(&self) -> f64 {
        1.0 - self.ratio
    }

    pub fn from_pair(instance: &ProblemInstance, pair: &PairOutcome) -> Result<Self> {
        let baseline_length = tsp::tour_length(instance, &pair.baseline.best_route)?;
        let proposed_length = tsp::tour_length(instance, &pair.proposed.best_route)?;
        if baseline_length.is_nan() || baseline_length <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "instance {} has a zero-length baseline tour",
                instance.id()
            )));
        }
        Ok(Self {
            instance_id: instance.id(),
            n_cities: instance.len(),
            baseline_length,
            proposed_length,
            ratio: proposed_length / baseline_length,
            baseline_rebound: rebound_metric(&pair.baseline.trajectory.true_lengths())?.rebound,
            proposed_rebound: rebound_metric(&pair.proposed.trajectory.true_lengths())?.rebound,
        })
    }
}

/// City-count bucket edges of the comparison table.
pub const BUCKET_LABELS: [&str; 4] = ["n<60", "60<=n<80", "80<=n<100", "100<=n<120"];

/// Index into [`BUCKET_LABELS`]; the last bucket also takes `n` at the upper
/// end of the configured range.
pub fn bucket_of(n: usize) -> usize {
    match n {
        0..=59 => 0,
        60..=79 => 1,
        80..=99 => 2,
        _ => 3,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketSummary {
    pub label: String,
    pub count: usize,
    /// `1 - mean(ratio)`; `None` for an empty bucket.
    pub mean_reduction: Option<f64>,
}

impl BucketSummary {
    fn from_results<'a>(label: &str, results: impl Iterator<Item = &'a InstanceResult>) -> Self {
        let ratios: Vec<f64> = results.map(|r| r.ratio).collect();
        let mean_reduction = (!ratios.is_empty()).then(|| 1.0 - ratios.iter().sum::<f64>() / ratios.len() as f64);
        Self {
            label: label.to_string(),
            count: ratios.len(),
            mean_reduction,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub results: Vec<InstanceResult>,
    pub buckets: Vec<BucketSummary>,
    pub overall: BucketSummary,
}

pub const REPORT_HEADER: &str =
    "instance_id,n_cities,baseline_length,proposed_length,ratio,baseline_rebound,proposed_rebound";
pub const SUMMARY_HEADER: &str = "bucket,count,mean_reduction";

impl EvalReport {
    pub fn from_results(results: Vec<InstanceResult>) -> Self {
        let buckets = BUCKET_LABELS
            .iter()
            .enumerate()
            .map(|(b, label)| BucketSummary::from_results(label, results.iter().filter(|r| bucket_of(r.n_cities) == b)))
            .collect();
        let overall = BucketSummary::from_results("overall", results.iter());
        Self {
            results,
            buckets,
            overall,
        }
    }

    pub fn report_csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for r in &self.results {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.instance_id,
                r.n_cities,
                r.baseline_length,
                r.proposed_length,
                r.ratio,
                r.baseline_rebound,
                r.proposed_rebound
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = format!("{SUMMARY_HEADER}\n");
        for b in self.buckets.iter().chain(std::iter::once(&self.overall)) {
            let reduction = b.mean_reduction.map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{reduction}", b.label, b.count);
        }
        out
    }

    pub fn mean_rebounds(&self) -> (f64, f64) {
        let n = self.results.len().max(1) as f64;
        let b = self.results.iter().map(|r| r.baseline_rebound).sum::<f64>() / n;
        let p = self.results.iter().map(|r| r.proposed_rebound).sum::<f64>() / n;
        (b, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub sa: SaConfig,
    /// Worker threads; 1 runs on the calling thread.
    pub jobs: usize,
    pub min_cities: usize,
    pub max_cities: usize,
    /// Replaces the model's stored cost params when set.
    pub cost_params: Option<CostParams>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            sa: SaConfig::default(),
            jobs: 1,
            min_cities: 40,
            max_cities: 120,
            cost_params: None,
        }
    }
}

pub struct EvalRun {
    pub report: EvalReport,
    /// Both arms per instance, in instance order.
    pub pairs: Vec<PairOutcome>,
}

/// Evaluates every instance; the report is ordered by input position no
/// matter how the work was scheduled.
pub fn evaluate(model: &RankingModel, instances: &[&ProblemInstance], config: &EvalConfig) -> Result<EvalRun> {
    if instances.is_empty() {
        return Err(Error::validation("test set is empty"));
    }
    if !model.is_calibrated() {
        return Err(Error::Config("model is not calibrated".into()));
    }
    config.sa.validate()?;
    let params = config
        .cost_params
        .or(model.cost_params)
        .ok_or_else(|| Error::Config("no cost params".into()))?;
    for inst in instances {
        if !(config.min_cities..=config.max_cities).contains(&inst.len()) {
            return Err(Error::validation(format!(
                "instance {} has {} cities, outside [{}, {}]",
                inst.id(),
                inst.len(),
                config.min_cities,
                config.max_cities
            )));
        }
    }

    let run_one = |inst: &&ProblemInstance| -> Result<(PairOutcome, InstanceResult)> {
        let pair =
            run_pair_with(model, inst, &config.sa, params).map_err(|e| e.context(format!("instance {}", inst.id())))?;
        let result =
            InstanceResult::from_pair(inst, &pair).map_err(|e| e.context(format!("instance {}", inst.id())))?;
        Ok((pair, result))
    };
    let outcomes: Vec<Result<(PairOutcome, InstanceResult)>> = if config.jobs <= 1 {
        instances.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {} workers: {e}", config.jobs)))?;
        pool.install(|| instances.par_iter().map(run_one).collect())
    };

    let mut pairs = Vec::with_capacity(outcomes.len());
    let mut results = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let (pair, result) = outcome?;
        pairs.push(pair);
        results.push(result);
    }
    Ok(EvalRun {
        report: EvalReport::from_results(results),
        pairs,
    })
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_mean_ci(values: &[f64], resamples: usize, confidence: f64, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() || resamples == 0 {
        return Err(Error::InvalidArgument("bootstrap needs values and resamples".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    let lo = crate::ood::nearest_rank(means.clone(), tail)?;
    let hi = crate::ood::nearest_rank(means, 1.0 - tail)?;
    Ok((lo, hi))
}
