//! Simulated annealing over closed tours with 2-opt moves, geometric cooling
//! and trajectory logging.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tsp::{self, ProblemInstance, Route};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaConfig {
    pub iterations: usize,
    /// Neighbor evaluations used to set the initial temperature.
    pub t0_samples: usize,
    /// `T_final / T_0`.
    pub final_temp_ratio: f64,
    pub log_every: usize,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            t0_samples: 100,
            final_temp_ratio: 1e-3,
            log_every: 50,
            seed: 0,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t0_samples < 2 {
            return Err(Error::InvalidArgument("t0_samples must be at least 2".into()));
        }
        if !(self.final_temp_ratio > 0.0 && self.final_temp_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "final_temp_ratio {} outside (0, 1)",
                self.final_temp_ratio
            )));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidArgument("log_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Temperature at iteration `k`, `t0 · ratio^(k / iterations)`.
    pub fn temperature(&self, t0: f64, k: usize) -> f64 {
        if self.iterations == 0 {
            return t0;
        }
        t0 * self.final_temp_ratio.powf(k as f64 / self.iterations as f64)
    }
}

/// What a cost function reports for one route. `score` and `md` are only
/// present for surrogate-backed objectives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    pub score: Option<f64>,
    pub md: Option<f64>,
}

impl Evaluation {
    pub fn cost_only(cost: f64) -> Self {
        Self {
            cost,
            score: None,
            md: None,
        }
    }
}

/// A cost to minimize over valid visiting orders of one instance.
pub trait Objective {
    fn evaluate(&self, order: &[usize]) -> Result<Evaluation>;
}

impl<F: Fn(&[usize]) -> f64> Objective for F {
    fn evaluate(&self, order: &[usize]) -> Result<Evaluation> {
        Ok(Evaluation::cost_only(self(order)))
    }
}

/// True tour length as the cost.
#[derive(Debug, Clone, Copy)]
pub struct TourLength<'a>(pub &'a ProblemInstance);

impl Objective for TourLength<'_> {
    fn evaluate(&self, order: &[usize]) -> Result<Evaluation> {
        Ok(Evaluation::cost_only(tsp::closed_length(self.0, order)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub iteration: usize,
    pub temperature: f64,
    pub cost: f64,
    pub score: Option<f64>,
    pub md: Option<f64>,
    pub true_length: Option<f64>,
    pub best_true_length: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

pub const TRAJECTORY_HEADER: &str = "iter,temperature,cost,score,md,true_length,best_true_length";

fn opt6(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl Trajectory {
    /// True lengths of the logged incumbents, if oracle logging was on.
    pub fn true_lengths(&self) -> Vec<f64> {
        self.samples.iter().filter_map(|s| s.true_length).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.samples.len() + 1));
        out.push_str(TRAJECTORY_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{},{},{},{}",
                s.iteration,
                s.temperature,
                s.cost,
                opt6(s.score),
                opt6(s.md),
                opt6(s.true_length),
                opt6(s.best_true_length)
            );
        }
        out
    }

    /// Parses the CSV written by [`Trajectory::to_csv`]. Row numbers in errors
    /// count the header as row 1.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        let expected: Vec<&str> = TRAJECTORY_HEADER.split(',').collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Validation {
                line: Some(1),
                message: format!("trajectory header must be `{TRAJECTORY_HEADER}`"),
            });
        }
        let mut samples = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| Error::Parse {
                line: row,
                message: e.to_string(),
            })?;
            let cell = |col: usize| -> Result<Option<f64>> {
                let raw = record.get(col).unwrap_or("").trim();
                if raw.is_empty() {
                    return Ok(None);
                }
                raw.parse::<f64>().map(Some).map_err(|_| Error::Validation {
                    line: Some(row),
                    message: format!("column {}: `{raw}` is not a number", expected[col]),
                })
            };
            let required = |col: usize| -> Result<f64> {
                cell(col)?.ok_or_else(|| Error::Validation {
                    line: Some(row),
                    message: format!("column {}: missing value", expected[col]),
                })
            };
            let iteration = record.get(0).unwrap_or("").trim();
            let iteration = iteration.parse::<usize>().map_err(|_| Error::Validation {
                line: Some(row),
                message: format!("column iter: `{iteration}` is not an iteration count"),
            })?;
            samples.push(TrajectorySample {
                iteration,
                temperature: required(1)?,
                cost: required(2)?,
                score: cell(3)?,
                md: cell(4)?,
                true_length: cell(5)?,
                best_true_length: cell(6)?,
            });
        }
        Ok(Self { samples })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub best_route: Route,
    pub best_cost: f64,
    pub best_evaluation: Evaluation,
    pub initial_temperature: f64,
    pub trajectory: Trajectory,
}

/// Draws positions `i < j` uniformly.
fn draw_segment<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a.min(b), a.max(b))
}

/// 2-opt move: reverses the segment between two distinct positions. Tours
/// with fewer than 3 cities are returned unchanged.
pub fn propose_neighbor<R: Rng + ?Sized>(route: &Route, rng: &mut R) -> Route {
    let mut order = route.order().to_vec();
    if order.len() >= 3 {
        let (i, j) = draw_segment(order.len(), rng);
        order[i..=j].reverse();
    }
    Route::from_order_unchecked(order)
}

/// Always accepts downhill moves, otherwise accepts with probability
/// `exp(-delta / temperature)`. Exactly one uniform draw is consumed either
/// way, so runs that share a seed see the same proposal sequence.
pub fn metropolis_accept<R: Rng + ?Sized>(delta: f64, temperature: f64, rng: &mut R) -> Result<bool> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let u: f64 = rng.gen();
    Ok(delta <= 0.0 || u < (-delta / temperature).exp())
}

/// Population standard deviation of the cost over `t0_samples` random
/// neighbors of the start route, or 1 when that is zero.
pub fn initial_temperature<O, R>(objective: &O, start: &Route, config: &SaConfig, rng: &mut R) -> Result<f64>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    let costs = (0..config.t0_samples)
        .map(|_| {
            let neighbor = propose_neighbor(start, rng);
            let cost = objective.evaluate(neighbor.order())?.cost;
            if !cost.is_finite() {
                return Err(Error::Numerical(
                    "non-finite cost while sampling the initial temperature".into(),
                ));
            }
            Ok(cost)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    Ok(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
}

fn checked<O: Objective + ?Sized>(objective: &O, order: &[usize], iteration: usize) -> Result<Evaluation> {
    let eval = objective.evaluate(order)?;
    if !eval.cost.is_finite() {
        return Err(Error::Numerical(format!("non-finite cost at iteration {iteration}")));
    }
    Ok(eval)
}

/// Runs simulated annealing from a uniformly random tour.
///
/// With `oracle_logging` the true length of every incumbent is tracked for
/// the trajectory; it never feeds back into the search.
pub fn anneal<O, R>(
    objective: &O,
    instance: &ProblemInstance,
    config: &SaConfig,
    rng: &mut R,
    oracle_logging: bool,
) -> Result<OptResult>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let n = instance.len();
    let start = Route::random(n, rng);
    let mut current_eval = checked(objective, start.order(), 0)?;
    let t0 = initial_temperature(objective, &start, config, rng)?;

    let oracle = |order: &[usize]| oracle_logging.then(|| tsp::closed_length(instance, order));
    let mut current = start.into_order();
    let mut current_true = oracle(&current);
    let mut best_true = current_true;
    let mut best = current.clone();
    let mut best_eval = current_eval;

    let sample = |k: usize, temperature: f64, eval: &Evaluation, t: Option<f64>, bt: Option<f64>| TrajectorySample {
        iteration: k,
        temperature,
        cost: eval.cost,
        score: eval.score,
        md: eval.md,
        true_length: t,
        best_true_length: bt,
    };
    let mut trajectory = Trajectory::default();
    trajectory
        .samples
        .push(sample(0, t0, &current_eval, current_true, best_true));

    let mut candidate = current.clone();
    for k in 1..=config.iterations {
        let temperature = config.temperature(t0, k);
        candidate.copy_from_slice(&current);
        if n >= 3 {
            let (i, j) = draw_segment(n, rng);
            candidate[i..=j].reverse();
        }
        let eval = checked(objective, &candidate, k)?;
        if metropolis_accept(eval.cost - current_eval.cost, temperature, rng)? {
            std::mem::swap(&mut current, &mut candidate);
            current_eval = eval;
            current_true = oracle(&current);
            if let (Some(t), Some(b)) = (current_true, best_true) {
                best_true = Some(b.min(t));
            }
            if current_eval.cost < best_eval.cost {
                best.copy_from_slice(&current);
                best_eval = current_eval;
            }
        }
        if k % config.log_every == 0 || k == config.iterations {
            trajectory
                .samples
                .push(sample(k, temperature, &current_eval, current_true, best_true));
        }
    }

    Ok(OptResult {
        best_route: Route::from_order_unchecked(best),
        best_cost: best_eval.cost,
        best_evaluation: best_eval,
        initial_temperature: t0,
        trajectory,
    })
}
