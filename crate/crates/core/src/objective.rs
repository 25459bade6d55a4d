//! Surrogate-backed objectives for the annealer.
//!
//! The encoder sees one directed edge at a time, so the embedding of every
//! ordered city pair of an instance can be computed once. Evaluating a tour
//! then reduces to summing cached rows and running the small head, and gives
//! the same bits as [`RankingModel::forward`].

use crate::anneal::{Evaluation, Objective};
use crate::error::{Error, Result};
use crate::ood::{self, CostParams};
use crate::surrogate::{edge_vector, RankingModel};
use crate::tsp::ProblemInstance;

/// Encoder output for every directed edge `a → b` of one instance.
#[derive(Debug, Clone)]
pub struct EdgeCache {
    n: usize,
    hidden: usize,
    data: Vec<f64>,
}

impl EdgeCache {
    pub fn build(model: &RankingModel, instance: &ProblemInstance) -> Self {
        let n = instance.len();
        let hidden = model.config().hidden_dim;
        let mut data = vec![0.0; n * n * hidden];
        let mut h1 = vec![0.0; hidden];
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let offset = (a * n + b) * hidden;
                model.encode_edge(
                    &edge_vector(instance, a, b),
                    &mut h1,
                    &mut data[offset..offset + hidden],
                );
            }
        }
        Self { n, hidden, data }
    }

    fn row(&self, a: usize, b: usize) -> &[f64] {
        let offset = (a * self.n + b) * self.hidden;
        &self.data[offset..offset + self.hidden]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostMode {
    /// `-score`
    Baseline,
    /// `-score + λ · max(0, md - α)`
    Regularized(CostParams),
}

pub struct SurrogateObjective<'a> {
    model: &'a RankingModel,
    cache: &'a EdgeCache,
    mode: CostMode,
}

impl<'a> SurrogateObjective<'a> {
    /// The regularized mode needs fitted Gaussian statistics; the baseline
    /// reports distances whenever they are available.
    pub fn new(model: &'a RankingModel, cache: &'a EdgeCache, mode: CostMode) -> Result<Self> {
        if matches!(mode, CostMode::Regularized(_)) && model.gaussian.is_none() {
            return Err(Error::Config(
                "regularized cost requires a model with fitted gaussian statistics".into(),
            ));
        }
        Ok(Self { model, cache, mode })
    }
}

impl Objective for SurrogateObjective<'_> {
    fn evaluate(&self, order: &[usize]) -> Result<Evaluation> {
        let n = order.len();
        if n != self.cache.n {
            return Err(Error::InvalidRoute(format!(
                "route visits {n} cities, cache holds {}",
                self.cache.n
            )));
        }
        let mut pooled = vec![0.0; self.cache.hidden];
        for k in 0..n {
            let row = self.cache.row(order[k], order[(k + 1) % n]);
            pooled.iter_mut().zip(row).for_each(|(p, v)| *p += v);
        }
        let inv = 1.0 / n as f64;
        pooled.iter_mut().for_each(|p| *p *= inv);
        let mut feature = vec![0.0; self.model.config().feature_dim];
        let score = self.model.head(&pooled, &mut feature);
        let md = self
            .model
            .gaussian
            .as_ref()
            .map(|g| ood::mahalanobis_unchecked(g, &feature));
        let cost = match (&self.mode, md) {
            (CostMode::Regularized(params), Some(md)) => ood::regularized_cost(score, md, params),
            _ => -score,
        };
        Ok(Evaluation {
            cost,
            score: Some(score),
            md,
        })
    }
}
