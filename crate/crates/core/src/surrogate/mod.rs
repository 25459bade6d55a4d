//! Learned performance estimator.
//!
//! A tour is encoded as the set of its directed edges. Each edge passes
//! through a two-layer tanh encoder, the embeddings are mean-pooled, and a
//! head maps the pooled vector to a feature vector (the last hidden layer)
//! and a scalar score. Higher scores mean shorter predicted tours.
//!
//! The estimator is trained as a ranking model: for two records the
//! probability that the first performs better is `sigmoid(s_i - s_j)`.

mod file;
mod layer;
mod train;

pub use file::{load_model, save_model};
pub use layer::Dense;
pub use train::{pairwise_accuracy, train, EpochStats, TrainConfig, TrainReport, ACCURACY_MIN_GAP};

use rand::Rng;

use crate::dataset::TrainingRecord;
use crate::error::{Error, Result};
use crate::ood::{CostParams, GaussianStats};
use crate::tsp::{ProblemInstance, Route};

/// Width of one directed-edge vector `(ax, ay, bx, by, bx-ax, by-ay)`.
pub const EDGE_DIM: usize = 6;

pub type EdgeVector = [f64; EDGE_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub edge_dim: usize,
    pub hidden_dim: usize,
    pub feature_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            edge_dim: EDGE_DIM,
            hidden_dim: 64,
            feature_dim: 32,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.edge_dim != EDGE_DIM {
            return Err(Error::InvalidArgument(format!(
                "edge_dim must be {EDGE_DIM}, got {}",
                self.edge_dim
            )));
        }
        if self.hidden_dim == 0 || self.feature_dim == 0 {
            return Err(Error::InvalidArgument(
                "hidden_dim and feature_dim must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// The four affine layers of the estimator. Also used as the gradient
/// container, since a gradient has exactly the shape of the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    /// edge_dim → hidden_dim, tanh
    pub edge_in: Dense,
    /// hidden_dim → hidden_dim, tanh
    pub edge_hidden: Dense,
    /// hidden_dim → feature_dim, tanh; its output is the feature vector
    pub feature: Dense,
    /// feature_dim → 1, linear
    pub score: Dense,
}

impl Network {
    pub const LAYER_NAMES: [&'static str; 4] = ["edge_in", "edge_hidden", "feature", "score"];

    pub fn zeros(config: &EncoderConfig) -> Self {
        Self {
            edge_in: Dense::zeros(config.hidden_dim, config.edge_dim),
            edge_hidden: Dense::zeros(config.hidden_dim, config.hidden_dim),
            feature: Dense::zeros(config.feature_dim, config.hidden_dim),
            score: Dense::zeros(1, config.feature_dim),
        }
    }

    pub fn init<R: Rng + ?Sized>(config: &EncoderConfig, rng: &mut R) -> Self {
        Self {
            edge_in: Dense::init_uniform(config.hidden_dim, config.edge_dim, rng),
            edge_hidden: Dense::init_uniform(config.hidden_dim, config.hidden_dim, rng),
            feature: Dense::init_uniform(config.feature_dim, config.hidden_dim, rng),
            score: Dense::init_uniform(1, config.feature_dim, rng),
        }
    }

    pub fn layers(&self) -> [&Dense; 4] {
        [&self.edge_in, &self.edge_hidden, &self.feature, &self.score]
    }

    pub fn layers_mut(&mut self) -> [&mut Dense; 4] {
        [
            &mut self.edge_in,
            &mut self.edge_hidden,
            &mut self.feature,
            &mut self.score,
        ]
    }

    pub fn fill_zero(&mut self) {
        self.layers_mut().into_iter().for_each(Dense::fill_zero);
    }

    fn matches(&self, config: &EncoderConfig) -> bool {
        let expected = Network::zeros(config);
        let ok = self
            .layers()
            .iter()
            .zip(expected.layers())
            .all(|(a, b)| a.rows() == b.rows() && a.cols() == b.cols());
        ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub pairs_per_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Trained estimator plus, once calibrated, the training-feature Gaussian and
/// the regularized-cost parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingModel {
    config: EncoderConfig,
    network: Network,
    pub gaussian: Option<GaussianStats>,
    pub cost_params: Option<CostParams>,
    pub meta: TrainingMeta,
}

/// Intermediate activations kept for backpropagation.
struct Trace {
    edges: Vec<EdgeVector>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    pooled: Vec<f64>,
    feature: Vec<f64>,
    score: f64,
}

impl RankingModel {
    pub fn new(config: EncoderConfig, network: Network, meta: TrainingMeta) -> Result<Self> {
        config.validate()?;
        if !network.matches(&config) {
            return Err(Error::validation("weight shapes do not match encoder config"));
        }
        if !network.layers().iter().all(|l| l.is_finite()) {
            return Err(Error::validation("non-finite weight"));
        }
        Ok(Self {
            config,
            network,
            gaussian: None,
            cost_params: None,
            meta,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    /// Mutable weights, for optimizers and gradient checks.
    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn is_calibrated(&self) -> bool {
        self.gaussian.is_some() && self.cost_params.is_some()
    }

    /// Embedding of one directed edge after both encoder layers.
    pub(crate) fn encode_edge(&self, edge: &EdgeVector, h1: &mut [f64], h2: &mut [f64]) {
        self.network.edge_in.forward_tanh(edge, h1);
        self.network.edge_hidden.forward_tanh(h1, h2);
    }

    /// Maps a pooled embedding to `(score, feature)`.
    pub(crate) fn head(&self, pooled: &[f64], feature: &mut [f64]) -> f64 {
        self.network.feature.forward_tanh(pooled, feature);
        let mut score = [0.0];
        self.network.score.forward(feature, &mut score);
        score[0]
    }

    /// Score and last-hidden-layer feature of a route.
    pub fn forward(&self, instance: &ProblemInstance, route: &Route) -> Result<(f64, FeatureVector)> {
        let trace = self.trace(instance, route)?;
        Ok((trace.score, FeatureVector(trace.feature)))
    }

    pub fn score(&self, instance: &ProblemInstance, route: &Route) -> Result<f64> {
        Ok(self.forward(instance, route)?.0)
    }

    fn trace(&self, instance: &ProblemInstance, route: &Route) -> Result<Trace> {
        let edges = edge_features(instance, route)?;
        let hid = self.config.hidden_dim;
        let n = edges.len();
        let mut h1 = vec![0.0; n * hid];
        let mut h2 = vec![0.0; n * hid];
        let mut pooled = vec![0.0; hid];
        for (k, edge) in edges.iter().enumerate() {
            let (a, b) = (&mut h1[k * hid..(k + 1) * hid], &mut h2[k * hid..(k + 1) * hid]);
            self.encode_edge(edge, a, b);
            pooled.iter_mut().zip(b.iter()).for_each(|(p, v)| *p += v);
        }
        let inv = 1.0 / n as f64;
        pooled.iter_mut().for_each(|p| *p *= inv);
        let mut feature = vec![0.0; self.config.feature_dim];
        let score = self.head(&pooled, &mut feature);
        if !score.is_finite() || feature.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite forward output on instance {}",
                instance.id()
            )));
        }
        Ok(Trace {
            edges,
            h1,
            h2,
            pooled,
            feature,
            score,
        })
    }

    /// Accumulates `upstream * d(score)/d(weights)` into `grad`.
    fn backward(&self, trace: &Trace, upstream: f64, grad: &mut Network) {
        let hid = self.config.hidden_dim;
        let net = &self.network;
        let n = trace.edges.len();

        let mut d_feature = vec![0.0; self.config.feature_dim];
        net.score
            .backward(&trace.feature, &[upstream], &mut grad.score, Some(&mut d_feature));
        let dz3: Vec<f64> = d_feature
            .iter()
            .zip(&trace.feature)
            .map(|(d, f)| d * (1.0 - f * f))
            .collect();
        let mut d_pooled = vec![0.0; hid];
        net.feature
            .backward(&trace.pooled, &dz3, &mut grad.feature, Some(&mut d_pooled));

        let inv = 1.0 / n as f64;
        let mut dz2 = vec![0.0; hid];
        let mut d_h1 = vec![0.0; hid];
        let mut dz1 = vec![0.0; hid];
        for (k, edge) in trace.edges.iter().enumerate() {
            let h1 = &trace.h1[k * hid..(k + 1) * hid];
            let h2 = &trace.h2[k * hid..(k + 1) * hid];
            dz2.iter_mut()
                .zip(&d_pooled)
                .zip(h2)
                .for_each(|((o, d), h)| *o = d * inv * (1.0 - h * h));
            net.edge_hidden
                .backward(h1, &dz2, &mut grad.edge_hidden, Some(&mut d_h1));
            dz1.iter_mut()
                .zip(&d_h1)
                .zip(h1)
                .for_each(|((o, d), h)| *o = d * (1.0 - h * h));
            net.edge_in.backward(edge, &dz1, &mut grad.edge_in, None);
        }
    }

    /// Cross-entropy of the pairwise ranking probability, plus its gradient
    /// accumulated into `grad` (which is not cleared first).
    pub fn pair_loss_accumulate(
        &self,
        first: &TrainingRecord,
        second: &TrainingRecord,
        grad: &mut Network,
    ) -> Result<f64> {
        let ti = self.trace(&first.instance, &first.route)?;
        let tj = self.trace(&second.instance, &second.route)?;
        let target = ranking_target(first.length, second.length);
        let loss = pair_loss(ti.score, tj.score, target);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite loss on records {} and {}",
                first.id, second.id
            )));
        }
        let g = pairwise_probability(ti.score, tj.score) - target;
        self.backward(&ti, g, grad);
        self.backward(&tj, -g, grad);
        Ok(loss)
    }

    pub fn pair_loss_and_gradient(&self, first: &TrainingRecord, second: &TrainingRecord) -> Result<(f64, Network)> {
        let mut grad = Network::zeros(&self.config);
        let loss = self.pair_loss_accumulate(first, second, &mut grad)?;
        Ok((loss, grad))
    }

    /// Loss only; used by gradient checks.
    pub fn pair_loss(&self, first: &TrainingRecord, second: &TrainingRecord) -> Result<f64> {
        let si = self.score(&first.instance, &first.route)?;
        let sj = self.score(&second.instance, &second.route)?;
        Ok(pair_loss(si, sj, ranking_target(first.length, second.length)))
    }
}

/// One vector per directed edge of the closed tour, in visiting order.
pub fn edge_features(instance: &ProblemInstance, route: &Route) -> Result<Vec<EdgeVector>> {
    route.validate_for(instance)?;
    let order = route.order();
    let n = order.len();
    Ok((0..n)
        .map(|k| edge_vector(instance, order[k], order[(k + 1) % n]))
        .collect())
}

pub(crate) fn edge_vector(instance: &ProblemInstance, from: usize, to: usize) -> EdgeVector {
    let [ax, ay] = instance.cities()[from];
    let [bx, by] = instance.cities()[to];
    [ax, ay, bx, by, bx - ax, by - ay]
}

/// Probability that the first item ranks better, `1 / (1 + exp(-(s_i - s_j)))`.
pub fn pairwise_probability(s_i: f64, s_j: f64) -> f64 {
    sigmoid(s_i - s_j)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// 1 when the first tour is shorter, 0 when longer, 0.5 on a tie.
pub fn ranking_target(length_i: f64, length_j: f64) -> f64 {
    match length_i.partial_cmp(&length_j) {
        Some(std::cmp::Ordering::Less) => 1.0,
        Some(std::cmp::Ordering::Greater) => 0.0,
        _ => 0.5,
    }
}

/// `-t ln P - (1-t) ln(1-P)` with `P = sigmoid(s_i - s_j)`.
pub fn pair_loss(s_i: f64, s_j: f64, target: f64) -> f64 {
    let d = s_i - s_j;
    target * softplus(-d) + (1.0 - target) * softplus(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> ProblemInstance {
        ProblemInstance::new(0, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    fn meta() -> TrainingMeta {
        TrainingMeta {
            seed: 0,
            epochs: 1,
            learning_rate: 0.01,
            pairs_per_epoch: 1,
        }
    }

    fn random_model(seed: u64, config: EncoderConfig) -> RankingModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RankingModel::new(config, Network::init(&config, &mut rng), meta()).unwrap()
    }

    #[test]
    fn edge_features_square() {
        let edges = edge_features(&square(), &Route::identity(4)).unwrap();
        assert_eq!(edges.len(), 4);
        assert_eq!(edges[0], [0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(edges[3], [0.0, 1.0, 0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn edge_features_two_cities() {
        let inst = ProblemInstance::new(0, vec![[0.1, 0.2], [0.4, 0.6]]).unwrap();
        let edges = edge_features(&inst, &Route::identity(2)).unwrap();
        assert_eq!(edges.len(), 2);
        assert_eq!(edges[0][0..2], edges[1][2..4]);
        assert_eq!(edges[0][2..4], edges[1][0..2]);
        assert_eq!(edges[0][4], -edges[1][4]);
    }

    #[test]
    fn edge_features_rejects_invalid_route() {
        let bad = Route::from_order_unchecked(vec![0, 0, 1, 2]);
        assert!(matches!(edge_features(&square(), &bad), Err(Error::InvalidRoute(_))));
    }

    #[test]
    fn zero_network_scores_final_bias() {
        let config = EncoderConfig::default();
        let mut net = Network::zeros(&config);
        net.score.bias_mut()[0] = 0.75;
        let model = RankingModel::new(config, net, meta()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = crate::tsp::sample_instance(0, 12, &mut rng).unwrap();
        for _ in 0..5 {
            let r = Route::random(12, &mut rng);
            assert_eq!(model.score(&inst, &r).unwrap(), 0.75);
        }
    }

    #[test]
    fn rotation_invariant_forward() {
        let model = random_model(2, EncoderConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = crate::tsp::sample_instance(0, 30, &mut rng).unwrap();
        let route = Route::random(30, &mut rng);
        let (s0, f0) = model.forward(&inst, &route).unwrap();
        let mut rotated = route.order().to_vec();
        rotated.rotate_left(7);
        let (s1, f1) = model.forward(&inst, &Route::new(rotated, 30).unwrap()).unwrap();
        assert!((s0 - s1).abs() <= 1e-12);
        for (a, b) in f0.values().iter().zip(f1.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!(s0.is_finite() && f0.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn pairwise_probability_cases() {
        assert_eq!(pairwise_probability(0.3, 0.3), 0.5);
        assert!((pairwise_probability(3f64.ln(), 0.0) - 0.75).abs() < 1e-15);
        let p = pairwise_probability(1000.0, 0.0);
        assert!(p > 0.0 && p <= 1.0 && p.is_finite());
        let q = pairwise_probability(0.0, 1000.0);
        assert!((0.0..1.0).contains(&q));
    }

    #[test]
    fn loss_at_equal_scores_and_tie() {
        assert!((pair_loss(1.0, 1.0, 0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(pair_loss(1000.0, 0.0, 0.0).is_finite());
        assert_eq!(ranking_target(1.0, 2.0), 1.0);
        assert_eq!(ranking_target(2.0, 1.0), 0.0);
        assert_eq!(ranking_target(2.0, 2.0), 0.5);
    }

    #[test]
    fn loss_symmetric_under_swap() {
        for &(a, b, t) in &[(0.3, -1.2, 1.0), (2.0, 2.5, 0.0), (0.0, 4.0, 0.5)] {
            assert!((pair_loss(a, b, t) - pair_loss(b, a, 1.0 - t)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let config = EncoderConfig::default();
        let other = EncoderConfig {
            hidden_dim: 8,
            ..config
        };
        assert!(RankingModel::new(config, Network::zeros(&other), meta()).is_err());
        assert!(EncoderConfig { edge_dim: 5, ..config }.validate().is_err());
    }
}
