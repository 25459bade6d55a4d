use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EncoderConfig, Network, RankingModel, TrainingMeta};
use crate::dataset::TrainingRecord;
use crate::error::{Error, Result};

/// Pairs whose lengths differ by less than this fraction of the shorter one
/// are left out of the held-out accuracy.
pub const ACCURACY_MIN_GAP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub pairs_per_epoch: usize,
    pub learning_rate: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            pairs_per_epoch: 2000,
            learning_rate: 0.01,
            holdout_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::InvalidArgument(format!(
                "holdout fraction {} outside [0, 1)",
                self.holdout_fraction
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub holdout_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Record ids held out from gradient updates.
    pub holdout_ids: Vec<u64>,
}

impl TrainReport {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.holdout_accuracy)
    }

    /// `epoch,mean_loss,holdout_accuracy` with six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,holdout_accuracy\n");
        for e in &self.epochs {
            let acc = e.holdout_accuracy.map(|a| format!("{a:.6}")).unwrap_or_default();
            out.push_str(&format!("{},{:.6},{acc}\n", e.epoch, e.mean_loss));
        }
        out
    }
}

/// Trains a ranking model with plain SGD on uniformly sampled ordered pairs.
///
/// The seed drives, in order: weight initialization, the holdout split and
/// pair sampling, so a fixed config reproduces the same weights bit for bit.
pub fn train(
    records: &[TrainingRecord],
    encoder: EncoderConfig,
    config: TrainConfig,
) -> Result<(RankingModel, TrainReport)> {
    encoder.validate()?;
    config.validate()?;
    if records.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "training needs at least 2 records, got {}",
            records.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let network = Network::init(&encoder, &mut rng);
    let meta = TrainingMeta {
        seed: config.seed,
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        pairs_per_epoch: config.pairs_per_epoch,
    };
    let mut model = RankingModel::new(encoder, network, meta)?;

    let mut indices: Vec<usize> = (0..records.len()).collect();
    indices.shuffle(&mut rng);
    let holdout_len = (config.holdout_fraction * records.len() as f64).floor() as usize;
    let (holdout_idx, train_idx) = indices.split_at(holdout_len);
    if train_idx.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "holdout leaves {} training records, at least 2 required",
            train_idx.len()
        )));
    }
    let holdout: Vec<&TrainingRecord> = holdout_idx.iter().map(|&i| &records[i]).collect();

    let mut grad = Network::zeros(&encoder);
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut total = 0.0;
        for _ in 0..config.pairs_per_epoch {
            let a = rng.gen_range(0..train_idx.len());
            let mut b = rng.gen_range(0..train_idx.len() - 1);
            if b >= a {
                b += 1;
            }
            grad.fill_zero();
            let loss = model.pair_loss_accumulate(&records[train_idx[a]], &records[train_idx[b]], &mut grad)?;
            total += loss;
            for (w, g) in model.network_mut().layers_mut().into_iter().zip(grad.layers()) {
                w.descend(g, config.learning_rate);
            }
        }
        if !model.network().layers().iter().all(|l| l.is_finite()) {
            return Err(Error::Numerical(format!("weights diverged in epoch {epoch}")));
        }
        let mean_loss = if config.pairs_per_epoch == 0 {
            0.0
        } else {
            total / config.pairs_per_epoch as f64
        };
        epochs.push(EpochStats {
            epoch,
            mean_loss,
            holdout_accuracy: pairwise_accuracy(&model, &holdout, ACCURACY_MIN_GAP)?,
        });
    }

    let report = TrainReport {
        epochs,
        holdout_ids: holdout.iter().map(|r| r.id).collect(),
    };
    Ok((model, report))
}

/// Fraction of unordered record pairs, with relative length gap at least
/// `min_gap`, that the model orders correctly. `None` when no pair qualifies.
pub fn pairwise_accuracy(model: &RankingModel, records: &[&TrainingRecord], min_gap: f64) -> Result<Option<f64>> {
    let scores = records
        .iter()
        .map(|r| model.score(&r.instance, &r.route))
        .collect::<Result<Vec<_>>>()?;
    let (mut correct, mut total) = (0usize, 0usize);
    for i in 0..records.len() {
        for j in (i + 1)..records.len() {
            let (li, lj) = (records[i].length, records[j].length);
            if (li - lj).abs() < min_gap * li.min(lj) {
                continue;
            }
            total += 1;
            if (scores[i] > scores[j]) == (li < lj) {
                correct += 1;
            }
        }
    }
    Ok((total > 0).then(|| correct as f64 / total as f64))
}
