use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dense, EncoderConfig, Network, RankingModel, TrainingMeta};
use crate::error::{Error, Result};
use crate::ood::{CostParams, GaussianStats};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    config: ConfigFile,
    weights: WeightsFile,
    gaussian: Option<GaussianFile>,
    cost_params: Option<CostFile>,
    meta: MetaFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    edge_dim: usize,
    hidden_dim: usize,
    feature_dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    edge_in: LayerFile,
    edge_hidden: LayerFile,
    feature: LayerFile,
    score: LayerFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianFile {
    mu: Vec<f64>,
    sigma_inv: Vec<f64>,
    ridge: f64,
    n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostFile {
    alpha: f64,
    lambda: f64,
    alpha_quantile: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaFile {
    seed: u64,
    epochs: usize,
    learning_rate: f64,
    pairs_per_epoch: usize,
}

impl From<&Dense> for LayerFile {
    fn from(d: &Dense) -> Self {
        Self {
            rows: d.rows(),
            cols: d.cols(),
            data: d.weights().to_vec(),
            bias: d.bias().to_vec(),
        }
    }
}

fn layer(name: &str, file: LayerFile) -> Result<Dense> {
    let (rows, cols) = (file.rows, file.cols);
    Dense::from_parts(rows, cols, file.data, file.bias)
        .ok_or_else(|| Error::validation(format!("layer {name}: buffer sizes do not match {rows}x{cols}")))
}

pub fn to_json(model: &RankingModel) -> Result<String> {
    let net = model.network();
    let file = ModelFile {
        version: FORMAT_VERSION,
        config: ConfigFile {
            edge_dim: model.config.edge_dim,
            hidden_dim: model.config.hidden_dim,
            feature_dim: model.config.feature_dim,
        },
        weights: WeightsFile {
            edge_in: (&net.edge_in).into(),
            edge_hidden: (&net.edge_hidden).into(),
            feature: (&net.feature).into(),
            score: (&net.score).into(),
        },
        gaussian: model.gaussian.as_ref().map(|g| GaussianFile {
            mu: g.mu.clone(),
            sigma_inv: g.sigma_inv.clone(),
            ridge: g.ridge,
            n: g.n,
        }),
        cost_params: model.cost_params.map(|c| CostFile {
            alpha: c.alpha,
            lambda: c.lambda,
            alpha_quantile: c.alpha_quantile,
        }),
        meta: MetaFile {
            seed: model.meta.seed,
            epochs: model.meta.epochs,
            learning_rate: model.meta.learning_rate,
            pairs_per_epoch: model.meta.pairs_per_epoch,
        },
    };
    serde_json::to_string(&file).map_err(|e| Error::Numerical(format!("cannot serialize model: {e}")))
}

pub fn from_json(text: &str) -> Result<RankingModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::validation(format!("model file: {e}")))?;
    if file.version != FORMAT_VERSION {
        return Err(Error::validation(format!("unsupported model version {}", file.version)));
    }
    let config = EncoderConfig {
        edge_dim: file.config.edge_dim,
        hidden_dim: file.config.hidden_dim,
        feature_dim: file.config.feature_dim,
    };
    config.validate().map_err(|e| Error::validation(e.to_string()))?;
    let network = Network {
        edge_in: layer("edge_in", file.weights.edge_in)?,
        edge_hidden: layer("edge_hidden", file.weights.edge_hidden)?,
        feature: layer("feature", file.weights.feature)?,
        score: layer("score", file.weights.score)?,
    };
    let meta = TrainingMeta {
        seed: file.meta.seed,
        epochs: file.meta.epochs,
        learning_rate: file.meta.learning_rate,
        pairs_per_epoch: file.meta.pairs_per_epoch,
    };
    let mut model = RankingModel::new(config, network, meta)?;
    if let Some(g) = file.gaussian {
        let stats = GaussianStats {
            mu: g.mu,
            sigma_inv: g.sigma_inv,
            ridge: g.ridge,
            n: g.n,
        };
        stats.validate()?;
        if stats.dim() != config.feature_dim {
            return Err(Error::validation(format!(
                "gaussian has dimension {}, feature_dim is {}",
                stats.dim(),
                config.feature_dim
            )));
        }
        model.gaussian = Some(stats);
    }
    if let Some(c) = file.cost_params {
        let params = CostParams {
            alpha: c.alpha,
            lambda: c.lambda,
            alpha_quantile: c.alpha_quantile,
        };
        params.validate()?;
        model.cost_params = Some(params);
    }
    Ok(model)
}

pub fn save_model(model: &RankingModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = to_json(model)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RankingModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
