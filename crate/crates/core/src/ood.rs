//! Gaussian statistics of training features, squared Mahalanobis distance,
//! and the distribution-regularized cost.

use nalgebra::DMatrix;

use crate::dataset::TrainingRecord;
use crate::error::{Error, Result};
use crate::surrogate::{FeatureVector, RankingModel};

pub const DEFAULT_RIDGE_SCALE: f64 = 1e-6;
pub const DEFAULT_LAMBDA: f64 = 1e6;
pub const DEFAULT_ALPHA_QUANTILE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mu: Vec<f64>,
    /// Row-major `(Σ + ridge·I)⁻¹`.
    pub sigma_inv: Vec<f64>,
    pub ridge: f64,
    pub n: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Checks shape, symmetry (1e-9) and finiteness.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.sigma_inv.len() != d * d {
            return Err(Error::validation(format!(
                "sigma_inv has {} entries, expected {}",
                self.sigma_inv.len(),
                d * d
            )));
        }
        if self.n < 2 {
            return Err(Error::validation("gaussian fitted on fewer than 2 samples"));
        }
        if !self.mu.iter().chain(&self.sigma_inv).all(|v| v.is_finite()) || self.ridge.is_nan() || self.ridge < 0.0 {
            return Err(Error::validation("non-finite gaussian statistics"));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (self.sigma_inv[i * d + j] - self.sigma_inv[j * d + i]).abs() > 1e-9 {
                    return Err(Error::validation("sigma_inv is not symmetric"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    pub alpha: f64,
    pub lambda: f64,
    pub alpha_quantile: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.lambda >= 0.0 && (0.0..=1.0).contains(&self.alpha_quantile)) {
            return Err(Error::validation(format!(
                "cost params out of range: alpha {}, lambda {}, quantile {}",
                self.alpha, self.lambda, self.alpha_quantile
            )));
        }
        Ok(())
    }
}

/// Population covariance `(1/N) Σ (f - μ)(f - μ)ᵀ`, row-major, with the mean.
pub fn covariance(features: &[FeatureVector]) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some(first) = features.first() else {
        return Err(Error::InvalidArgument("no feature vectors".into()));
    };
    let d = first.len();
    if features.iter().any(|f| f.len() != d) {
        return Err(Error::InvalidArgument("feature vectors differ in length".into()));
    }
    let inv_n = 1.0 / features.len() as f64;
    let mut mu = vec![0.0; d];
    for f in features {
        mu.iter_mut().zip(f.values()).for_each(|(m, v)| *m += v);
    }
    mu.iter_mut().for_each(|m| *m *= inv_n);
    // Corrective second pass; removes the rounding residue of the first.
    let mut residual = vec![0.0; d];
    for f in features {
        residual
            .iter_mut()
            .zip(f.values().iter().zip(&mu))
            .for_each(|(r, (v, m))| *r += v - m);
    }
    mu.iter_mut().zip(&residual).for_each(|(m, r)| *m += r * inv_n);

    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for f in features {
        centered
            .iter_mut()
            .zip(f.values().iter().zip(&mu))
            .for_each(|(c, (v, m))| *c = v - m);
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] * inv_n;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    Ok((mu, cov))
}

/// Fits mean and ridge-regularized inverse covariance.
///
/// The ridge is `ridge_scale · trace(Σ)/d`; when Σ vanishes entirely it falls
/// back to `ridge_scale` itself so the inverse stays finite.
pub fn fit_gaussian(features: &[FeatureVector], ridge_scale: f64) -> Result<GaussianStats> {
    if features.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 feature vectors, got {}",
            features.len()
        )));
    }
    if !(ridge_scale > 0.0 && ridge_scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge scale {ridge_scale} must be positive"
        )));
    }
    let (mu, mut cov) = covariance(features)?;
    let d = mu.len();
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let mut ridge = ridge_scale * trace / d as f64;
    if ridge.is_nan() || ridge <= 0.0 {
        ridge = ridge_scale;
    }
    for i in 0..d {
        cov[i * d + i] += ridge;
    }
    let sigma_inv = invert_spd(&cov, d)?;
    Ok(GaussianStats {
        mu,
        sigma_inv,
        ridge,
        n: features.len(),
    })
}

fn invert_spd(matrix: &[f64], d: usize) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(d, d, matrix);
    let inv = m
        .cholesky()
        .ok_or_else(|| Error::Numerical("regularized covariance is not positive definite".into()))?
        .inverse();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("covariance inverse is not finite".into()));
    }
    Ok(out)
}

/// Squared Mahalanobis distance `(f - μ)ᵀ Σ⁻¹ (f - μ)`.
pub fn mahalanobis(stats: &GaussianStats, feature: &[f64]) -> Result<f64> {
    let d = stats.dim();
    if feature.len() != d {
        return Err(Error::InvalidArgument(format!(
            "feature has {} entries, gaussian has {d}",
            feature.len()
        )));
    }
    Ok(mahalanobis_unchecked(stats, feature))
}

pub(crate) fn mahalanobis_unchecked(stats: &GaussianStats, feature: &[f64]) -> f64 {
    let d = stats.dim();
    let mut total = 0.0;
    for i in 0..d {
        let di = feature[i] - stats.mu[i];
        let row = &stats.sigma_inv[i * d..(i + 1) * d];
        let inner: f64 = row
            .iter()
            .zip(feature.iter().zip(&stats.mu))
            .map(|(s, (f, m))| s * (f - m))
            .sum();
        total += di * inner;
    }
    total.max(0.0)
}

/// Nearest-rank quantile (ceiling convention) of the training distances.
pub fn calibrate_alpha(stats: &GaussianStats, features: &[FeatureVector], quantile: f64) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("no training features to calibrate on".into()));
    }
    let distances = features
        .iter()
        .map(|f| mahalanobis(stats, f.values()))
        .collect::<Result<Vec<_>>>()?;
    nearest_rank(distances, quantile)
}

pub(crate) fn nearest_rank(mut values: Vec<f64>, quantile: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::InvalidArgument(format!("quantile {quantile} outside [0, 1]")));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    values.sort_by(f64::total_cmp);
    let rank = (quantile * values.len() as f64).ceil() as usize;
    Ok(values[rank.clamp(1, values.len()) - 1])
}

/// `-score + λ · max(0, md - α)`.
pub fn regularized_cost(score: f64, md: f64, params: &CostParams) -> f64 {
    -score + params.lambda * (md - params.alpha).max(0.0)
}

/// Fits the Gaussian over the features of every training record, calibrates
/// α at `alpha_quantile` and stores both in the model.
pub fn calibrate_model(
    model: &mut RankingModel,
    records: &[TrainingRecord],
    ridge_scale: f64,
    alpha_quantile: f64,
    lambda: f64,
) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} must be non-negative")));
    }
    let features = records
        .iter()
        .map(|r| model.forward(&r.instance, &r.route).map(|(_, f)| f))
        .collect::<Result<Vec<_>>>()?;
    let stats = fit_gaussian(&features, ridge_scale)?;
    let alpha = calibrate_alpha(&stats, &features, alpha_quantile)?;
    model.gaussian = Some(stats);
    model.cost_params = Some(CostParams {
        alpha,
        lambda,
        alpha_quantile,
    });
    Ok(())
}
