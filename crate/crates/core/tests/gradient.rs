use offline_co::dataset::TrainingRecord;
use offline_co::surrogate::{EncoderConfig, Network, RankingModel, TrainingMeta};
use offline_co::tsp::{sample_instance, tour_length, Route};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn small_config() -> EncoderConfig {
    EncoderConfig {
        hidden_dim: 8,
        feature_dim: 4,
        ..EncoderConfig::default()
    }
}

fn meta() -> TrainingMeta {
    TrainingMeta {
        seed: 0,
        epochs: 0,
        learning_rate: 0.01,
        pairs_per_epoch: 0,
    }
}

fn record<R: Rng>(id: u64, n: usize, rng: &mut R) -> TrainingRecord {
    let instance = sample_instance(id, n, rng).unwrap();
    let route = Route::random(n, rng);
    let length = tour_length(&instance, &route).unwrap();
    TrainingRecord {
        id,
        instance,
        route,
        length,
    }
}

/// Returns a copy of `model` with parameter `(layer, index)` shifted by `delta`;
/// indices past the weights address the bias.
fn perturbed(model: &RankingModel, layer: usize, index: usize, delta: f64) -> RankingModel {
    let mut m = model.clone();
    let dense = &mut m.network_mut().layers_mut()[layer];
    let nw = dense.weights().len();
    if index < nw {
        dense.weights_mut()[index] += delta;
    } else {
        dense.bias_mut()[index - nw] += delta;
    }
    m
}

#[test]
fn backprop_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        let config = small_config();
        let model = RankingModel::new(config, Network::init(&config, &mut rng), meta()).unwrap();
        let n = rng.gen_range(5..=12);
        let a = record(2 * trial, n, &mut rng);
        let b = record(2 * trial + 1, rng.gen_range(5..=12), &mut rng);
        let (_, grad) = model.pair_loss_and_gradient(&a, &b).unwrap();
        for (layer, g) in grad.layers().iter().enumerate() {
            let analytic: Vec<f64> = g.weights().iter().chain(g.bias()).copied().collect();
            for (index, &ga) in analytic.iter().enumerate() {
                let up = perturbed(&model, layer, index, STEP).pair_loss(&a, &b).unwrap();
                let down = perturbed(&model, layer, index, -STEP).pair_loss(&a, &b).unwrap();
                let numeric = (up - down) / (2.0 * STEP);
                let rel = (ga - numeric).abs() / ga.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    assert!(worst <= 1e-4, "max relative error {worst:e}");
}

#[test]
fn two_record_overfit_decreases_loss_monotonically() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = small_config();
    let mut model = RankingModel::new(config, Network::init(&config, &mut rng), meta()).unwrap();
    let a = record(0, 10, &mut rng);
    let mut b = record(1, 10, &mut rng);
    while (a.length - b.length).abs() < 0.1 * a.length {
        b = record(1, 10, &mut rng);
    }
    let lr = 0.01;
    let first = model.pair_loss(&a, &b).unwrap();
    let mut previous = f64::INFINITY;
    for step in 0..30_000 {
        let (loss, grad) = model.pair_loss_and_gradient(&a, &b).unwrap();
        assert!(loss < previous, "loss rose at step {step}: {previous} -> {loss}");
        previous = loss;
        for (p, g) in model.network_mut().layers_mut().into_iter().zip(grad.layers()) {
            p.weights_mut()
                .iter_mut()
                .zip(g.weights())
                .for_each(|(w, d)| *w -= lr * d);
            p.bias_mut().iter_mut().zip(g.bias()).for_each(|(w, d)| *w -= lr * d);
        }
    }
    assert!(previous < 0.5 * first, "loss {first} -> {previous}");
}
