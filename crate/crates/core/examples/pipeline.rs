//! Library walk-through: generate data, train and calibrate a model, then
//! compare both annealing arms on a few test instances.
//!
//! Small sizes keep it quick; the CLI defaults use 1000 training records.

use offline_co::anneal::SaConfig;
use offline_co::dataset::{generate_test_set, generate_training_set};
use offline_co::harness::{evaluate, EvalConfig};
use offline_co::ood::{calibrate_model, DEFAULT_ALPHA_QUANTILE, DEFAULT_LAMBDA, DEFAULT_RIDGE_SCALE};
use offline_co::surrogate::{train, EncoderConfig, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> offline_co::Result<()> {
    let train_set = generate_training_set(200, 50, &mut ChaCha8Rng::seed_from_u64(1))?;
    let records = train_set.as_train().expect("training set");
    let config = TrainConfig {
        epochs: 10,
        pairs_per_epoch: 500,
        ..TrainConfig::default()
    };
    let (mut model, report) = train(records, EncoderConfig::default(), config)?;
    calibrate_model(
        &mut model,
        records,
        DEFAULT_RIDGE_SCALE,
        DEFAULT_ALPHA_QUANTILE,
        DEFAULT_LAMBDA,
    )?;
    println!("held-out pairwise accuracy: {:?}", report.final_accuracy());

    let test_set = generate_test_set(5, 40, 120, &mut ChaCha8Rng::seed_from_u64(2))?;
    let eval = EvalConfig {
        sa: SaConfig {
            iterations: 5_000,
            ..SaConfig::default()
        },
        ..EvalConfig::default()
    };
    let run = evaluate(&model, &test_set.instances(), &eval)?;
    print!("{}", run.report.report_csv());
    print!("{}", run.report.summary_csv());
    Ok(())
}
