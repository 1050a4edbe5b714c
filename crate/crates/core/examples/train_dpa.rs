//! Trains the difficulty model on a synthetic suite and reports held-out
//! tolerance accuracy against a constant predictor.
//!
//! ```text
//! cargo run --release --example train_dpa -- [steps] [checkpoint]
//! ```

use vfi_dpa::dataset::{annotate_all, generate_synthetic_with, SyntheticOptions, Thresholds};
use vfi_dpa::metrics::tolerance_accuracy;
use vfi_dpa::model::{DpaConfig, DpaModel};
use vfi_dpa::training::{
    predict_samples, prepare_samples, save_checkpoint, train_samples, TrainHyper, TrainingMeta,
};

fn main() -> vfi_dpa::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(300, |s| s.parse().expect("steps"));
    let out = args
        .next()
        .unwrap_or_else(|| std::env::temp_dir().join("dpa.ckpt").display().to_string());

    let opts = SyntheticOptions {
        size: 128,
        ..Default::default()
    };
    let triplets = generate_synthetic_with(100, &[0.0, 2.0, 8.0, 16.0], 2024, &opts)?;
    let records = annotate_all(&triplets, &Thresholds::default())?;
    let (train_set, held_out) = records.split_at(80);

    let cfg = DpaConfig::default();
    let samples = prepare_samples(train_set, cfg.input_size)?;
    let hyper = TrainHyper {
        lr: 3e-4,
        steps,
        batch: 8,
        seed: 1,
        log_every: 50,
        ..Default::default()
    };
    let ckpt = train_samples(
        DpaModel::init(cfg.clone(), 1)?,
        TrainingMeta::default(),
        &samples,
        &hyper,
    )?;
    save_checkpoint(&ckpt, &out)?;

    let preds = predict_samples(&ckpt.model, &prepare_samples(held_out, cfg.input_size)?, 8)?;
    let targets: Vec<f64> = held_out.iter().map(|r| r.score).collect();
    let mean = train_set.iter().map(|r| r.score).sum::<f64>() / train_set.len() as f64;
    for tol in [0.125, 0.25] {
        println!(
            "tolerance {tol}: model {:.3}, constant {:.3}",
            tolerance_accuracy(&preds, &targets, tol)?,
            tolerance_accuracy(&vec![mean; targets.len()], &targets, tol)?
        );
    }
    println!("checkpoint written to {out}");
    Ok(())
}
