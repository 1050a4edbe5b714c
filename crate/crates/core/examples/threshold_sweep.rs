//! Sweeps the routing threshold over a synthetic suite and prints the
//! quality/latency trade-off next to the all-fast and all-accurate anchors.
//!
//! ```text
//! cargo run --release --example threshold_sweep -- [checkpoint]
//! ```

use vfi_dpa::dataset::{annotate_all, generate_synthetic_with, SyntheticOptions, Thresholds};
use vfi_dpa::metrics::format_cell;
use vfi_dpa::model::{DpaConfig, DpaModel};
use vfi_dpa::router::{evaluate_pairs, parse_thresholds, sweep_evaluations, Router};
use vfi_dpa::training::load_checkpoint;

fn main() -> vfi_dpa::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => load_checkpoint(path)?.model,
        None => DpaModel::init(DpaConfig::default(), 0)?,
    };
    let opts = SyntheticOptions {
        size: 256,
        ..Default::default()
    };
    let triplets = generate_synthetic_with(24, &[0.0, 2.0, 8.0, 16.0], 7, &opts)?;
    let records = annotate_all(&triplets, &Thresholds::default())?;

    // Both backends run once per pair; each threshold only re-selects.
    let evals = evaluate_pairs(&Router::new(&model), &records)?;
    let report = sweep_evaluations(&evals, &parse_thresholds("0:1:0.1")?)?;
    for row in &report.rows {
        let name = row
            .threshold
            .map_or(row.name.clone(), |t| format!("t = {t:.1}"));
        println!(
            "{name:>13}  accurate {:>5.1}%  {}  {:.2} ms",
            100.0 * row.accurate_fraction,
            format_cell(row.overall.psnr_mean, row.overall.ssim_mean),
            row.overall.latency_mean * 1e3
        );
    }
    Ok(())
}
