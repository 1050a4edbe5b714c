//! Routes one frame pair: the model scores it, and the score picks the
//! backend.
//!
//! ```text
//! cargo run --example route_pair -- [checkpoint] [threshold]
//! ```
//!
//! Without a checkpoint an untrained model is used, which still shows the
//! mechanics but not useful scores.

use vfi_dpa::dataset::{generate_synthetic_with, SyntheticOptions};
use vfi_dpa::model::{DpaConfig, DpaModel};
use vfi_dpa::router::Router;
use vfi_dpa::training::load_checkpoint;

fn main() -> vfi_dpa::Result<()> {
    let mut args = std::env::args().skip(1);
    let model = match args.next() {
        Some(path) => load_checkpoint(path)?.model,
        None => DpaModel::init(DpaConfig::default(), 0)?,
    };
    let threshold: f64 = args.next().map_or(0.5, |s| s.parse().expect("threshold"));
    let router = Router::new(&model);

    let opts = SyntheticOptions {
        size: 256,
        ..Default::default()
    };
    for t in generate_synthetic_with(4, &[0.0, 2.0, 8.0, 16.0], 42, &opts)? {
        let f = t.load()?;
        let routed = router.route(&t.id, &f[0], &f[2], threshold, None, Some(&f[1]))?;
        let d = &routed.decision;
        println!(
            "{:>14}  score {:.3} -> {:<8}  {:.2} dB  {:.1} ms",
            t.source,
            d.predicted_score,
            d.chosen.to_string(),
            d.psnr.unwrap_or(f64::NAN),
            d.latency * 1e3
        );
    }
    Ok(())
}
