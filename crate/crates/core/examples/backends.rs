//! Fast blending against block-matched interpolation across motion sizes.
//!
//! ```text
//! cargo run --example backends
//! ```

use vfi_dpa::backends::{measure_latency, BackendRegistry};
use vfi_dpa::dataset::{generate_synthetic_with, SyntheticOptions};
use vfi_dpa::metrics::psnr;

fn main() -> vfi_dpa::Result<()> {
    let registry = BackendRegistry::default();
    let opts = SyntheticOptions {
        size: 256,
        ..Default::default()
    };
    let triplets = generate_synthetic_with(4, &[0.0, 2.0, 8.0, 16.0], 9, &opts)?;
    println!("{:>8} {:>22} {:>22}", "motion", "fast", "accurate");
    for t in &triplets {
        let f = t.load()?;
        let mut cells = Vec::new();
        for name in ["fast", "accurate"] {
            let backend = registry.get(name)?;
            let (out, secs) = measure_latency(backend.as_ref(), &f[0], &f[2])?;
            cells.push(format!(
                "{:6.2} dB {:8.2} ms",
                psnr(&out, &f[1])?,
                secs * 1e3
            ));
        }
        println!(
            "{:>8} {:>22} {:>22}",
            t.source.trim_start_matches("synthetic:"),
            cells[0],
            cells[1]
        );
    }
    Ok(())
}
