//! Finite-difference check of a small conv → channel layer norm → softmax
//! chain.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use vfi_dpa::numerics::{check_gradients, Tensor, LAYER_NORM_EPS};
use vfi_dpa::seed;

fn main() -> vfi_dpa::Result<()> {
    let mut rng = seed::rng(7, "example");
    let inputs = [
        Tensor::randn(&[2, 3, 6, 6], 1.0, &mut rng),
        Tensor::randn(&[4, 3, 3, 3], 0.5, &mut rng),
        Tensor::randn(&[4], 0.1, &mut rng),
        Tensor::randn(&[4], 1.0, &mut rng),
        Tensor::randn(&[4], 0.1, &mut rng),
    ];
    let report = check_gradients(
        |g, v| {
            let y = g.conv2d(v[0], v[1], Some(v[2]), 1, 1)?;
            // Normalize over channels; over pixels the bias would cancel out.
            let y = g.reshape(y, &[2, 4, 36])?;
            let y = g.permute(y, &[0, 2, 1])?;
            let y = g.layer_norm(y, v[3], v[4], LAYER_NORM_EPS)?;
            g.softmax(y)
        },
        &inputs,
        &[0, 1, 2, 3, 4],
        1e-6,
    )?;
    for (label, err) in report.labels.iter().zip(&report.relative_errors) {
        println!("{label:>8}: relative error {err:.2e}");
    }
    println!("worst {:.2e}", report.max_relative_error());
    Ok(())
}
