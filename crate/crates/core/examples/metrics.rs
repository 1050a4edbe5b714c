//! Frame quality metrics and the difficulty tolerance score.
//!
//! ```text
//! cargo run --example metrics
//! ```

use vfi_dpa::dataset::{generate_synthetic_with, SyntheticOptions};
use vfi_dpa::frame::Frame;
use vfi_dpa::metrics::{format_cell, psnr, ssim, tolerance_accuracy};

fn main() -> vfi_dpa::Result<()> {
    let a = Frame::filled(64, 64, 3, 120);
    let b = Frame::filled(64, 64, 3, 121);
    println!("off by one everywhere: {:.4} dB", psnr(&a, &b)?);

    let opts = SyntheticOptions {
        size: 96,
        ..Default::default()
    };
    for t in generate_synthetic_with(4, &[0.0, 2.0, 8.0, 16.0], 1, &opts)? {
        let f = t.load()?;
        // How far is the first frame from the true middle frame?
        println!(
            "{:>14}: {}",
            t.source,
            format_cell(psnr(&f[0], &f[1])?, ssim(&f[0], &f[1])?)
        );
    }

    let preds = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    for tol in [0.1, 0.25, 0.5, 1.0] {
        let acc = tolerance_accuracy(&preds, &[1.0 / 3.0; 4], tol)?;
        println!("tolerance {tol}: {acc}");
    }
    Ok(())
}
