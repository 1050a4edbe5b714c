//! Deformable convolution: zero offsets reproduce a plain convolution, and a
//! constant offset of one row samples the row below.
//!
//! ```text
//! cargo run --example deformable_conv
//! ```

use vfi_dpa::numerics::{Graph, Tensor};
use vfi_dpa::seed;

fn main() -> vfi_dpa::Result<()> {
    let (n, c, h, w, out) = (1, 2, 6, 6, 3);
    let mut rng = seed::rng(5, "example");
    let mut g = Graph::new();
    let x = g.constant(Tensor::randn(&[n, c, h, w], 1.0, &mut rng))?;
    let weight = g.constant(Tensor::randn(&[out, c, 3, 3], 0.5, &mut rng))?;
    let bias = g.constant(Tensor::zeros(&[out]))?;

    let zero = g.constant(Tensor::zeros(&[n, 18, h, w]))?;
    let deformed = g.deformable_conv2d(x, zero, weight, bias)?;
    let plain = g.conv2d(x, weight, Some(bias), 1, 1)?;
    println!(
        "zero offsets: max |deform - conv| = {:.2e}",
        g.value(deformed).max_abs_diff(g.value(plain))
    );

    // Offsets are (dy, dx) pairs per tap; set every dy to 1.
    let mut down = Tensor::zeros(&[n, 18, h, w]);
    for tap in 0..9 {
        let plane = 2 * tap * h * w;
        down.data_mut()[plane..plane + h * w].fill(1.0);
    }
    let down = g.constant(down)?;
    let moved = g.deformable_conv2d(x, down, weight, bias)?;
    let row0 = &g.value(moved).data()[..w];
    let plain_row1 = &g.value(plain).data()[w..2 * w];
    let diff = row0
        .iter()
        .zip(plain_row1)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("dy = 1: row 0 matches conv row 1 up to {diff:.2e}");
    Ok(())
}
