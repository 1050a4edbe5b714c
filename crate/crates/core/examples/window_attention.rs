//! Plain and shifted window attention on an 8×8 token grid, showing which
//! tokens each query can see.
//!
//! ```text
//! cargo run --example window_attention
//! ```

use vfi_dpa::numerics::{
    window_attention, window_attention_param_shapes, Graph, ParamStore, Tensor, WindowSpec,
};
use vfi_dpa::seed;

fn main() -> vfi_dpa::Result<()> {
    let (side, dim, window) = (8, 8, 4);
    let mut rng = seed::rng(3, "example");
    let mut params = ParamStore::new();
    for (name, shape) in window_attention_param_shapes("attn", dim) {
        params.insert(name, Tensor::randn(&shape, 0.3, &mut rng))?;
    }
    let x = Tensor::randn(&[1, side * side, dim], 1.0, &mut rng);

    for shift in [0, window / 2] {
        let spec = WindowSpec {
            height: side,
            width: side,
            window,
            shift,
            heads: 2,
        };
        let mut g = Graph::new();
        let xv = g.constant(x.clone())?;
        let out = window_attention(&mut g, xv, spec, &params, "attn")?;
        // probs: [windows · heads, tokens, tokens]
        let probs = g.value(out.probs);
        let t = window * window;
        let last = probs.shape()[0] - 1;
        let row = &probs.data()[last * t * t..last * t * t + t];
        let visible = row.iter().filter(|&&p| p > 1e-12).count();
        println!(
            "shift {shift}: output {:?}, first query of the last window sees {visible}/{t} tokens",
            g.shape(out.out)
        );
    }
    Ok(())
}
