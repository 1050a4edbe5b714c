//! Shifted-window multi-head self-attention and patch merging.
//!
//! Both are composed from primitive graph ops, so their gradients come from
//! the primitives' backward rules.

use super::graph::{Graph, Var};
use super::tensor::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// Additive logit for positions a query must not attend to.
pub const MASKED_LOGIT: f64 = -1e9;

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    pub height: usize,
    pub width: usize,
    pub window: usize,
    pub shift: usize,
    pub heads: usize,
}

impl WindowSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let WindowSpec {
            height,
            width,
            window,
            shift,
            heads,
        } = *self;
        if window == 0 || height % window != 0 || width % window != 0 {
            return Err(Error::shape(
                "window_attention",
                "spatial",
                format!("{height}x{width} grid is not divisible by window {window}"),
            ));
        }
        if shift != 0 && (window < 2 || shift != window / 2) {
            return Err(Error::InvalidArgument(format!(
                "window_attention: shift must be 0 or window/2 ({}), got {shift}",
                window / 2
            )));
        }
        if heads == 0 || dim % heads != 0 {
            return Err(Error::shape(
                "window_attention",
                "heads",
                format!("dim {dim} not divisible by {heads} heads"),
            ));
        }
        Ok(())
    }

    pub fn num_windows(&self) -> usize {
        (self.height / self.window) * (self.width / self.window)
    }

    pub fn tokens_per_window(&self) -> usize {
        self.window * self.window
    }
}

/// Output of [`window_attention`]; `probs` is `[N*windows*heads, T, T]`.
#[derive(Clone, Copy, Debug)]
pub struct AttentionOutput {
    pub out: Var,
    pub probs: Var,
}

/// Region label of each position of the (already shifted) grid. Positions in
/// one window attend to each other only when their labels agree.
pub fn shifted_region_labels(spec: &WindowSpec) -> Vec<usize> {
    let bands = |len: usize| {
        move |i: usize| {
            if i < len - spec.window {
                0
            } else if i < len - spec.shift {
                1
            } else {
                2
            }
        }
    };
    let (hb, wb) = (bands(spec.height), bands(spec.width));
    let mut labels = vec![0; spec.height * spec.width];
    for y in 0..spec.height {
        for x in 0..spec.width {
            labels[y * spec.width + x] = hb(y) * 3 + wb(x);
        }
    }
    labels
}

/// Additive mask `[windows, T, T]` for the shifted configuration (all zeros
/// when `shift == 0`).
pub fn window_mask(spec: &WindowSpec) -> Vec<f64> {
    let t = spec.tokens_per_window();
    let nw = spec.num_windows();
    let mut mask = vec![0.0; nw * t * t];
    if spec.shift == 0 {
        return mask;
    }
    let labels = shifted_region_labels(spec);
    let wx = spec.width / spec.window;
    for win in 0..nw {
        let (wy0, wx0) = ((win / wx) * spec.window, (win % wx) * spec.window);
        let label = |i: usize| labels[(wy0 + i / spec.window) * spec.width + wx0 + i % spec.window];
        for i in 0..t {
            for j in 0..t {
                if label(i) != label(j) {
                    mask[(win * t + i) * t + j] = MASKED_LOGIT;
                }
            }
        }
    }
    mask
}

fn partition(g: &mut Graph, x: Var, n: usize, spec: &WindowSpec, d: usize) -> Result<Var> {
    let ws = spec.window;
    let x = g.reshape(x, &[n, spec.height / ws, ws, spec.width / ws, ws, d])?;
    let x = g.permute(x, &[0, 1, 3, 2, 4, 5])?;
    g.reshape(x, &[n * spec.num_windows(), ws * ws, d])
}

fn unpartition(g: &mut Graph, x: Var, n: usize, spec: &WindowSpec, d: usize) -> Result<Var> {
    let ws = spec.window;
    let x = g.reshape(x, &[n, spec.height / ws, spec.width / ws, ws, ws, d])?;
    let x = g.permute(x, &[0, 1, 3, 2, 4, 5])?;
    g.reshape(x, &[n, spec.height, spec.width, d])
}

/// Multi-head self-attention computed inside each window of a `height×width`
/// token grid, with an optional cyclic shift of `window/2`.
///
/// `x: [N, L, D]` with `L = height·width`. Parameters are read from
/// `{prefix}.qkv.{weight,bias}` (`[D, 3D]`, `[3D]`) and
/// `{prefix}.proj.{weight,bias}` (`[D, D]`, `[D]`).
pub fn window_attention(
    g: &mut Graph,
    x: Var,
    spec: WindowSpec,
    params: &ParamStore,
    prefix: &str,
) -> Result<AttentionOutput> {
    let shape = g.shape(x).to_vec();
    if shape.len() != 3 {
        return Err(Error::shape(
            "window_attention",
            "rank",
            format!("expected [N,L,D], got {shape:?}"),
        ));
    }
    let (n, l, d) = (shape[0], shape[1], shape[2]);
    if l != spec.height * spec.width {
        return Err(Error::shape(
            "window_attention",
            "tokens (L)",
            format!("{l} tokens for a {}x{} grid", spec.height, spec.width),
        ));
    }
    spec.validate(d)?;
    let (heads, hd) = (spec.heads, d / spec.heads);
    let t = spec.tokens_per_window();
    let bw = n * spec.num_windows();
    let shift = spec.shift as isize;

    let mut h = g.reshape(x, &[n, spec.height, spec.width, d])?;
    if shift > 0 {
        h = g.roll(h, 1, -shift)?;
        h = g.roll(h, 2, -shift)?;
    }
    let xw = partition(g, h, n, &spec, d)?;

    let w_qkv = g.param(params, &format!("{prefix}.qkv.weight"))?;
    let b_qkv = g.param(params, &format!("{prefix}.qkv.bias"))?;
    let qkv = g.linear(xw, w_qkv, Some(b_qkv))?;
    let qkv = g.reshape(qkv, &[bw, t, 3, heads, hd])?;
    let qkv = g.permute(qkv, &[2, 0, 3, 1, 4])?;
    let mut parts = [qkv; 3];
    for (i, p) in parts.iter_mut().enumerate() {
        let s = g.slice(qkv, 0, i, 1)?;
        *p = g.reshape(s, &[bw * heads, t, hd])?;
    }
    let [q, k, v] = parts;

    let kt = g.permute(k, &[0, 2, 1])?;
    let logits = g.matmul(q, kt)?;
    let mut logits = g.scale(logits, 1.0 / (hd as f64).sqrt())?;
    if shift > 0 {
        let mask = window_mask(&spec);
        let nw = spec.num_windows();
        let mut full = Vec::with_capacity(bw * heads * t * t);
        for b in 0..bw {
            let win = b % nw;
            for _ in 0..heads {
                full.extend_from_slice(&mask[win * t * t..(win + 1) * t * t]);
            }
        }
        logits = g.add_const(logits, &Tensor::from_parts(vec![bw * heads, t, t], full))?;
    }
    let probs = g.softmax(logits)?;
    let ctx = g.matmul(probs, v)?;
    let ctx = g.reshape(ctx, &[bw, heads, t, hd])?;
    let ctx = g.permute(ctx, &[0, 2, 1, 3])?;
    let ctx = g.reshape(ctx, &[bw, t, d])?;

    let w_proj = g.param(params, &format!("{prefix}.proj.weight"))?;
    let b_proj = g.param(params, &format!("{prefix}.proj.bias"))?;
    let y = g.linear(ctx, w_proj, Some(b_proj))?;

    let mut y = unpartition(g, y, n, &spec, d)?;
    if shift > 0 {
        y = g.roll(y, 1, shift)?;
        y = g.roll(y, 2, shift)?;
    }
    let out = g.reshape(y, &[n, l, d])?;
    Ok(AttentionOutput { out, probs })
}

/// Parameter shapes used by [`window_attention`] for a `dim`-wide input.
pub fn window_attention_param_shapes(prefix: &str, dim: usize) -> Vec<(String, Vec<usize>)> {
    vec![
        (format!("{prefix}.qkv.weight"), vec![dim, 3 * dim]),
        (format!("{prefix}.qkv.bias"), vec![3 * dim]),
        (format!("{prefix}.proj.weight"), vec![dim, dim]),
        (format!("{prefix}.proj.bias"), vec![dim]),
    ]
}

/// 2×2 spatial-to-channel downsample followed by layer norm and a linear
/// projection `4C -> 2C`. `x: [N, H*W, C]` becomes `[N, H*W/4, 2C]`.
pub fn patch_merging(
    g: &mut Graph,
    x: Var,
    height: usize,
    width: usize,
    params: &ParamStore,
    prefix: &str,
) -> Result<Var> {
    let shape = g.shape(x).to_vec();
    if shape.len() != 3 || shape[1] != height * width {
        return Err(Error::shape(
            "patch_merging",
            "tokens (L)",
            format!("{shape:?} for a {height}x{width} grid"),
        ));
    }
    if height % 2 != 0 || width % 2 != 0 {
        return Err(Error::shape(
            "patch_merging",
            "spatial",
            format!("{height}x{width} is not even"),
        ));
    }
    let (n, c) = (shape[0], shape[2]);
    let h = g.reshape(x, &[n, height / 2, 2, width / 2, 2, c])?;
    let h = g.permute(h, &[0, 1, 3, 4, 2, 5])?;
    let h = g.reshape(h, &[n, height * width / 4, 4 * c])?;
    let gamma = g.param(params, &format!("{prefix}.norm.weight"))?;
    let beta = g.param(params, &format!("{prefix}.norm.bias"))?;
    let h = g.layer_norm(h, gamma, beta, LAYER_NORM_EPS)?;
    let w = g.param(params, &format!("{prefix}.reduction.weight"))?;
    g.linear(h, w, None)
}

pub fn patch_merging_param_shapes(prefix: &str, dim: usize) -> Vec<(String, Vec<usize>)> {
    vec![
        (format!("{prefix}.norm.weight"), vec![4 * dim]),
        (format!("{prefix}.norm.bias"), vec![4 * dim]),
        (format!("{prefix}.reduction.weight"), vec![4 * dim, 2 * dim]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_labels_match_reference_layout() {
        // 4x4 grid, window 2, shift 1: bands are [0..2), [2..3), [3..4)
        let spec = WindowSpec {
            height: 4,
            width: 4,
            window: 2,
            shift: 1,
            heads: 1,
        };
        let labels = shifted_region_labels(&spec);
        assert_eq!(&labels[0..4], &[0, 0, 1, 2]);
        assert_eq!(&labels[12..16], &[6, 6, 7, 8]);
    }

    #[test]
    fn unshifted_mask_is_empty() {
        let spec = WindowSpec {
            height: 4,
            width: 4,
            window: 2,
            shift: 0,
            heads: 1,
        };
        assert!(window_mask(&spec).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn indivisible_grid_is_rejected() {
        let spec = WindowSpec {
            height: 6,
            width: 4,
            window: 4,
            shift: 0,
            heads: 1,
        };
        assert!(spec.validate(8).is_err());
    }
}
