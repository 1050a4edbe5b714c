//! Helpers shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vfi_dpa::dataset::{
    annotate_all, generate_synthetic_with, DifficultyRecord, SyntheticOptions, Thresholds,
};
use vfi_dpa::model::{predict_score, DpaConfig, DpaModel};
use vfi_dpa::numerics::{
    check_gradients, check_param_gradients, window_attention, window_attention_param_shapes,
    GradCheckReport, ParamStore, Tensor, WindowSpec, LAYER_NORM_EPS,
};
use vfi_dpa::Result;

pub const FD_EPS: f64 = 1e-6;
pub const GRAD_TOLERANCE: f64 = 1e-4;

/// Motion magnitudes of the synthetic suite, one per subset.
pub const MAGNITUDES: [f64; 4] = [0.0, 2.0, 8.0, 16.0];
pub const SUITE_SIZE: usize = 256;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(shape: &[usize], seed: u64) -> Tensor {
    Tensor::randn(shape, 1.0, &mut rng(seed))
}

/// One finite-difference check: which op, at which shape, and the worst
/// relative error over everything differentiated.
#[derive(Clone, Debug)]
pub struct GradCase {
    pub op: &'static str,
    pub shape: String,
    pub error: f64,
}

fn case(op: &'static str, shape: String, reports: &[GradCheckReport]) -> GradCase {
    let error = reports
        .iter()
        .map(GradCheckReport::max_relative_error)
        .fold(0.0, f64::max);
    GradCase { op, shape, error }
}

fn conv_cases(out: &mut Vec<GradCase>) -> Result<()> {
    // (n, c, h, w, o, k, stride, padding)
    let shapes = [
        (1, 2, 5, 5, 3, 3, 1, 1),
        (2, 3, 6, 4, 2, 3, 2, 0),
        (1, 1, 7, 6, 2, 2, 1, 1),
    ];
    for (i, &(n, c, h, w, o, k, stride, pad)) in shapes.iter().enumerate() {
        let s = 100 + 10 * i as u64;
        let inputs = [
            randn(&[n, c, h, w], s),
            randn(&[o, c, k, k], s + 1),
            randn(&[o], s + 2),
        ];
        let r = check_gradients(
            |g, v| g.conv2d(v[0], v[1], Some(v[2]), stride, pad),
            &inputs,
            &[0, 1, 2],
            FD_EPS,
        )?;
        out.push(case(
            "conv2d",
            format!("x{:?} k{k} s{stride} p{pad}", [n, c, h, w]),
            &[r],
        ));
    }
    Ok(())
}

fn conv1x1_cases(out: &mut Vec<GradCase>) -> Result<()> {
    let shapes = [(1, 4, 3, 3, 2), (2, 2, 4, 5, 3), (1, 6, 2, 2, 6)];
    for (i, &(n, c, h, w, o)) in shapes.iter().enumerate() {
        let s = 200 + 10 * i as u64;
        let inputs = [
            randn(&[n, c, h, w], s),
            randn(&[o, c, 1, 1], s + 1),
            randn(&[o], s + 2),
        ];
        let r = check_gradients(
            |g, v| g.conv2d(v[0], v[1], Some(v[2]), 1, 0),
            &inputs,
            &[0, 1, 2],
            FD_EPS,
        )?;
        out.push(case("conv1x1", format!("x{:?} o{o}", [n, c, h, w]), &[r]));
    }
    Ok(())
}

fn deform_cases(out: &mut Vec<GradCase>) -> Result<()> {
    let shapes = [(1, 2, 4, 4, 2), (1, 1, 5, 3, 3), (2, 3, 3, 4, 2)];
    for (i, &(n, c, h, w, o)) in shapes.iter().enumerate() {
        let s = 300 + 10 * i as u64;
        // Offsets well inside (-2, 2) and away from the integer lattice where
        // bilinear sampling has kinks.
        let mut offsets = Tensor::rand_uniform(&[n, 18, h, w], 0.15, 0.85, &mut rng(s + 1));
        for (j, v) in offsets.data_mut().iter_mut().enumerate() {
            *v += [-2.0, -1.0, 0.0, 1.0][j % 4];
        }
        let inputs = [
            randn(&[n, c, h, w], s),
            offsets,
            randn(&[o, c, 3, 3], s + 2),
            randn(&[o], s + 3),
        ];
        let r = check_gradients(
            |g, v| g.deformable_conv2d(v[0], v[1], v[2], v[3]),
            &inputs,
            &[0, 1, 2, 3],
            FD_EPS,
        )?;
        out.push(case(
            "deformable_conv2d",
            format!("x{:?} o{o}", [n, c, h, w]),
            &[r],
        ));
    }
    Ok(())
}

/// Deep map -> pixel shuffle -> 1×1 alignment conv, as in feature fusion.
fn pixel_shuffle_cases(out: &mut Vec<GradCase>) -> Result<()> {
    let shapes = [(1, 16, 1, 1, 4, 2), (2, 8, 2, 3, 2, 3), (1, 32, 2, 2, 4, 4)];
    for (i, &(n, c, h, w, r, o)) in shapes.iter().enumerate() {
        let s = 400 + 10 * i as u64;
        let inputs = [
            randn(&[n, c, h, w], s),
            randn(&[o, c / (r * r), 1, 1], s + 1),
        ];
        let rep = check_gradients(
            |g, v| {
                let up = g.pixel_shuffle(v[0], r)?;
                g.conv2d(up, v[1], None, 1, 0)
            },
            &inputs,
            &[0, 1],
            FD_EPS,
        )?;
        out.push(case(
            "pixel_shuffle",
            format!("x{:?} r{r}", [n, c, h, w]),
            &[rep],
        ));
    }
    Ok(())
}

pub fn attention_params(dim: usize, seed: u64) -> ParamStore {
    let mut p = ParamStore::new();
    for (k, (name, shape)) in window_attention_param_shapes("attn", dim)
        .into_iter()
        .enumerate()
    {
        let t = Tensor::randn(&shape, 0.5, &mut rng(seed + k as u64));
        p.insert(name, t).expect("unique names");
    }
    p
}

fn attention_cases(out: &mut Vec<GradCase>, shifted: bool) -> Result<()> {
    // (n, height, width, dim, window, heads)
    let shapes = [(1, 4, 4, 4, 2, 1), (2, 4, 4, 4, 2, 2), (1, 6, 6, 6, 3, 3)];
    for (i, &(n, height, width, d, window, heads)) in shapes.iter().enumerate() {
        let s = 500 + 10 * i as u64 + u64::from(shifted);
        let spec = WindowSpec {
            height,
            width,
            window,
            shift: if shifted { window / 2 } else { 0 },
            heads,
        };
        let params = attention_params(d, s);
        let x = randn(&[n, height * width, d], s + 7);
        let wrt_input = check_gradients(
            |g, v| Ok(window_attention(g, v[0], spec, &params, "attn")?.out),
            &[x.clone()],
            &[0],
            FD_EPS,
        )?;
        let wrt_params = check_param_gradients(
            |g, p| {
                let xv = g.constant(x.clone())?;
                Ok(window_attention(g, xv, spec, p, "attn")?.out)
            },
            &params,
            None,
            FD_EPS,
        )?;
        let op = if shifted {
            "window_attention_shifted"
        } else {
            "window_attention"
        };
        out.push(case(
            op,
            format!("{height}x{width}x{d} n{n} w{window} h{heads}"),
            &[wrt_input, wrt_params],
        ));
    }
    Ok(())
}

fn layer_norm_cases(out: &mut Vec<GradCase>) -> Result<()> {
    let shapes: [&[usize]; 3] = [&[3, 4], &[2, 3, 5], &[1, 8]];
    for (i, shape) in shapes.iter().enumerate() {
        let s = 600 + 10 * i as u64;
        let d = *shape.last().unwrap();
        let inputs = [randn(shape, s), randn(&[d], s + 1), randn(&[d], s + 2)];
        let r = check_gradients(
            |g, v| g.layer_norm(v[0], v[1], v[2], LAYER_NORM_EPS),
            &inputs,
            &[0, 1, 2],
            FD_EPS,
        )?;
        out.push(case("layer_norm", format!("{shape:?}"), &[r]));
    }
    Ok(())
}

fn softmax_cases(out: &mut Vec<GradCase>) -> Result<()> {
    let shapes: [&[usize]; 3] = [&[5], &[3, 4], &[2, 2, 6]];
    for (i, shape) in shapes.iter().enumerate() {
        let inputs = [Tensor::randn(shape, 2.0, &mut rng(700 + i as u64))];
        let r = check_gradients(|g, v| g.softmax(v[0]), &inputs, &[0], FD_EPS)?;
        out.push(case("softmax", format!("{shape:?}"), &[r]));
    }
    Ok(())
}

fn matmul_cases(out: &mut Vec<GradCase>) -> Result<()> {
    let shapes: [(&[usize], &[usize]); 3] = [
        (&[3, 4], &[4, 2]),
        (&[2, 3, 5], &[2, 5, 4]),
        (&[2, 2, 3], &[3, 3]),
    ];
    for (i, (a, b)) in shapes.iter().enumerate() {
        let s = 800 + 10 * i as u64;
        let inputs = [randn(a, s), randn(b, s + 1)];
        let r = check_gradients(|g, v| g.matmul(v[0], v[1]), &inputs, &[0, 1], FD_EPS)?;
        out.push(case("matmul", format!("{a:?}x{b:?}"), &[r]));
    }
    Ok(())
}

/// The score and attention heads, including the weighted-mean reduction,
/// differentiated with respect to every head parameter of a small model.
fn head_cases(out: &mut Vec<GradCase>) -> Result<()> {
    let variants = [(4, 3, 16), (4, 2, 16), (8, 4, 32)];
    for (i, &(embed_dim, head_channels, input_size)) in variants.iter().enumerate() {
        let s = 900 + 10 * i as u64;
        let cfg = DpaConfig {
            embed_dim,
            head_channels,
            input_size,
            ..DpaConfig::micro()
        };
        let mut model = DpaModel::init(cfg.clone(), s)?;
        // Non-zero offsets so the deformable path is exercised off-lattice.
        for name in ["fusion.offset.weight", "fusion.offset.bias"] {
            let t = model.params.get_mut(name).expect("exists");
            *t = Tensor::randn(t.shape(), 0.05, &mut rng(s + 1));
        }
        let f0 = Tensor::rand_uniform(&[1, 3, input_size, input_size], 0.0, 1.0, &mut rng(s + 2));
        let f1 = Tensor::rand_uniform(&[1, 3, input_size, input_size], 0.0, 1.0, &mut rng(s + 3));
        let names: Vec<String> = model
            .params
            .names()
            .filter(|n| n.starts_with("head."))
            .map(str::to_string)
            .collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let r = check_param_gradients(
            |g, p| {
                let a = g.constant(f0.clone())?;
                let b = g.constant(f1.clone())?;
                let o = predict_score(g, p, &cfg, a, b)?;
                let both = g.concat(&[o.score, o.attention_mean], 0)?;
                Ok(both)
            },
            &model.params,
            Some(&names),
            FD_EPS,
        )?;
        out.push(case(
            "heads",
            format!("embed{embed_dim} head{head_channels} in{input_size}"),
            &[r],
        ));
    }
    Ok(())
}

/// Finite-difference checks for every differentiable building block, three
/// shapes each.
pub fn gradient_suite() -> Result<Vec<GradCase>> {
    let mut out = Vec::new();
    conv_cases(&mut out)?;
    conv1x1_cases(&mut out)?;
    deform_cases(&mut out)?;
    pixel_shuffle_cases(&mut out)?;
    attention_cases(&mut out, false)?;
    attention_cases(&mut out, true)?;
    layer_norm_cases(&mut out)?;
    softmax_cases(&mut out)?;
    matmul_cases(&mut out)?;
    head_cases(&mut out)?;
    Ok(out)
}

/// The annotated synthetic motion suite used for the trend checks:
/// `count` triplets of 256² frames, magnitudes assigned round-robin.
pub fn synthetic_suite(count: usize, seed: u64) -> Result<Vec<DifficultyRecord>> {
    let opts = SyntheticOptions {
        size: SUITE_SIZE,
        ..Default::default()
    };
    let triplets = generate_synthetic_with(count, &MAGNITUDES, seed, &opts)?;
    annotate_all(&triplets, &Thresholds::default())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
