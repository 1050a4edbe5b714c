mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::{gradient_suite, FD_EPS, GRAD_TOLERANCE};
use vfi_dpa::model::{predict_score, DpaConfig, DpaModel};
use vfi_dpa::numerics::{check_gradients, check_param_gradients, Tensor};

#[test]
fn every_op_matches_finite_differences() {
    let start = Instant::now();
    let cases = gradient_suite().unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let mut per_op: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &cases {
        assert!(
            c.error < GRAD_TOLERANCE,
            "{} {}: relative error {:.3e}",
            c.op,
            c.shape,
            c.error
        );
        *per_op.entry(c.op).or_default() += 1;
    }
    assert_eq!(per_op.len(), 10, "{per_op:?}");
    assert!(per_op.values().all(|&n| n >= 3), "{per_op:?}");
    assert!(elapsed < 60.0, "gradient suite took {elapsed:.1}s");
}

#[test]
fn elementwise_and_layout_ops() {
    let x = Tensor::new(&[2, 3], vec![0.3, -1.2, 0.7, 2.1, -0.4, 1.5]).unwrap();
    let y = Tensor::new(&[2, 3], vec![1.1, 0.8, -0.6, 0.9, 1.7, -1.3]).unwrap();
    let r = check_gradients(
        |g, v| {
            let a = g.mul(v[0], v[1])?;
            let b = g.div(a, v[1])?;
            let b = g.sub(b, v[0])?;
            let c = g.gelu(v[0])?;
            let d = g.sigmoid(v[1])?;
            let e = g.add(c, d)?;
            let e = g.add(e, b)?;
            let e = g.abs(e)?;
            let p = g.permute(e, &[1, 0])?;
            let p = g.roll(p, 0, 1)?;
            let s = g.slice(p, 0, 1, 2)?;
            g.sum_axis(s, 1)
        },
        &[x, y],
        &[0, 1],
        FD_EPS,
    )
    .unwrap();
    assert!(r.max_relative_error() < GRAD_TOLERANCE, "{:?}", r.worst());
}

#[test]
fn bilinear_sampling_and_upsampling() {
    let x = common::randn(&[1, 2, 4, 5], 1);
    let coords = Tensor::rand_uniform(&[1, 3, 3, 2], 0.1, 3.4, &mut common::rng(2));
    let r = check_gradients(
        |g, v| g.bilinear_sample(v[0], v[1]),
        &[x.clone(), coords],
        &[0, 1],
        FD_EPS,
    )
    .unwrap();
    assert!(r.max_relative_error() < GRAD_TOLERANCE, "{:?}", r.worst());
    let r = check_gradients(
        |g, v| g.upsample_nearest(v[0], 2),
        &[x.clone()],
        &[0],
        FD_EPS,
    )
    .unwrap();
    assert!(r.max_relative_error() < GRAD_TOLERANCE);
    let r = check_gradients(
        |g, v| g.pixel_unshuffle(v[0], 2),
        &[common::randn(&[1, 1, 4, 4], 3)],
        &[0],
        FD_EPS,
    )
    .unwrap();
    assert!(r.max_relative_error() < GRAD_TOLERANCE);
}

#[test]
fn whole_micro_model_matches_finite_differences() {
    let cfg = DpaConfig::micro();
    let mut model = DpaModel::init(cfg.clone(), 3).unwrap();
    for name in ["fusion.offset.weight", "fusion.offset.bias"] {
        let t = model.params.get_mut(name).unwrap();
        *t = Tensor::randn(t.shape(), 0.05, &mut common::rng(4));
    }
    let f0 = Tensor::rand_uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut common::rng(5));
    let f1 = Tensor::rand_uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut common::rng(6));
    // One tensor from each part of the network keeps the run short.
    let names = [
        "extract.patch_embed.proj.weight",
        "extract.stages.0.blocks.1.attn.qkv.weight",
        "extract.stages.2.downsample.reduction.weight",
        "extract.norm_deep.weight",
        "fusion.align.weight",
        "fusion.offset.bias",
        "fusion.deform.weight",
        "fusion.merge.weight",
        "head.attention.conv2.weight",
    ];
    let r = check_param_gradients(
        |g, p| {
            let a = g.constant(f0.clone())?;
            let b = g.constant(f1.clone())?;
            Ok(predict_score(g, p, &cfg, a, b)?.score)
        },
        &model.params,
        Some(&names),
        FD_EPS,
    )
    .unwrap();
    assert!(r.max_relative_error() < 1e-3, "{:?}", r.worst());

    let r = check_gradients(
        |g, v| Ok(predict_score(g, &model.params, &cfg, v[0], v[1])?.score),
        &[
            Tensor::rand_uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut common::rng(7)),
            Tensor::rand_uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut common::rng(8)),
        ],
        &[0, 1],
        FD_EPS,
    )
    .unwrap();
    assert!(r.max_relative_error() < 1e-3, "{:?}", r.worst());
}
