use super::config::{DpaConfig, StageGeometry, DEEP_TO_SHALLOW, DEFORM_KERNEL};
use super::params::{extractor_prefix, Branch};
use crate::error::{Error, Result};
use crate::numerics::{
    patch_merging, window_attention, Graph, ParamStore, Var, WindowSpec, LAYER_NORM_EPS,
};

/// Stage-2 ("shallow", texture) and stage-4 ("deep", semantic) maps, NCHW.
#[derive(Clone, Copy, Debug)]
pub struct FeaturePair {
    pub shallow: Var,
    pub deep: Var,
}

/// Graph nodes produced by [`predict_score`]. `score` and `attention_mean`
/// have shape `[N]`; the maps are `[N, 1, h, w]`.
#[derive(Clone, Copy, Debug)]
pub struct ScoreOutput {
    pub score: Var,
    pub score_map: Var,
    pub attention_map: Var,
    pub attention_mean: Var,
}

fn layer_norm(g: &mut Graph, x: Var, params: &ParamStore, prefix: &str) -> Result<Var> {
    let gamma = g.param(params, &format!("{prefix}.weight"))?;
    let beta = g.param(params, &format!("{prefix}.bias"))?;
    g.layer_norm(x, gamma, beta, LAYER_NORM_EPS)
}

fn conv(g: &mut Graph, x: Var, params: &ParamStore, prefix: &str, padding: usize) -> Result<Var> {
    let w = g.param(params, &format!("{prefix}.weight"))?;
    let b = g.param(params, &format!("{prefix}.bias"))?;
    g.conv2d(x, w, Some(b), 1, padding)
}

fn linear(g: &mut Graph, x: Var, params: &ParamStore, prefix: &str) -> Result<Var> {
    let w = g.param(params, &format!("{prefix}.weight"))?;
    let b = g.param(params, &format!("{prefix}.bias"))?;
    g.linear(x, w, Some(b))
}

fn transformer_block(
    g: &mut Graph,
    x: Var,
    st: &StageGeometry,
    shift: usize,
    params: &ParamStore,
    prefix: &str,
) -> Result<Var> {
    let h = layer_norm(g, x, params, &format!("{prefix}.norm1"))?;
    let spec = WindowSpec {
        height: st.resolution,
        width: st.resolution,
        window: st.window,
        shift,
        heads: st.heads,
    };
    let attn = window_attention(g, h, spec, params, &format!("{prefix}.attn"))?;
    let x = g.add(x, attn.out)?;
    let h = layer_norm(g, x, params, &format!("{prefix}.norm2"))?;
    let h = linear(g, h, params, &format!("{prefix}.mlp.fc1"))?;
    let h = g.gelu(h)?;
    let h = linear(g, h, params, &format!("{prefix}.mlp.fc2"))?;
    g.add(x, h)
}

/// Tokens `[N, r*r, d]` to an NCHW map `[N, d, r, r]`.
fn tokens_to_map(g: &mut Graph, x: Var, r: usize) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let x = g.reshape(x, &[s[0], r, r, s[2]])?;
    g.permute(x, &[0, 3, 1, 2])
}

/// Hierarchical windowed-attention extractor.
///
/// `frame: [N, 3, S, S]` with `S == cfg.input_size`. The branch selects the
/// parameter set; with Siamese extraction both branches read the same names.
pub fn extract_features(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &DpaConfig,
    frame: Var,
    branch: Branch,
) -> Result<FeaturePair> {
    let stages = cfg.stages()?;
    let fs = g.shape(frame).to_vec();
    if fs.len() != 4 || fs[1] != 3 || fs[2] != cfg.input_size || fs[3] != cfg.input_size {
        return Err(Error::shape(
            "extract_features",
            "frame",
            format!("expected [N, 3, {s}, {s}], got {fs:?}", s = cfg.input_size),
        ));
    }
    let prefix = extractor_prefix(cfg, branch);
    let n = fs[0];

    let w = g.param(params, &format!("{prefix}.patch_embed.proj.weight"))?;
    let b = g.param(params, &format!("{prefix}.patch_embed.proj.bias"))?;
    let x = g.conv2d(frame, w, Some(b), cfg.patch_size, 0)?;
    let x = g.permute(x, &[0, 2, 3, 1])?;
    let grid = cfg.input_size / cfg.patch_size;
    let x = g.reshape(x, &[n, grid * grid, cfg.embed_dim])?;
    let mut x = layer_norm(g, x, params, &format!("{prefix}.patch_embed.norm"))?;

    let mut shallow = None;
    let mut deep = None;
    for (s, st) in stages.iter().enumerate() {
        for blk in 0..st.depth {
            let bp = format!("{prefix}.stages.{s}.blocks.{blk}");
            x = transformer_block(g, x, st, st.shift_for_block(blk), params, &bp)?;
        }
        if s == 1 {
            let h = layer_norm(g, x, params, &format!("{prefix}.norm_shallow"))?;
            shallow = Some(tokens_to_map(g, h, st.resolution)?);
        }
        if s == stages.len() - 1 {
            let h = layer_norm(g, x, params, &format!("{prefix}.norm_deep"))?;
            deep = Some(tokens_to_map(g, h, st.resolution)?);
        } else {
            x = patch_merging(
                g,
                x,
                st.resolution,
                st.resolution,
                params,
                &format!("{prefix}.stages.{s}.downsample"),
            )?;
        }
    }
    Ok(FeaturePair {
        shallow: shallow.expect("stage 2 exists"),
        deep: deep.expect("stage 4 exists"),
    })
}

/// Per-frame fusion: align the deep map to the shallow resolution, reduce it
/// with a 1×1 conv, deform the shallow map with offsets predicted from the
/// aligned deep map, and concatenate the two.
fn frame_fusion(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &DpaConfig,
    f: FeaturePair,
    tag: &str,
) -> Result<Var> {
    let (ss, sd) = (g.shape(f.shallow).to_vec(), g.shape(f.deep).to_vec());
    if ss[2] != DEEP_TO_SHALLOW * sd[2] || ss[3] != DEEP_TO_SHALLOW * sd[3] {
        return Err(Error::shape(
            "fuse_features",
            "resolution",
            format!("shallow {ss:?} is not {DEEP_TO_SHALLOW}x deep {sd:?}"),
        ));
    }
    let up = if cfg.pixelshuffle_enabled {
        g.pixel_shuffle(f.deep, DEEP_TO_SHALLOW)?
    } else {
        g.upsample_nearest(f.deep, DEEP_TO_SHALLOW)?
    };
    let aligned = conv(g, up, params, "fusion.align", 0)?;
    let offsets = conv(g, aligned, params, "fusion.offset", DEFORM_KERNEL / 2)?;
    g.label(format!("fusion.{tag}.offsets"), offsets);
    let w = g.param(params, "fusion.deform.weight")?;
    let b = g.param(params, "fusion.deform.bias")?;
    let deformed = g.deformable_conv2d(f.shallow, offsets, w, b)?;
    g.label(format!("fusion.{tag}.deformed"), deformed);
    let spatial = g.concat(&[aligned, deformed], 1)?;
    g.label(format!("fusion.{tag}.spatial"), spatial);
    Ok(spatial)
}

/// Fuses the features of two frames into `[N, Cf, h, w]`.
pub fn fuse_features(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &DpaConfig,
    f0: FeaturePair,
    f1: FeaturePair,
) -> Result<Var> {
    let s0 = frame_fusion(g, params, cfg, f0, "frame0")?;
    let s1 = frame_fusion(g, params, cfg, f1, "frame1")?;
    let mut parts = vec![s0, s1];
    if cfg.image_difference_enabled {
        let temporal = g.sub(s1, s0)?;
        g.label("fusion.temporal_difference", temporal);
        parts.push(temporal);
    }
    let cat = g.concat(&parts, 1)?;
    let merged = conv(g, cat, params, "fusion.merge", 0)?;
    let out = g.relu(merged)?;
    g.label("fusion.output", out);
    Ok(out)
}

fn head_branch(g: &mut Graph, params: &ParamStore, x: Var, name: &str) -> Result<Var> {
    let h = conv(g, x, params, &format!("head.{name}.conv1"), 1)?;
    let h = g.relu(h)?;
    let h = conv(g, h, params, &format!("head.{name}.conv2"), 1)?;
    g.sigmoid(h)
}

/// Full forward pass: one difficulty score in [0, 1] per frame pair
/// (higher means easier), as the attention-weighted mean of a per-location
/// score map.
pub fn predict_score(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &DpaConfig,
    frame0: Var,
    frame1: Var,
) -> Result<ScoreOutput> {
    if g.shape(frame0) != g.shape(frame1) {
        return Err(Error::shape(
            "predict_score",
            "frames",
            format!("{:?} vs {:?}", g.shape(frame0), g.shape(frame1)),
        ));
    }
    let f0 = extract_features(g, params, cfg, frame0, Branch::First)?;
    let f1 = extract_features(g, params, cfg, frame1, Branch::Second)?;
    let fused = fuse_features(g, params, cfg, f0, f1)?;

    let score_map = head_branch(g, params, fused, "score")?;
    let attention_map = head_branch(g, params, fused, "attention")?;
    let s = g.shape(score_map).to_vec();
    let (n, hw) = (s[0], s[2] * s[3]);

    let weighted = g.mul(score_map, attention_map)?;
    let weighted = g.reshape(weighted, &[n, hw])?;
    let weighted = g.sum_axis(weighted, 1)?;
    let att = g.reshape(attention_map, &[n, hw])?;
    let att_sum = g.sum_axis(att, 1)?;
    let score = g.div(weighted, att_sum)?;
    let attention_mean = g.scale(att_sum, 1.0 / hw as f64)?;
    g.label("head.score", score);
    g.label("head.attention_mean", attention_mean);
    Ok(ScoreOutput {
        score,
        score_map,
        attention_map,
        attention_mean,
    })
}
