use std::collections::BTreeMap;

use rand::Rng;

use super::config::{DpaConfig, DEFORM_KERNEL, MLP_RATIO};
use crate::error::Result;
use crate::numerics::{
    patch_merging_param_shapes, window_attention_param_shapes, ParamStore, Tensor,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    Zeros,
    Ones,
    /// Normal with standard deviation `1/sqrt(fan_in)`.
    FanIn(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

/// Which extractor a frame goes through. With Siamese extraction both map to
/// the same parameter prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    First,
    Second,
}

pub fn extractor_prefix(cfg: &DpaConfig, branch: Branch) -> &'static str {
    match (cfg.siamese_enabled, branch) {
        (true, _) => "extract",
        (false, Branch::First) => "extract_a",
        (false, Branch::Second) => "extract_b",
    }
}

fn push(specs: &mut Vec<ParamSpec>, name: String, shape: Vec<usize>, init: Init) {
    specs.push(ParamSpec { name, shape, init });
}

fn linear_init(name: &str, shape: &[usize]) -> Init {
    if name.ends_with(".bias") {
        Init::Zeros
    } else if name.contains("norm") {
        Init::Ones
    } else {
        Init::FanIn(shape[0])
    }
}

fn extractor_specs(cfg: &DpaConfig, prefix: &str, specs: &mut Vec<ParamSpec>) -> Result<()> {
    let (e, p) = (cfg.embed_dim, cfg.patch_size);
    push(
        specs,
        format!("{prefix}.patch_embed.proj.weight"),
        vec![e, 3, p, p],
        Init::FanIn(3 * p * p),
    );
    push(
        specs,
        format!("{prefix}.patch_embed.proj.bias"),
        vec![e],
        Init::Zeros,
    );
    push(
        specs,
        format!("{prefix}.patch_embed.norm.weight"),
        vec![e],
        Init::Ones,
    );
    push(
        specs,
        format!("{prefix}.patch_embed.norm.bias"),
        vec![e],
        Init::Zeros,
    );
    let stages = cfg.stages()?;
    for (s, st) in stages.iter().enumerate() {
        let d = st.dim;
        for b in 0..st.depth {
            let bp = format!("{prefix}.stages.{s}.blocks.{b}");
            push(specs, format!("{bp}.norm1.weight"), vec![d], Init::Ones);
            push(specs, format!("{bp}.norm1.bias"), vec![d], Init::Zeros);
            for (name, shape) in window_attention_param_shapes(&format!("{bp}.attn"), d) {
                let init = linear_init(&name, &shape);
                push(specs, name, shape, init);
            }
            push(specs, format!("{bp}.norm2.weight"), vec![d], Init::Ones);
            push(specs, format!("{bp}.norm2.bias"), vec![d], Init::Zeros);
            push(
                specs,
                format!("{bp}.mlp.fc1.weight"),
                vec![d, MLP_RATIO * d],
                Init::FanIn(d),
            );
            push(
                specs,
                format!("{bp}.mlp.fc1.bias"),
                vec![MLP_RATIO * d],
                Init::Zeros,
            );
            push(
                specs,
                format!("{bp}.mlp.fc2.weight"),
                vec![MLP_RATIO * d, d],
                Init::FanIn(MLP_RATIO * d),
            );
            push(specs, format!("{bp}.mlp.fc2.bias"), vec![d], Init::Zeros);
        }
        if s + 1 < stages.len() {
            for (name, shape) in
                patch_merging_param_shapes(&format!("{prefix}.stages.{s}.downsample"), d)
            {
                let init = linear_init(&name, &shape);
                push(specs, name, shape, init);
            }
        }
    }
    let (c2, c4) = (cfg.shallow_channels(), cfg.deep_channels());
    push(
        specs,
        format!("{prefix}.norm_shallow.weight"),
        vec![c2],
        Init::Ones,
    );
    push(
        specs,
        format!("{prefix}.norm_shallow.bias"),
        vec![c2],
        Init::Zeros,
    );
    push(
        specs,
        format!("{prefix}.norm_deep.weight"),
        vec![c4],
        Init::Ones,
    );
    push(
        specs,
        format!("{prefix}.norm_deep.bias"),
        vec![c4],
        Init::Zeros,
    );
    Ok(())
}

/// Every parameter of the network in declaration order. This is the single
/// source of truth for names and shapes; checkpoints are validated against it.
pub fn param_specs(cfg: &DpaConfig) -> Result<Vec<ParamSpec>> {
    cfg.validate()?;
    let mut specs = Vec::new();
    extractor_specs(cfg, extractor_prefix(cfg, Branch::First), &mut specs)?;
    if !cfg.siamese_enabled {
        extractor_specs(cfg, extractor_prefix(cfg, Branch::Second), &mut specs)?;
    }

    let (c2, up, k) = (
        cfg.shallow_channels(),
        cfg.upsampled_deep_channels(),
        DEFORM_KERNEL,
    );
    push(
        &mut specs,
        "fusion.align.weight".into(),
        vec![c2, up, 1, 1],
        Init::FanIn(up),
    );
    push(
        &mut specs,
        "fusion.align.bias".into(),
        vec![c2],
        Init::Zeros,
    );
    push(
        &mut specs,
        "fusion.offset.weight".into(),
        vec![2 * k * k, c2, k, k],
        Init::Zeros,
    );
    push(
        &mut specs,
        "fusion.offset.bias".into(),
        vec![2 * k * k],
        Init::Zeros,
    );
    push(
        &mut specs,
        "fusion.deform.weight".into(),
        vec![c2, c2, k, k],
        Init::FanIn(c2 * k * k),
    );
    push(
        &mut specs,
        "fusion.deform.bias".into(),
        vec![c2],
        Init::Zeros,
    );
    let (cin, cf) = (cfg.fusion_input_channels(), cfg.fused_channels());
    push(
        &mut specs,
        "fusion.merge.weight".into(),
        vec![cf, cin, 1, 1],
        Init::FanIn(cin),
    );
    push(
        &mut specs,
        "fusion.merge.bias".into(),
        vec![cf],
        Init::Zeros,
    );

    let hc = cfg.head_channels;
    for branch in ["score", "attention"] {
        push(
            &mut specs,
            format!("head.{branch}.conv1.weight"),
            vec![hc, cf, 3, 3],
            Init::FanIn(cf * 9),
        );
        push(
            &mut specs,
            format!("head.{branch}.conv1.bias"),
            vec![hc],
            Init::Zeros,
        );
        push(
            &mut specs,
            format!("head.{branch}.conv2.weight"),
            vec![1, hc, 3, 3],
            Init::FanIn(hc * 9),
        );
        push(
            &mut specs,
            format!("head.{branch}.conv2.bias"),
            vec![1],
            Init::Zeros,
        );
    }
    Ok(specs)
}

pub fn param_shapes(cfg: &DpaConfig) -> Result<BTreeMap<String, Vec<usize>>> {
    Ok(param_specs(cfg)?
        .into_iter()
        .map(|s| (s.name, s.shape))
        .collect())
}

/// Fresh parameters for `cfg`, deterministic in `rng`.
pub fn init_params<R: Rng + ?Sized>(cfg: &DpaConfig, rng: &mut R) -> Result<ParamStore> {
    let mut store = ParamStore::new();
    for spec in param_specs(cfg)? {
        let t = match spec.init {
            Init::Zeros => Tensor::zeros(&spec.shape),
            Init::Ones => Tensor::ones(&spec.shape),
            Init::FanIn(fan) => Tensor::randn(&spec.shape, 1.0 / (fan as f64).sqrt(), rng),
        };
        store.insert(spec.name, t)?;
    }
    Ok(store)
}

/// Total number of scalar parameters in `params`.
pub fn count_parameters(params: &ParamStore) -> usize {
    params.count_parameters()
}

/// Parameters belonging to the feature extractor(s).
pub fn extraction_parameter_count(params: &ParamStore) -> usize {
    params
        .iter()
        .filter(|(n, _)| n.starts_with("extract"))
        .map(|(_, t)| t.numel())
        .sum()
}
