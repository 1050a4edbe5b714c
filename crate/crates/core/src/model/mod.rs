//! The difficulty pre-assessment network.
//!
//! Two frames go through a weight-shared hierarchical windowed-attention
//! extractor. Stage-2 and stage-4 maps are fused per frame (PixelShuffle
//! alignment plus deformable convolution), the two frames are combined with
//! their temporal difference, and a patch-wise head produces a score map and
//! an attention map whose weighted mean is the pair's score.

mod config;
mod network;
mod params;

pub use config::{DpaConfig, StageGeometry, DEEP_TO_SHALLOW, DEFORM_KERNEL, MLP_RATIO, STAGES};
pub use network::{extract_features, fuse_features, predict_score, FeaturePair, ScoreOutput};
pub use params::{
    count_parameters, extraction_parameter_count, extractor_prefix, init_params, param_shapes,
    param_specs, Branch, Init, ParamSpec,
};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::numerics::{Graph, ParamStore, Tensor};

/// Scalar results of one forward pass on a single pair.
#[derive(Clone, Debug)]
pub struct ScoreValues {
    pub score: f64,
    pub attention_mean: f64,
    pub score_map: Tensor,
    pub attention_map: Tensor,
}

/// A configuration together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DpaModel {
    pub config: DpaConfig,
    pub params: ParamStore,
}

impl DpaModel {
    pub fn init(config: DpaConfig, seed: u64) -> Result<Self> {
        let mut rng = crate::seed::rng(seed, "model.init");
        let params = init_params(&config, &mut rng)?;
        Ok(DpaModel { config, params })
    }

    /// Validates `params` against the shapes `config` requires.
    pub fn from_parts(config: DpaConfig, params: ParamStore) -> Result<Self> {
        let expected = param_shapes(&config)?;
        for (name, shape) in &expected {
            let t = params
                .get(name)
                .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Config(format!(
                    "parameter `{name}` has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
        }
        if let Some(extra) = params.names().find(|n| !expected.contains_key(*n)) {
            return Err(Error::Config(format!("unexpected parameter `{extra}`")));
        }
        Ok(DpaModel { config, params })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count_parameters()
    }

    /// Scores one frame pair. Frames are resized to the network input size.
    pub fn score_frames(&self, frame0: &Frame, frame1: &Frame) -> Result<ScoreValues> {
        frame0.check_same_dims(frame1, "score_frames")?;
        let size = self.config.input_size;
        let t0 = frames_to_tensor(&[frame0], size)?;
        let t1 = frames_to_tensor(&[frame1], size)?;
        self.score_tensors(t0, t1)
    }

    /// Scores preprocessed `[1, 3, S, S]` inputs.
    pub fn score_tensors(&self, t0: Tensor, t1: Tensor) -> Result<ScoreValues> {
        let mut g = Graph::new();
        let a = g.constant(t0)?;
        let b = g.constant(t1)?;
        let out = predict_score(&mut g, &self.params, &self.config, a, b)?;
        Ok(ScoreValues {
            score: g.value(out.score).data()[0],
            attention_mean: g.value(out.attention_mean).data()[0],
            score_map: g.value(out.score_map).clone(),
            attention_map: g.value(out.attention_map).clone(),
        })
    }
}

/// Stacks frames into a `[N, 3, size, size]` tensor in [0, 1], resizing
/// bilinearly and replicating gray frames.
pub fn frames_to_tensor(frames: &[&Frame], size: usize) -> Result<Tensor> {
    if frames.is_empty() {
        return Err(Error::InvalidArgument("no frames to stack".into()));
    }
    let mut data = Vec::with_capacity(frames.len() * 3 * size * size);
    for f in frames {
        data.extend(f.resized_planar_rgb(size));
    }
    Tensor::new(&[frames.len(), 3, size, size], data)
}

/// Concatenates `[1, ...]` tensors along the batch axis.
pub fn stack_batch(items: &[&Tensor]) -> Result<Tensor> {
    let first = items
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?
        .shape()
        .to_vec();
    let mut data = Vec::with_capacity(items.len() * items[0].numel());
    for t in items {
        if t.shape() != first.as_slice() {
            return Err(Error::shape(
                "stack_batch",
                "items",
                format!("{:?} vs {first:?}", t.shape()),
            ));
        }
        data.extend_from_slice(t.data());
    }
    let mut shape = first;
    shape[0] *= items.len();
    Tensor::new(&shape, data)
}
