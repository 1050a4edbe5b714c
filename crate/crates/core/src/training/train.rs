use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::checkpoint::{Checkpoint, TrainingMeta};
use super::loss::{perceptual_proxy, LossBreakdown};
use crate::dataset::DifficultyRecord;
use crate::error::{Error, Result};
use crate::model::{frames_to_tensor, predict_score, stack_batch, DpaConfig, DpaModel};
use crate::numerics::{Graph, ParamStore, Tensor, Var};
use crate::seed;

/// At most this many per-step losses are kept in [`TrainingMeta`].
pub const HISTORY_CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainHyper {
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    /// Weight of the auxiliary term.
    pub lambda: f64,
    /// Log every this many steps; 0 disables progress logs.
    pub log_every: usize,
    /// Randomly flip, transpose and swap the frames of each training pair.
    #[serde(default)]
    pub augment: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            lr: 1e-4,
            steps: 1000,
            batch: 4,
            seed: 0,
            lambda: 1.0,
            log_every: 50,
            augment: true,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// A record preprocessed for the network.
#[derive(Clone, Debug)]
pub struct Sample {
    /// `[1, 3, S, S]` first and last frame of the triplet.
    pub frame0: Tensor,
    pub frame1: Tensor,
    pub target: f64,
    /// Perceptual distance between the two input frames.
    pub distance: f64,
}

/// Resizes each record's `f0` and `f2` to the network input and computes
/// the perceptual distance at full resolution.
pub fn prepare_samples(records: &[DifficultyRecord], input_size: usize) -> Result<Vec<Sample>> {
    records
        .par_iter()
        .map(|r| {
            let f = r.triplet.load()?;
            Ok(Sample {
                frame0: frames_to_tensor(&[&f[0]], input_size)?,
                frame1: frames_to_tensor(&[&f[2]], input_size)?,
                target: r.score,
                distance: perceptual_proxy(&f[0], &f[2])?,
            })
        })
        .collect()
}

/// One of the 8 symmetries of the square (bit 0: flip x, bit 1: flip y,
/// bit 2: transpose) applied to every plane of a `[1, C, S, S]` tensor.
pub fn dihedral(t: &Tensor, code: u8) -> Tensor {
    let s = t.shape()[3];
    let planes = t.numel() / (s * s);
    let mut out = vec![0.0; t.numel()];
    for p in 0..planes {
        let src = &t.data()[p * s * s..(p + 1) * s * s];
        let dst = &mut out[p * s * s..(p + 1) * s * s];
        for y in 0..s {
            for x in 0..s {
                let (mut sy, mut sx) = if code & 4 != 0 { (x, y) } else { (y, x) };
                if code & 1 != 0 {
                    sx = s - 1 - sx;
                }
                if code & 2 != 0 {
                    sy = s - 1 - sy;
                }
                dst[y * s + x] = src[sy * s + sx];
            }
        }
    }
    Tensor::new(t.shape(), out).expect("same shape")
}

/// A randomly transformed copy of `sample`; the label is unchanged since
/// difficulty does not depend on orientation or frame order.
fn augmented<R: rand::Rng>(sample: &Sample, rng: &mut R) -> Sample {
    let code: u8 = rng.random_range(0..8);
    let (a, b) = (
        dihedral(&sample.frame0, code),
        dihedral(&sample.frame1, code),
    );
    let (frame0, frame1) = if rng.random_bool(0.5) { (b, a) } else { (a, b) };
    Sample {
        frame0,
        frame1,
        ..*sample
    }
}

/// Nodes of the training objective for one batch.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub score: Var,
    pub attention_mean: Var,
    /// Mean `|score − target|`.
    pub difficulty: Var,
    /// Mean `|attention_mean − distance|`, absent when the config disables it.
    pub auxiliary: Option<Var>,
    pub total: Var,
}

/// Builds the batch objective on `g`.
pub fn build_loss(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &DpaConfig,
    batch: &[&Sample],
    lambda: f64,
) -> Result<LossVars> {
    let n = batch.len();
    let t0 = stack_batch(&batch.iter().map(|s| &s.frame0).collect::<Vec<_>>())?;
    let t1 = stack_batch(&batch.iter().map(|s| &s.frame1).collect::<Vec<_>>())?;
    let a = g.constant(t0)?;
    let b = g.constant(t1)?;
    let out = predict_score(g, params, cfg, a, b)?;
    let target = g.constant(Tensor::new(&[n], batch.iter().map(|s| s.target).collect())?)?;
    let err = g.sub(out.score, target)?;
    let err = g.abs(err)?;
    let difficulty = g.mean(err)?;
    let (auxiliary, total) = if cfg.aux_loss_enabled {
        let dist = g.constant(Tensor::new(
            &[n],
            batch.iter().map(|s| s.distance).collect(),
        )?)?;
        let e = g.sub(out.attention_mean, dist)?;
        let e = g.abs(e)?;
        let aux = g.mean(e)?;
        let weighted = g.scale(aux, lambda)?;
        (Some(aux), g.add(difficulty, weighted)?)
    } else {
        (None, difficulty)
    };
    Ok(LossVars {
        score: out.score,
        attention_mean: out.attention_mean,
        difficulty,
        auxiliary,
        total,
    })
}

/// Model scores for preprocessed samples, `chunk` pairs per forward pass.
pub fn predict_samples(model: &DpaModel, samples: &[Sample], chunk: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(samples.len());
    for part in samples.chunks(chunk.max(1)) {
        let t0 = stack_batch(&part.iter().map(|s| &s.frame0).collect::<Vec<_>>())?;
        let t1 = stack_batch(&part.iter().map(|s| &s.frame1).collect::<Vec<_>>())?;
        let mut g = Graph::new();
        let a = g.constant(t0)?;
        let b = g.constant(t1)?;
        let o = predict_score(&mut g, &model.params, &model.config, a, b)?;
        out.extend_from_slice(g.value(o.score).data());
    }
    Ok(out)
}

/// Sample indices for global step `step`: consecutive positions in an
/// endless sequence of per-epoch shuffles, so resuming continues the same
/// order.
struct BatchOrder {
    seed: u64,
    n: usize,
    epoch: Option<usize>,
    perm: Vec<usize>,
}

impl BatchOrder {
    fn new(seed: u64, n: usize) -> Self {
        BatchOrder {
            seed,
            n,
            epoch: None,
            perm: Vec::new(),
        }
    }

    fn at(&mut self, pos: usize) -> usize {
        let epoch = pos / self.n;
        if self.epoch != Some(epoch) {
            self.perm = (0..self.n).collect();
            self.perm
                .shuffle(&mut seed::rng(self.seed, &format!("train.shuffle.{epoch}")));
            self.epoch = Some(epoch);
        }
        self.perm[pos % self.n]
    }
}

fn diverged(step: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { op } => Error::Diverged {
            step,
            reason: format!("non-finite value in {op}"),
        },
        other => other,
    }
}

/// Trains a freshly initialized model (seeded from `hyper.seed`).
pub fn train(
    dataset: &[DifficultyRecord],
    cfg: &DpaConfig,
    hyper: &TrainHyper,
) -> Result<Checkpoint> {
    cfg.validate()?;
    let model = DpaModel::init(cfg.clone(), hyper.seed)?;
    let samples = prepare_samples(dataset, cfg.input_size)?;
    train_samples(model, TrainingMeta::default(), &samples, hyper)
}

/// Continues from `ckpt`; the step counter and loss history carry on.
/// Optimizer moments start from zero.
pub fn resume(
    ckpt: Checkpoint,
    dataset: &[DifficultyRecord],
    hyper: &TrainHyper,
) -> Result<Checkpoint> {
    let samples = prepare_samples(dataset, ckpt.model.config.input_size)?;
    train_samples(ckpt.model, ckpt.meta, &samples, hyper)
}

/// The optimization loop over preprocessed samples.
pub fn train_samples(
    mut model: DpaModel,
    mut meta: TrainingMeta,
    samples: &[Sample],
    hyper: &TrainHyper,
) -> Result<Checkpoint> {
    hyper.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if let Some(bad) = samples.iter().find(|s| !(0.0..=1.0).contains(&s.target)) {
        return Err(Error::InvalidArgument(format!(
            "target score {} outside [0, 1]",
            bad.target
        )));
    }
    let mut order = BatchOrder::new(hyper.seed, samples.len());
    let mut opt = Adam::new(hyper.lr);
    let start = meta.step;
    for s in start..start + hyper.steps {
        let step = s + 1;
        let mut batch: Vec<Sample> = (0..hyper.batch)
            .map(|k| samples[order.at(s * hyper.batch + k)].clone())
            .collect();
        if hyper.augment {
            let mut rng = seed::rng(hyper.seed, &format!("train.augment.{s}"));
            batch = batch.iter().map(|x| augmented(x, &mut rng)).collect();
        }
        let batch: Vec<&Sample> = batch.iter().collect();
        let mut g = Graph::new();
        let vars = build_loss(&mut g, &model.params, &model.config, &batch, hyper.lambda)
            .map_err(|e| diverged(step, e))?;
        g.backward(vars.total).map_err(|e| diverged(step, e))?;
        let aux = vars.auxiliary.map(|v| g.value(v).item()).unwrap_or(0.0);
        let lambda = if vars.auxiliary.is_some() {
            hyper.lambda
        } else {
            0.0
        };
        let losses = LossBreakdown::new(g.value(vars.difficulty).item(), aux, lambda)
            .map_err(|e| diverged(step, e))?;
        opt.step(&mut model.params, &g.param_grads())?;
        if let Some((name, _)) = model.params.iter().find(|(_, t)| !t.is_finite()) {
            return Err(Error::Diverged {
                step,
                reason: format!("parameter `{name}` became non-finite"),
            });
        }
        meta.loss_history.push(losses);
        if hyper.log_every > 0 && (step % hyper.log_every == 0 || s == start) {
            log::info!(
                "step {step}: total {:.5} difficulty {:.5} auxiliary {:.5}",
                losses.total,
                losses.difficulty,
                losses.auxiliary
            );
        }
    }
    let excess = meta.loss_history.len().saturating_sub(HISTORY_CAP);
    meta.loss_history.drain(..excess);
    meta.step = start + hyper.steps;
    meta.seed = hyper.seed;
    meta.lr = hyper.lr;
    meta.lambda = hyper.lambda;
    meta.batch = hyper.batch;
    Ok(Checkpoint { model, meta })
}
