use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backends::{measure_latency, BackendKind, BackendRegistry, Interpolator, MIN_LATENCY};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::metrics::{psnr, ssim};
use crate::model::DpaModel;

/// One routed frame pair.
///
/// Unless `forced`, `chosen == Fast` exactly when
/// `predicted_score >= threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingDecision {
    pub pair_id: String,
    pub predicted_score: f64,
    pub threshold: f64,
    pub chosen: BackendKind,
    pub forced: bool,
    /// Against the ground-truth middle frame, when one is known.
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    /// `dpa_latency + backend_latency`, seconds.
    pub latency: f64,
    pub dpa_latency: f64,
    pub backend_latency: f64,
    /// Where the interpolated frame was written, if it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RoutingDecision {
    /// The routing rule, `chosen ⇔ score`, for unforced decisions.
    pub fn is_consistent(&self) -> bool {
        self.forced
            || (self.chosen == BackendKind::Fast) == (self.predicted_score >= self.threshold)
    }
}

/// Ties go to the fast backend.
pub fn choose(score: f64, threshold: f64) -> BackendKind {
    if score >= threshold {
        BackendKind::Fast
    } else {
        BackendKind::Accurate
    }
}

pub fn validate_threshold(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie in [0, 1], got {t}"
        )));
    }
    Ok(t)
}

#[derive(Clone, Debug)]
pub struct Routed {
    pub decision: RoutingDecision,
    pub frame: Frame,
}

/// Scores a pair with the model and interpolates it with the backend the
/// score selects.
#[derive(Clone)]
pub struct Router<'m> {
    model: &'m DpaModel,
    fast: Arc<dyn Interpolator>,
    accurate: Arc<dyn Interpolator>,
}

impl<'m> Router<'m> {
    /// Uses the default `fast` and `accurate` backends.
    pub fn new(model: &'m DpaModel) -> Self {
        let r = BackendRegistry::default();
        Router {
            model,
            fast: r.get("fast").expect("default registry has fast"),
            accurate: r.get("accurate").expect("default registry has accurate"),
        }
    }

    pub fn with_backends(
        model: &'m DpaModel,
        fast: Arc<dyn Interpolator>,
        accurate: Arc<dyn Interpolator>,
    ) -> Self {
        Router {
            model,
            fast,
            accurate,
        }
    }

    pub fn model(&self) -> &DpaModel {
        self.model
    }

    pub fn backend(&self, kind: BackendKind) -> &dyn Interpolator {
        match kind {
            BackendKind::Fast => self.fast.as_ref(),
            BackendKind::Accurate => self.accurate.as_ref(),
        }
    }

    /// Timed model score for a pair.
    pub fn score(&self, frame0: &Frame, frame1: &Frame) -> Result<(f64, f64)> {
        frame0.check_same_dims(frame1, "route")?;
        let start = Instant::now();
        let s = self.model.score_frames(frame0, frame1)?.score;
        Ok((s, start.elapsed().as_secs_f64().max(MIN_LATENCY)))
    }

    /// `force` overrides the threshold rule. The model still runs, so the
    /// recorded latency always includes scoring.
    pub fn route(
        &self,
        pair_id: &str,
        frame0: &Frame,
        frame1: &Frame,
        threshold: f64,
        force: Option<BackendKind>,
        ground_truth: Option<&Frame>,
    ) -> Result<Routed> {
        validate_threshold(threshold)?;
        let (score, dpa_latency) = self.score(frame0, frame1)?;
        let chosen = force.unwrap_or_else(|| choose(score, threshold));
        let (frame, backend_latency) = measure_latency(self.backend(chosen), frame0, frame1)?;
        let (psnr, ssim) = match ground_truth {
            Some(gt) => (Some(psnr(&frame, gt)?), Some(ssim(&frame, gt)?)),
            None => (None, None),
        };
        Ok(Routed {
            decision: RoutingDecision {
                pair_id: pair_id.to_string(),
                predicted_score: score,
                threshold,
                chosen,
                forced: force.is_some(),
                psnr,
                ssim,
                latency: dpa_latency + backend_latency,
                dpa_latency,
                backend_latency,
                output: None,
            },
            frame,
        })
    }
}

/// [`Router::route`] with the default backends and no ground truth.
pub fn route(
    frame0: &Frame,
    frame1: &Frame,
    model: &DpaModel,
    threshold: f64,
    force: Option<BackendKind>,
) -> Result<Routed> {
    Router::new(model).route("pair", frame0, frame1, threshold, force, None)
}
