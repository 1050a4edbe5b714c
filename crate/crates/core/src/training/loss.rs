use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::metrics::ssim;

fn check_unit(op: &str, name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!(
            "{op}: {name} must lie in [0, 1], got {v}"
        )));
    }
    Ok(())
}

/// `|gt − pred|` for scores in [0, 1].
pub fn difficulty_loss(pred: f64, gt: f64) -> Result<f64> {
    check_unit("difficulty_loss", "prediction", pred)?;
    check_unit("difficulty_loss", "target", gt)?;
    Ok((gt - pred).abs())
}

/// `|attention_mean − perceptual_distance|`, both in [0, 1].
pub fn auxiliary_loss(attention_mean: f64, perceptual_distance: f64) -> Result<f64> {
    check_unit("auxiliary_loss", "attention mean", attention_mean)?;
    check_unit("auxiliary_loss", "perceptual distance", perceptual_distance)?;
    Ok((attention_mean - perceptual_distance).abs())
}

/// Perceptual distance between the two input frames: `1 − SSIM`, clipped to
/// [0, 1]. Zero for identical frames.
pub fn perceptual_proxy(frame0: &Frame, frame1: &Frame) -> Result<f64> {
    Ok((1.0 - ssim(frame0, frame1)?).clamp(0.0, 1.0))
}

/// Loss terms of one step, averaged over the batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBreakdown {
    pub difficulty: f64,
    /// Zero when the auxiliary term is disabled.
    pub auxiliary: f64,
    /// `difficulty + lambda · auxiliary`.
    pub total: f64,
    pub lambda: f64,
}

impl LossBreakdown {
    pub fn new(difficulty: f64, auxiliary: f64, lambda: f64) -> Result<Self> {
        let b = LossBreakdown {
            difficulty,
            auxiliary,
            total: difficulty + lambda * auxiliary,
            lambda,
        };
        if !(b.difficulty.is_finite() && b.auxiliary.is_finite() && b.total.is_finite()) {
            return Err(Error::NonFinite { op: "loss" });
        }
        if b.difficulty < 0.0 || b.auxiliary < 0.0 || lambda < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "loss terms and lambda must be non-negative: {b:?}"
            )));
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difficulty_examples() {
        assert_eq!(difficulty_loss(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(difficulty_loss(0.0, 1.0).unwrap(), 1.0);
        let mean = (difficulty_loss(0.2, 0.3).unwrap() + difficulty_loss(0.8, 0.6).unwrap()) / 2.0;
        assert!((mean - 0.15).abs() < 1e-15);
        assert!(difficulty_loss(1.1, 0.5).is_err());
        assert!(difficulty_loss(0.5, -0.1).is_err());
        assert!(difficulty_loss(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn auxiliary_examples() {
        assert_eq!(auxiliary_loss(0.4, 0.4).unwrap(), 0.0);
        assert_eq!(auxiliary_loss(0.25, 0.75).unwrap(), 0.5);
        assert!(auxiliary_loss(0.25, 1.5).is_err());
    }

    #[test]
    fn identical_frames_have_zero_distance() {
        let f = Frame::filled(16, 16, 3, 77);
        assert_eq!(perceptual_proxy(&f, &f).unwrap(), 0.0);
        assert_eq!(
            auxiliary_loss(0.3, perceptual_proxy(&f, &f).unwrap()).unwrap(),
            0.3
        );
    }

    #[test]
    fn breakdown_total() {
        let b = LossBreakdown::new(0.2, 0.5, 0.5).unwrap();
        assert_eq!(b.total, 0.45);
        assert!(LossBreakdown::new(f64::NAN, 0.0, 1.0).is_err());
    }
}
