use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::{DifficultyRecord, TripletRecord};
use crate::backends::interpolate_fast;
use crate::error::{Error, Result};
use crate::metrics::psnr;

/// PSNR cut-offs in dB for levels 4, 3 and 2; anything lower is level 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds(pub [f64; 3]);

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds([35.0, 30.0, 25.0])
    }
}

impl Thresholds {
    /// Finite and strictly decreasing.
    pub fn new(t: [f64; 3]) -> Result<Self> {
        if t.iter().any(|v| !v.is_finite()) || !(t[0] > t[1] && t[1] > t[2]) {
            return Err(Error::InvalidArgument(format!(
                "thresholds must be finite and strictly decreasing (t4 > t3 > t2), got {t:?}"
            )));
        }
        Ok(Thresholds(t))
    }
}

/// Boundaries are inclusive: a PSNR equal to a cut-off gets the higher level.
pub fn level_for_psnr(psnr: f64, thresholds: &Thresholds) -> u8 {
    let [t4, t3, t2] = thresholds.0;
    if psnr >= t4 {
        4
    } else if psnr >= t3 {
        3
    } else if psnr >= t2 {
        2
    } else {
        1
    }
}

/// Levels a triplet by how well the fast blend of `f0` and `f2`
/// reconstructs `f1`.
pub fn annotate(triplet: &TripletRecord, thresholds: &Thresholds) -> Result<DifficultyRecord> {
    let thresholds = Thresholds::new(thresholds.0)?;
    let frames = triplet.load()?;
    let blend = interpolate_fast(&frames[0], &frames[2])?;
    let quality = psnr(&blend, &frames[1])?;
    DifficultyRecord::new(
        triplet.clone(),
        level_for_psnr(quality, &thresholds),
        quality,
    )
}

/// [`annotate`] over many triplets on the current rayon pool; output order
/// matches input order.
pub fn annotate_all(
    triplets: &[TripletRecord],
    thresholds: &Thresholds,
) -> Result<Vec<DifficultyRecord>> {
    triplets
        .par_iter()
        .map(|t| annotate(t, thresholds))
        .collect()
}
