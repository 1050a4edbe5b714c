use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::metrics::Subset;

/// Where a triplet's frames live.
#[derive(Clone, Debug, PartialEq)]
pub enum TripletFrames {
    Paths([PathBuf; 3]),
    Inline(Arc<[Frame; 3]>),
}

/// Three neighbouring frames `(f0, f1, f2)`; `f1` is the ground-truth middle.
#[derive(Clone, Debug, PartialEq)]
pub struct TripletRecord {
    pub id: String,
    pub frames: TripletFrames,
    pub source: String,
    pub stride: usize,
    pub subset: Option<Subset>,
    /// Manifest keys this crate does not interpret, kept verbatim.
    pub extra: Map<String, Value>,
}

impl TripletRecord {
    pub fn inline(
        id: impl Into<String>,
        frames: [Frame; 3],
        source: impl Into<String>,
        stride: usize,
    ) -> Result<Self> {
        check_triplet(&frames)?;
        Ok(TripletRecord {
            id: id.into(),
            frames: TripletFrames::Inline(Arc::new(frames)),
            source: source.into(),
            stride,
            subset: None,
            extra: Map::new(),
        })
    }

    pub fn from_paths(
        id: impl Into<String>,
        paths: [PathBuf; 3],
        source: impl Into<String>,
        stride: usize,
    ) -> Self {
        TripletRecord {
            id: id.into(),
            frames: TripletFrames::Paths(paths),
            source: source.into(),
            stride,
            subset: None,
            extra: Map::new(),
        }
    }

    pub fn with_subset(mut self, subset: Subset) -> Self {
        self.subset = Some(subset);
        self
    }

    /// Reads (or clones) the three frames and checks they share one size.
    pub fn load(&self) -> Result<Arc<[Frame; 3]>> {
        match &self.frames {
            TripletFrames::Inline(f) => Ok(Arc::clone(f)),
            TripletFrames::Paths([a, b, c]) => {
                let frames = [Frame::read(a)?, Frame::read(b)?, Frame::read(c)?];
                check_triplet(&frames)?;
                Ok(Arc::new(frames))
            }
        }
    }

    /// Writes inline frames as `<dir>/<id>_f{0,1,2}.ppm` (or `.pgm`) and
    /// returns the record pointing at them. Path records are returned as-is.
    pub fn save_frames(&self, dir: &Path) -> Result<TripletRecord> {
        let TripletFrames::Inline(frames) = &self.frames else {
            return Ok(self.clone());
        };
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let ext = if frames[0].channels() == 3 {
            "ppm"
        } else {
            "pgm"
        };
        let paths: [PathBuf; 3] =
            std::array::from_fn(|i| dir.join(format!("{}_f{i}.{ext}", self.id)));
        for (f, p) in frames.iter().zip(&paths) {
            f.write(p)?;
        }
        Ok(TripletRecord {
            frames: TripletFrames::Paths(paths),
            ..self.clone()
        })
    }
}

fn check_triplet(frames: &[Frame; 3]) -> Result<()> {
    if !(frames[0].same_dims(&frames[1]) && frames[0].same_dims(&frames[2])) {
        return Err(Error::InvalidArgument(format!(
            "triplet frames differ in size: {:?} {:?} {:?}",
            frames[0], frames[1], frames[2]
        )));
    }
    Ok(())
}

pub const LEVELS: std::ops::RangeInclusive<u8> = 1..=4;

/// Level 1 (hardest) to 4 (easiest) mapped linearly onto [0, 1].
pub fn score_for_level(level: u8) -> Result<f64> {
    if !LEVELS.contains(&level) {
        return Err(Error::InvalidArgument(format!(
            "difficulty level must be 1..=4, got {level}"
        )));
    }
    Ok(f64::from(level - 1) / 3.0)
}

/// Inverse of [`score_for_level`]; only the four exact scores are accepted.
pub fn level_for_score(score: f64) -> Result<u8> {
    LEVELS
        .into_iter()
        .find(|&l| score_for_level(l).map(|s| s == score).unwrap_or(false))
        .ok_or_else(|| {
            Error::InvalidArgument(format!("{score} is not one of the four level scores"))
        })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DifficultyRecord {
    pub triplet: TripletRecord,
    pub level: u8,
    /// `(level − 1) / 3`; higher is easier.
    pub score: f64,
    pub quality_psnr: f64,
}

impl DifficultyRecord {
    pub fn new(triplet: TripletRecord, level: u8, quality_psnr: f64) -> Result<Self> {
        Ok(DifficultyRecord {
            triplet,
            level,
            score: score_for_level(level)?,
            quality_psnr,
        })
    }
}
