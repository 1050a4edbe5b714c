use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::record::{
    level_for_score, score_for_level, DifficultyRecord, TripletFrames, TripletRecord,
};
use crate::error::{Error, Result};
use crate::metrics::Subset;

#[derive(Serialize, Deserialize)]
struct Line {
    id: String,
    frames: [PathBuf; 3],
    source: String,
    stride: usize,
    level: u8,
    score: f64,
    quality_psnr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subset: Option<Subset>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

fn relative_to(path: &Path, base: &Path) -> PathBuf {
    path.strip_prefix(base)
        .map(Path::to_path_buf)
        .unwrap_or_else(|_| path.to_path_buf())
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// One JSON object per line, sorted by record id. Frame paths under the
/// manifest's directory are stored relative to it. Inline frames must be
/// saved first (see [`TripletRecord::save_frames`]).
pub fn write_manifest(records: &[DifficultyRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let base = base_dir(path);
    let mut sorted: Vec<&DifficultyRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.triplet.id.cmp(&b.triplet.id));
    let mut lines = Vec::with_capacity(sorted.len());
    for r in sorted {
        let TripletFrames::Paths(paths) = &r.triplet.frames else {
            return Err(Error::InvalidArgument(format!(
                "record `{}` holds inline frames; save them before writing a manifest",
                r.triplet.id
            )));
        };
        let line = Line {
            id: r.triplet.id.clone(),
            frames: std::array::from_fn(|i| relative_to(&paths[i], &base)),
            source: r.triplet.source.clone(),
            stride: r.triplet.stride,
            level: r.level,
            score: r.score,
            quality_psnr: r.quality_psnr,
            subset: r.triplet.subset,
            extra: r.triplet.extra.clone(),
        };
        lines
            .push(serde_json::to_string(&line).map_err(|e| Error::InvalidArgument(e.to_string()))?);
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in lines {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parses a manifest. Relative frame paths resolve against the manifest's
/// directory. Blank lines are skipped; errors carry 1-based line numbers.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<DifficultyRecord>> {
    let path = path.as_ref();
    let base = base_dir(path);
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::Manifest { line: n, reason };
        let l: Line = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let expected = score_for_level(l.level).map_err(|e| bad(e.to_string()))?;
        if level_for_score(l.score).ok() != Some(l.level) {
            return Err(bad(format!(
                "score {} does not match level {} (expected {expected})",
                l.score, l.level
            )));
        }
        let triplet = TripletRecord {
            id: l.id,
            frames: TripletFrames::Paths(l.frames.map(|p| base.join(p))),
            source: l.source,
            stride: l.stride,
            subset: l.subset,
            extra: l.extra,
        };
        out.push(DifficultyRecord {
            triplet,
            level: l.level,
            score: l.score,
            quality_psnr: l.quality_psnr,
        });
    }
    Ok(out)
}
