use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::record::TripletRecord;
use crate::error::{Error, Result};
use crate::frame::Frame;

/// A file skipped during extraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkippedFrame {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub triplets: Vec<TripletRecord>,
    pub skipped: Vec<SkippedFrame>,
}

/// Triplets `(i, i+stride, i+2·stride)` over the lexicographically sorted
/// readable frames of `dir`. Sliding windows advance by one frame;
/// otherwise windows are disjoint and advance by `2·stride + 1`.
///
/// Frames that fail to decode, or whose size differs from the most common
/// size in the directory, are skipped and reported.
pub fn extract_triplets(dir: impl AsRef<Path>, stride: usize, sliding: bool) -> Result<Extraction> {
    let dir = dir.as_ref();
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();

    let mut skipped = Vec::new();
    let mut frames: Vec<(PathBuf, (usize, usize, usize))> = Vec::new();
    for p in paths {
        match Frame::read(&p) {
            Ok(f) => frames.push((p, f.dims())),
            Err(e) => skipped.push(SkippedFrame {
                path: p,
                reason: e.to_string(),
            }),
        }
    }

    // Most common size; ties go to the size seen first.
    let mut counts: BTreeMap<(usize, usize, usize), (usize, usize)> = BTreeMap::new();
    for (i, (_, d)) in frames.iter().enumerate() {
        counts.entry(*d).or_insert((0, i)).0 += 1;
    }
    let majority = counts
        .iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(d, _)| *d);
    let mut valid = Vec::new();
    for (p, d) in frames {
        if Some(d) == majority {
            valid.push(p);
        } else {
            let m = majority.expect("a size exists when frames do");
            skipped.push(SkippedFrame {
                path: p,
                reason: format!(
                    "size {}x{}x{} differs from the directory's {}x{}x{}",
                    d.0, d.1, d.2, m.0, m.1, m.2
                ),
            });
        }
    }
    for s in &skipped {
        log::warn!("skipping {}: {}", s.path.display(), s.reason);
    }

    let source = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let advance = if sliding { 1 } else { 2 * stride + 1 };
    let mut triplets = Vec::new();
    let mut i = 0;
    while i + 2 * stride < valid.len() {
        let idx = [i, i + stride, i + 2 * stride];
        let id = format!("{source}-{:06}", i);
        triplets.push(TripletRecord::from_paths(
            id,
            idx.map(|k| valid[k].clone()),
            source.clone(),
            stride,
        ));
        i += advance;
    }
    Ok(Extraction { triplets, skipped })
}
