//! Frame triplets, automatic difficulty labels, synthetic motion suites and
//! JSONL manifests.

mod annotate;
mod extract;
mod manifest;
mod record;
mod synthetic;

pub use annotate::{annotate, annotate_all, level_for_psnr, Thresholds};
pub use extract::{extract_triplets, Extraction, SkippedFrame};
pub use manifest::{read_manifest, write_manifest};
pub use record::{
    level_for_score, score_for_level, DifficultyRecord, TripletFrames, TripletRecord, LEVELS,
};
pub use synthetic::{
    generate_synthetic, generate_synthetic_with, subset_for_magnitude_index, SyntheticOptions,
};
