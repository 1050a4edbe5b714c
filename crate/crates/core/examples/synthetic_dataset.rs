//! Generates a synthetic suite, labels each triplet by how well blending
//! reconstructs its middle frame, and writes a manifest.
//!
//! ```text
//! cargo run --example synthetic_dataset -- /tmp/suite
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use vfi_dpa::dataset::{
    annotate_all, generate_synthetic_with, read_manifest, write_manifest, DifficultyRecord,
    SyntheticOptions, Thresholds,
};

fn main() -> vfi_dpa::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("vfi-dpa-suite"));
    let opts = SyntheticOptions {
        size: 128,
        ..Default::default()
    };
    let triplets = generate_synthetic_with(40, &[0.0, 2.0, 8.0, 16.0], 2024, &opts)?;
    let records = annotate_all(&triplets, &Thresholds::default())?;

    let mut levels: BTreeMap<String, [usize; 4]> = BTreeMap::new();
    for r in &records {
        let tag = r.triplet.subset.map(|s| s.to_string()).unwrap_or_default();
        levels.entry(tag).or_default()[r.level as usize - 1] += 1;
    }
    for (subset, hist) in &levels {
        println!("{subset:>8}: levels 1..4 = {hist:?}");
    }

    // Manifests reference frames on disk, so save them first.
    let saved: Vec<DifficultyRecord> = records
        .into_iter()
        .map(|r| {
            Ok(DifficultyRecord {
                triplet: r.triplet.save_frames(&dir.join("frames"))?,
                ..r
            })
        })
        .collect::<vfi_dpa::Result<_>>()?;
    let manifest = dir.join("manifest.jsonl");
    write_manifest(&saved, &manifest)?;
    assert_eq!(read_manifest(&manifest)?, saved);
    println!("wrote {} records to {}", saved.len(), manifest.display());
    Ok(())
}
