use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::{AnnotateArgs, AssessArgs, Cli, Command, InterpolateArgs, SweepArgs, TrainArgs};
use crate::backends::BackendKind;
use crate::dataset::{
    annotate_all, extract_triplets, generate_synthetic_with, read_manifest, write_manifest,
    DifficultyRecord, SyntheticOptions, Thresholds,
};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::metrics::format_cell;
use crate::model::DpaConfig;
use crate::router::{parse_thresholds, sweep, Router, SweepReport};
use crate::seed;
use crate::training::{
    load_checkpoint, resume, save_checkpoint, train, Checkpoint, TrainFile, TrainHyper,
};

pub fn execute(cli: &Cli) -> Result<Value> {
    let root = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Annotate(a) => annotate(a, root),
        Command::Train(a) => train_cmd(a, cli.seed),
        Command::Assess(a) => assess(a),
        Command::Interpolate(a) => interpolate(a),
        Command::Sweep(a) => sweep_cmd(a),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn default_frames_dir(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "manifest".into());
    out.with_file_name(format!("{stem}_frames"))
}

fn annotate(a: &AnnotateArgs, root: u64) -> Result<Value> {
    let thresholds = match a.thresholds.as_slice() {
        &[t4, t3, t2] => Thresholds::new([t4, t3, t2])?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "expected three thresholds, got {other:?}"
            )))
        }
    };
    log::info!("resolved config: {:?} seed={root}", a);
    let mut skipped = Vec::new();
    let records: Vec<DifficultyRecord> = if let Some(dir) = &a.frames {
        let ex = extract_triplets(dir, a.stride, a.sliding)?;
        skipped = ex
            .skipped
            .iter()
            .map(|s| json!({"path": s.path, "reason": s.reason}))
            .collect();
        if ex.triplets.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} yields no triplets at stride {}",
                dir.display(),
                a.stride
            )));
        }
        annotate_all(&ex.triplets, &thresholds)?
    } else {
        let count = a.synthetic.unwrap_or(0);
        let magnitudes = a.magnitudes.clone().unwrap_or_default();
        if count == 0 {
            return Err(Error::InvalidArgument(
                "--synthetic must be at least 1".into(),
            ));
        }
        let opts = SyntheticOptions {
            size: a.size,
            ..Default::default()
        };
        let triplets =
            generate_synthetic_with(count, &magnitudes, seed::sub_seed(root, "dataset"), &opts)?;
        let labelled = annotate_all(&triplets, &thresholds)?;
        let dir = a
            .frames_out
            .clone()
            .unwrap_or_else(|| default_frames_dir(&a.out));
        labelled
            .into_iter()
            .map(|r| {
                Ok(DifficultyRecord {
                    triplet: r.triplet.save_frames(&dir)?,
                    ..r
                })
            })
            .collect::<Result<_>>()?
    };
    write_manifest(&records, &a.out)?;

    let mut levels: BTreeMap<String, usize> = (1..=4).map(|l| (l.to_string(), 0)).collect();
    let mut subsets: BTreeMap<String, usize> = BTreeMap::new();
    for r in &records {
        *levels.entry(r.level.to_string()).or_default() += 1;
        if let Some(s) = r.triplet.subset {
            *subsets.entry(s.to_string()).or_default() += 1;
        }
    }
    for (l, n) in &levels {
        log::info!(
            "level {l}: {n:>5} {}",
            "#".repeat((*n * 40).div_ceil(records.len().max(1)))
        );
    }
    Ok(json!({
        "manifest": a.out,
        "records": records.len(),
        "levels": levels,
        "subsets": subsets,
        "skipped": skipped,
    }))
}

fn train_cmd(a: &TrainArgs, seed_flag: Option<u64>) -> Result<Value> {
    let file = a
        .config
        .as_ref()
        .map(TrainFile::load)
        .transpose()?
        .unwrap_or_default();
    let mut hyper = TrainHyper::default();
    file.apply_hyper(&mut hyper);
    if let Some(s) = seed_flag {
        hyper.seed = s;
    }
    if let Some(v) = a.steps {
        hyper.steps = v;
    }
    if let Some(v) = a.lr {
        hyper.lr = v;
    }
    if let Some(v) = a.lambda {
        hyper.lambda = v;
    }
    if let Some(v) = a.batch {
        hyper.batch = v;
    }
    hyper.validate()?;
    let records = read_manifest(&a.manifest)?;
    if records.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} has no records",
            a.manifest.display()
        )));
    }
    let ckpt = match &a.resume {
        Some(path) => {
            let prev = load_checkpoint(path)?;
            log::info!(
                "resolved config: resume from step {} with {}",
                prev.meta.step,
                serde_json::to_string(&hyper).expect("serializes")
            );
            resume(prev, &records, &hyper)?
        }
        None => {
            let mut cfg = DpaConfig::default();
            file.apply_model(&mut cfg);
            cfg.validate()?;
            log::info!(
                "resolved config: {} model {}",
                serde_json::to_string(&hyper).expect("serializes"),
                serde_json::to_string(&cfg).expect("serializes")
            );
            train(&records, &cfg, &hyper)?
        }
    };
    save_checkpoint(&ckpt, &a.out)?;
    let run = &ckpt.meta.loss_history[ckpt.meta.loss_history.len().saturating_sub(hyper.steps)..];
    let first = run.first().map(|l| l.total);
    let last = run.last().map(|l| l.total);
    if let (Some(f), Some(l)) = (first, last) {
        log::info!("loss {f:.5} -> {l:.5} over {} steps", hyper.steps);
    }
    Ok(json!({
        "checkpoint": a.out,
        "step": ckpt.meta.step,
        "steps_run": hyper.steps,
        "initial_loss": first,
        "final_loss": last,
        "parameters": ckpt.model.parameter_count(),
    }))
}

fn load_model(path: &Path) -> Result<Checkpoint> {
    let c = load_checkpoint(path)?;
    log::info!(
        "model {} (step {}, {} parameters)",
        path.display(),
        c.meta.step,
        c.model.parameter_count()
    );
    Ok(c)
}

fn assess(a: &AssessArgs) -> Result<Value> {
    let ckpt = load_model(&a.model)?;
    let f0 = Frame::read(&a.f0)?;
    let f1 = Frame::read(&a.f1)?;
    let s = ckpt.model.score_frames(&f0, &f1)?;
    log::info!("score {:.4}", s.score);
    Ok(json!({
        "score": s.score,
        "score_4dp": format!("{:.4}", s.score),
        "attention_mean": s.attention_mean,
    }))
}

fn interpolate(a: &InterpolateArgs) -> Result<Value> {
    let force = a
        .force
        .as_deref()
        .map(str::parse::<BackendKind>)
        .transpose()?;
    let ckpt = load_model(&a.model)?;
    let f0 = Frame::read(&a.f0)?;
    let f1 = Frame::read(&a.f1)?;
    let gt = a.ground_truth.as_ref().map(Frame::read).transpose()?;
    let id =
        a.f0.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    let routed = Router::new(&ckpt.model).route(&id, &f0, &f1, a.threshold, force, gt.as_ref())?;
    routed.frame.write(&a.out)?;
    let mut d = routed.decision;
    d.output = Some(a.out.clone());
    log::info!(
        "routed to {} (score {:.4}, threshold {}{})",
        d.chosen,
        d.predicted_score,
        d.threshold,
        if d.forced { ", forced" } else { "" }
    );
    Ok(to_json(&d))
}

fn log_table(report: &SweepReport) {
    for row in &report.rows {
        let cells: Vec<String> = row
            .subsets
            .iter()
            .map(|s| format!("{} {}", s.subset, format_cell(s.psnr_mean, s.ssim_mean)))
            .collect();
        let name = match row.threshold {
            Some(t) => format!("t={t:.3}"),
            None => row.name.clone(),
        };
        log::info!(
            "{name:>13}  accurate {:>5.1}%  {}  latency {:.4}s  {}",
            100.0 * row.accurate_fraction,
            format_cell(row.overall.psnr_mean, row.overall.ssim_mean),
            row.overall.latency_mean,
            cells.join("  ")
        );
    }
}

fn sweep_cmd(a: &SweepArgs) -> Result<Value> {
    let thresholds = parse_thresholds(&a.thresholds)?;
    let ckpt = load_model(&a.model)?;
    let records = read_manifest(&a.manifest)?;
    let report = sweep(&Router::new(&ckpt.model), &records, &thresholds)?;
    log_table(&report);
    let value = to_json(&report);
    let text = serde_json::to_string_pretty(&value).expect("serializes");
    std::fs::write(&a.report, text).map_err(|e| Error::io(&a.report, e))?;
    Ok(value)
}
