use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::route::{choose, validate_threshold, Router, RoutingDecision};
use crate::backends::{measure_latency, BackendKind};
use crate::dataset::DifficultyRecord;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::metrics::{build_report, psnr, ssim, summarize, Subset, SubsetReport, Summary};

/// One backend's output for a pair, scored against the true middle frame.
#[derive(Clone, Debug)]
pub struct BackendRun {
    pub frame: Frame,
    pub latency: f64,
    pub psnr: f64,
    pub ssim: f64,
}

/// Everything routing needs for one pair, computed once: the model score
/// and both backends' outputs. Routing at any threshold only selects.
#[derive(Clone, Debug)]
pub struct PairEvaluation {
    pub id: String,
    pub subset: Option<Subset>,
    pub score: f64,
    pub dpa_latency: f64,
    pub fast: BackendRun,
    pub accurate: BackendRun,
}

impl PairEvaluation {
    pub fn run(&self, kind: BackendKind) -> &BackendRun {
        match kind {
            BackendKind::Fast => &self.fast,
            BackendKind::Accurate => &self.accurate,
        }
    }

    /// Routed decision at `threshold`; latency includes scoring.
    pub fn decide(&self, threshold: f64) -> RoutingDecision {
        let chosen = choose(self.score, threshold);
        self.decision(chosen, threshold, false, self.dpa_latency)
    }

    /// Static baseline: always `kind`, without running the model.
    pub fn baseline(&self, kind: BackendKind) -> RoutingDecision {
        let t = if kind == BackendKind::Fast { 0.0 } else { 1.0 };
        self.decision(kind, t, true, 0.0)
    }

    fn decision(
        &self,
        chosen: BackendKind,
        threshold: f64,
        forced: bool,
        dpa_latency: f64,
    ) -> RoutingDecision {
        let run = self.run(chosen);
        RoutingDecision {
            pair_id: self.id.clone(),
            predicted_score: self.score,
            threshold,
            chosen,
            forced,
            psnr: Some(run.psnr),
            ssim: Some(run.ssim),
            latency: dpa_latency + run.latency,
            dpa_latency,
            backend_latency: run.latency,
            output: None,
        }
    }
}

/// Scores every `(f0, f2)` pair and runs both backends on it, using `f1` as
/// ground truth. Runs on the current rayon pool; order matches `records`.
pub fn evaluate_pairs(
    router: &Router<'_>,
    records: &[DifficultyRecord],
) -> Result<Vec<PairEvaluation>> {
    records
        .par_iter()
        .map(|r| {
            let f = r.triplet.load()?;
            let (score, dpa_latency) = router.score(&f[0], &f[2])?;
            let run = |kind| -> Result<BackendRun> {
                let (frame, latency) = measure_latency(router.backend(kind), &f[0], &f[2])?;
                Ok(BackendRun {
                    psnr: psnr(&frame, &f[1])?,
                    ssim: ssim(&frame, &f[1])?,
                    frame,
                    latency,
                })
            };
            Ok(PairEvaluation {
                id: r.triplet.id.clone(),
                subset: r.triplet.subset,
                score,
                dpa_latency,
                fast: run(BackendKind::Fast)?,
                accurate: run(BackendKind::Accurate)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRow {
    /// `all-fast`, `all-accurate` or `dynamic`.
    pub name: String,
    pub threshold: Option<f64>,
    pub accurate_fraction: f64,
    pub overall: Summary,
    /// Only records carrying a subset tag contribute here.
    pub subsets: Vec<SubsetReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepReport {
    /// Two anchors (`all-fast`, `all-accurate`) followed by one row per
    /// threshold in input order.
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn all_fast(&self) -> &SweepRow {
        &self.rows[0]
    }

    pub fn all_accurate(&self) -> &SweepRow {
        &self.rows[1]
    }

    pub fn dynamic(&self) -> &[SweepRow] {
        &self.rows[2..]
    }
}

fn row(
    name: &str,
    threshold: Option<f64>,
    evals: &[PairEvaluation],
    decisions: Vec<RoutingDecision>,
) -> Result<SweepRow> {
    let accurate = decisions
        .iter()
        .filter(|d| d.chosen == BackendKind::Accurate)
        .count();
    let (tagged, tags): (Vec<RoutingDecision>, Vec<&str>) = decisions
        .iter()
        .zip(evals)
        .filter_map(|(d, e)| e.subset.map(|s| (d.clone(), s.as_str())))
        .unzip();
    Ok(SweepRow {
        name: name.to_string(),
        threshold,
        accurate_fraction: accurate as f64 / decisions.len() as f64,
        overall: summarize(&decisions)?,
        subsets: build_report(&tagged, &tags)?,
    })
}

/// Builds the report from precomputed evaluations. Thresholds must be
/// ascending and inside [0, 1].
pub fn sweep_evaluations(evals: &[PairEvaluation], thresholds: &[f64]) -> Result<SweepReport> {
    if evals.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot sweep an empty manifest".into(),
        ));
    }
    validate_thresholds(thresholds)?;
    let mut rows = vec![
        row(
            "all-fast",
            None,
            evals,
            evals
                .iter()
                .map(|e| e.baseline(BackendKind::Fast))
                .collect(),
        )?,
        row(
            "all-accurate",
            None,
            evals,
            evals
                .iter()
                .map(|e| e.baseline(BackendKind::Accurate))
                .collect(),
        )?,
    ];
    for &t in thresholds {
        rows.push(row(
            "dynamic",
            Some(t),
            evals,
            evals.iter().map(|e| e.decide(t)).collect(),
        )?);
    }
    Ok(SweepReport { rows })
}

/// Routes every record at every threshold and reports each against the
/// all-fast and all-accurate baselines.
pub fn sweep(
    router: &Router<'_>,
    records: &[DifficultyRecord],
    thresholds: &[f64],
) -> Result<SweepReport> {
    if records.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot sweep an empty manifest".into(),
        ));
    }
    validate_thresholds(thresholds)?;
    sweep_evaluations(&evaluate_pairs(router, records)?, thresholds)
}

fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::InvalidArgument("no thresholds given".into()));
    }
    for &t in thresholds {
        validate_threshold(t)?;
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(format!(
            "thresholds must be ascending, got {thresholds:?}"
        )));
    }
    Ok(())
}

/// Parses `start:stop:step` or a comma-separated list.
///
/// A range yields `start + i·step` for every value below `stop`, then `stop`
/// itself, so `0:1:0.05` gives 21 values ending in exactly 1.
pub fn parse_thresholds(spec: &str) -> Result<Vec<f64>> {
    let bad = |why: String| Error::InvalidArgument(format!("threshold spec `{spec}`: {why}"));
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("`{s}`: {e}")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [one] => one.split(',').map(num).collect::<Result<Vec<_>>>()?,
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || !(stop >= start) || !step.is_finite() {
                return Err(bad("need step > 0 and stop >= start".into()));
            }
            let n = ((stop - start) / step - 1e-9).ceil().max(0.0) as usize;
            let mut v: Vec<f64> = (0..n).map(|i| start + i as f64 * step).collect();
            v.push(stop);
            v
        }
        _ => {
            return Err(bad(
                "expected start:stop:step or a comma-separated list".into()
            ))
        }
    };
    validate_thresholds(&values)?;
    Ok(values)
}
