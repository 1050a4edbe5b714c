use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backends::BackendKind;
use crate::error::{Error, Result};
use crate::router::RoutingDecision;

/// Motion-magnitude subsets, from smallest to largest motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subset {
    Easy,
    Medium,
    Hard,
    Extreme,
}

impl Subset {
    pub const ALL: [Subset; 4] = [Subset::Easy, Subset::Medium, Subset::Hard, Subset::Extreme];

    pub fn as_str(&self) -> &'static str {
        match self {
            Subset::Easy => "Easy",
            Subset::Medium => "Medium",
            Subset::Hard => "Hard",
            Subset::Extreme => "Extreme",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subset::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown subset tag `{s}`")))
    }
}

/// Per-subset aggregate of routing decisions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetReport {
    pub subset: Subset,
    pub psnr_mean: f64,
    pub ssim_mean: f64,
    pub routed_fast_fraction: f64,
    pub latency_mean: f64,
    pub n: usize,
}

impl SubsetReport {
    /// `PSNR/SSIM` with four decimals each, e.g. `40.0068/0.9904`.
    pub fn table_cell(&self) -> String {
        format_cell(self.psnr_mean, self.ssim_mean)
    }
}

pub fn format_cell(psnr: f64, ssim: f64) -> String {
    format!("{psnr:.4}/{ssim:.4}")
}

/// Aggregate over every decision regardless of subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub psnr_mean: f64,
    pub ssim_mean: f64,
    pub routed_fast_fraction: f64,
    pub latency_mean: f64,
    pub n: usize,
}

struct Acc {
    psnr: f64,
    ssim: f64,
    fast: usize,
    latency: f64,
    n: usize,
}

impl Acc {
    fn new() -> Self {
        Acc {
            psnr: 0.0,
            ssim: 0.0,
            fast: 0,
            latency: 0.0,
            n: 0,
        }
    }

    fn push(&mut self, d: &RoutingDecision) -> Result<()> {
        let (Some(p), Some(s)) = (d.psnr, d.ssim) else {
            return Err(Error::InvalidArgument(format!(
                "decision `{}` has no quality metrics (no ground-truth middle frame)",
                d.pair_id
            )));
        };
        self.psnr += p;
        self.ssim += s;
        self.fast += usize::from(d.chosen == BackendKind::Fast);
        self.latency += d.latency;
        self.n += 1;
        Ok(())
    }

    fn mean(&self, v: f64) -> f64 {
        v / self.n as f64
    }
}

/// Groups decisions by subset tag (parallel to `decisions`) and averages
/// each group. Subsets without decisions are omitted; output follows
/// Easy → Extreme order.
pub fn build_report<S: AsRef<str>>(
    decisions: &[RoutingDecision],
    subset_tags: &[S],
) -> Result<Vec<SubsetReport>> {
    if decisions.len() != subset_tags.len() {
        return Err(Error::InvalidArgument(format!(
            "{} decisions but {} subset tags",
            decisions.len(),
            subset_tags.len()
        )));
    }
    let mut accs: Vec<Acc> = (0..4).map(|_| Acc::new()).collect();
    for (d, tag) in decisions.iter().zip(subset_tags) {
        let subset: Subset = tag.as_ref().parse()?;
        accs[subset as usize].push(d)?;
    }
    Ok(Subset::ALL
        .into_iter()
        .zip(&accs)
        .filter(|(_, a)| a.n > 0)
        .map(|(subset, a)| SubsetReport {
            subset,
            psnr_mean: a.mean(a.psnr),
            ssim_mean: a.mean(a.ssim),
            routed_fast_fraction: a.fast as f64 / a.n as f64,
            latency_mean: a.mean(a.latency),
            n: a.n,
        })
        .collect())
}

pub fn summarize(decisions: &[RoutingDecision]) -> Result<Summary> {
    if decisions.is_empty() {
        return Err(Error::InvalidArgument("no decisions to summarize".into()));
    }
    let mut a = Acc::new();
    for d in decisions {
        a.push(d)?;
    }
    Ok(Summary {
        psnr_mean: a.mean(a.psnr),
        ssim_mean: a.mean(a.ssim),
        routed_fast_fraction: a.fast as f64 / a.n as f64,
        latency_mean: a.mean(a.latency),
        n: a.n,
    })
}

/// Reports as a JSON array of `{subset, psnr_mean, ssim_mean,
/// routed_fast_fraction, latency_mean, n}` objects.
pub fn reports_to_json(reports: &[SubsetReport]) -> serde_json::Value {
    serde_json::to_value(reports).expect("reports serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decision(
        id: &str,
        psnr: f64,
        ssim: f64,
        chosen: BackendKind,
        latency: f64,
    ) -> RoutingDecision {
        RoutingDecision {
            pair_id: id.into(),
            predicted_score: 0.5,
            threshold: 0.5,
            chosen,
            forced: false,
            psnr: Some(psnr),
            ssim: Some(ssim),
            latency,
            dpa_latency: 0.0,
            backend_latency: latency,
            output: None,
        }
    }

    #[test]
    fn single_decision_formats_like_a_table_cell() {
        let d = [decision("a", 40.0068, 0.9904, BackendKind::Fast, 0.016)];
        let r = build_report(&d, &["Easy"]).unwrap();
        assert_eq!(r[0].table_cell(), "40.0068/0.9904");
        assert_eq!(r[0].routed_fast_fraction, 1.0);
    }

    #[test]
    fn grouping_matches_hand_grouping() {
        let ds = [
            decision("0", 30.0, 0.90, BackendKind::Fast, 1.0),
            decision("1", 20.0, 0.70, BackendKind::Accurate, 3.0),
            decision("2", 40.0, 0.95, BackendKind::Fast, 1.0),
            decision("3", 25.0, 0.80, BackendKind::Accurate, 5.0),
            decision("4", 35.0, 0.85, BackendKind::Fast, 2.0),
            decision("5", 10.0, 0.50, BackendKind::Accurate, 4.0),
        ];
        let tags = ["Easy", "Hard", "Easy", "Hard", "Medium", "Extreme"];
        let r = build_report(&ds, &tags).unwrap();
        let subsets: Vec<_> = r.iter().map(|s| s.subset).collect();
        assert_eq!(
            subsets,
            vec![Subset::Easy, Subset::Medium, Subset::Hard, Subset::Extreme]
        );
        // Easy = {0, 2}, Medium = {4}, Hard = {1, 3}, Extreme = {5}
        assert_eq!(r[0].psnr_mean, 35.0);
        assert_eq!(r[0].n, 2);
        assert_eq!(r[1].latency_mean, 2.0);
        assert_eq!(r[2].psnr_mean, 22.5);
        assert_eq!(r[2].routed_fast_fraction, 0.0);
        assert_eq!(r[3].ssim_mean, 0.5);
    }

    #[test]
    fn unknown_tag_is_rejected() {
        let d = [decision("a", 1.0, 1.0, BackendKind::Fast, 1.0)];
        assert!(build_report(&d, &["Impossible"]).is_err());
    }

    #[test]
    fn json_schema_keys() {
        let d = [decision("a", 1.0, 1.0, BackendKind::Fast, 1.0)];
        let v = reports_to_json(&build_report(&d, &["Hard"]).unwrap());
        let obj = v[0].as_object().unwrap();
        let keys: Vec<_> = obj.keys().map(String::as_str).collect();
        assert_eq!(keys.len(), 6);
        for k in [
            "subset",
            "psnr_mean",
            "ssim_mean",
            "routed_fast_fraction",
            "latency_mean",
            "n",
        ] {
            assert!(obj.contains_key(k), "{k}");
        }
        assert_eq!(obj["subset"], "Hard");
    }
}
