mod common;

use proptest::prelude::*;

use vfi_dpa::backends::{interpolate_accurate, interpolate_fast, AccurateConfig, BackendKind};
use vfi_dpa::dataset::{annotate_all, generate_synthetic_with, SyntheticOptions, Thresholds};
use vfi_dpa::model::{DpaConfig, DpaModel};
use vfi_dpa::router::{
    choose, evaluate_pairs, parse_thresholds, route, sweep, sweep_evaluations, PairEvaluation,
    Router,
};

fn micro_model(seed: u64) -> DpaModel {
    DpaModel::init(DpaConfig::micro(), seed).unwrap()
}

fn evaluations(model: &DpaModel, count: usize) -> Vec<PairEvaluation> {
    let opts = SyntheticOptions {
        size: 48,
        ..Default::default()
    };
    let t = generate_synthetic_with(count, &[0.0, 2.0, 8.0, 16.0], 3, &opts).unwrap();
    let records = annotate_all(&t, &Thresholds::default()).unwrap();
    evaluate_pairs(&Router::new(model), &records).unwrap()
}

#[test]
fn ties_route_to_the_fast_backend() {
    assert_eq!(choose(0.5, 0.5), BackendKind::Fast);
    assert_eq!(choose(0.0, 0.0), BackendKind::Fast);
    assert_eq!(choose(0.4999, 0.5), BackendKind::Accurate);
    assert_eq!(choose(0.99, 1.0), BackendKind::Accurate);
    assert_eq!(choose(1.0, 1.0), BackendKind::Fast);
}

#[test]
fn extreme_thresholds_pick_one_backend() {
    let model = micro_model(1);
    let [f0, _, f2] = common::synthetic_suite(2, 7).unwrap()[1]
        .triplet
        .load()
        .unwrap()
        .as_ref()
        .clone();

    let fast = route(&f0, &f2, &model, 0.0, None).unwrap();
    assert_eq!(fast.decision.chosen, BackendKind::Fast);
    assert_eq!(fast.frame, interpolate_fast(&f0, &f2).unwrap());
    assert!(fast.decision.is_consistent() && !fast.decision.forced);

    let accurate = route(&f0, &f2, &model, 1.0, None).unwrap();
    assert!(accurate.decision.predicted_score < 1.0);
    assert_eq!(accurate.decision.chosen, BackendKind::Accurate);
    assert_eq!(
        accurate.frame,
        interpolate_accurate(&f0, &f2, AccurateConfig::default())
            .unwrap()
            .frame
    );
    // Scoring is part of the recorded latency.
    let d = &accurate.decision;
    assert!(d.dpa_latency > 0.0 && d.latency == d.dpa_latency + d.backend_latency);
    assert!(d.psnr.is_none());

    let forced = route(&f0, &f2, &model, 0.0, Some(BackendKind::Accurate)).unwrap();
    assert!(forced.decision.forced && forced.decision.is_consistent());
    assert_eq!(forced.frame, accurate.frame);

    assert!(route(&f0, &f2, &model, 1.5, None).is_err());
    assert!(route(&f0, &f2, &model, -0.1, None).is_err());
}

#[test]
fn routing_with_ground_truth_records_quality() {
    let model = micro_model(2);
    let f = common::synthetic_suite(1, 8).unwrap()[0]
        .triplet
        .load()
        .unwrap();
    let r = Router::new(&model)
        .route("p", &f[0], &f[2], 0.0, None, Some(&f[1]))
        .unwrap();
    assert_eq!(r.decision.pair_id, "p");
    // Magnitude 0: the blend reproduces the middle frame.
    assert_eq!(r.decision.psnr, Some(99.0));
    assert!((r.decision.ssim.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn sweep_anchors_match_the_static_baselines() {
    let model = micro_model(3);
    let evals = evaluations(&model, 8);
    let max_score = evals.iter().map(|e| e.score).fold(0.0, f64::max);
    let above = (max_score + 1e-9).min(1.0);
    assert!(above > max_score);
    let report = sweep_evaluations(&evals, &[0.0, above]).unwrap();
    let (fast, accurate) = (report.all_fast(), report.all_accurate());
    assert_eq!(fast.name, "all-fast");
    assert_eq!(accurate.name, "all-accurate");
    assert_eq!(report.dynamic().len(), 2);

    let (lo, hi) = (&report.dynamic()[0], &report.dynamic()[1]);
    assert_eq!(lo.accurate_fraction, 0.0);
    assert_eq!(hi.accurate_fraction, 1.0);
    assert_eq!(lo.overall.psnr_mean, fast.overall.psnr_mean);
    assert_eq!(lo.overall.ssim_mean, fast.overall.ssim_mean);
    assert_eq!(hi.overall.psnr_mean, accurate.overall.psnr_mean);
    assert_eq!(hi.overall.ssim_mean, accurate.overall.ssim_mean);
    // The static baselines skip the model; dynamic rows pay for it.
    assert!(lo.overall.latency_mean > fast.overall.latency_mean);
    for e in &evals {
        assert_eq!(e.decide(0.0).chosen, BackendKind::Fast);
        assert_eq!(e.decide(above).chosen, BackendKind::Accurate);
        assert_eq!(e.baseline(BackendKind::Fast).dpa_latency, 0.0);
    }
    assert_eq!(fast.subsets.iter().map(|s| s.n).sum::<usize>(), evals.len());
}

#[test]
fn accurate_fraction_grows_across_the_sweep() {
    let model = micro_model(4);
    let evals = evaluations(&model, 12);
    let ts = parse_thresholds("0:1:0.05").unwrap();
    assert_eq!(ts.len(), 21);
    let report = sweep_evaluations(&evals, &ts).unwrap();
    let fractions: Vec<f64> = report
        .dynamic()
        .iter()
        .map(|r| r.accurate_fraction)
        .collect();
    assert!(fractions.windows(2).all(|w| w[0] <= w[1]), "{fractions:?}");
    for (row, &t) in report.dynamic().iter().zip(&ts) {
        assert_eq!(row.threshold, Some(t));
        let expected = evals.iter().filter(|e| e.score < t).count() as f64 / evals.len() as f64;
        assert_eq!(row.accurate_fraction, expected);
    }
}

#[test]
fn sweep_validates_its_inputs() {
    let model = micro_model(5);
    let evals = evaluations(&model, 2);
    assert!(sweep_evaluations(&evals, &[]).is_err());
    assert!(sweep_evaluations(&evals, &[0.5, 0.2]).is_err());
    assert!(sweep_evaluations(&evals, &[1.2]).is_err());
    assert!(sweep_evaluations(&[], &[0.5]).is_err());
    assert!(sweep(&Router::new(&model), &[], &[0.5]).is_err());
    for bad in ["", "0:1", "1:0:0.1", "0:1:-0.1", "0.1,x", "0.9,0.1"] {
        assert!(parse_thresholds(bad).is_err(), "{bad}");
    }
}

#[test]
fn sweep_over_records_matches_precomputed_evaluations() {
    let model = micro_model(6);
    let opts = SyntheticOptions {
        size: 32,
        ..Default::default()
    };
    let t = generate_synthetic_with(4, &[0.0, 8.0], 9, &opts).unwrap();
    let records = annotate_all(&t, &Thresholds::default()).unwrap();
    let router = Router::new(&model);
    let a = sweep(&router, &records, &[0.2, 0.7]).unwrap();
    let b = sweep_evaluations(&evaluate_pairs(&router, &records).unwrap(), &[0.2, 0.7]).unwrap();
    // Latencies differ run to run; everything else is deterministic.
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.accurate_fraction, y.accurate_fraction);
        assert_eq!(x.overall.psnr_mean, y.overall.psnr_mean);
        assert_eq!(x.overall.ssim_mean, y.overall.ssim_mean);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decisions_follow_the_rule(score in 0.0f64..=1.0, t in 0.0f64..=1.0) {
        let chosen = choose(score, t);
        prop_assert_eq!(chosen == BackendKind::Fast, score >= t);
    }

    #[test]
    fn raising_the_threshold_never_frees_a_pair(score in 0.0f64..=1.0, t in 0.0f64..1.0, dt in 0.0f64..1.0) {
        let hi = (t + dt).min(1.0);
        if choose(score, t) == BackendKind::Accurate {
            prop_assert_eq!(choose(score, hi), BackendKind::Accurate);
        }
    }
}
