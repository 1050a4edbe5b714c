mod common;

use proptest::prelude::*;
use rand::Rng;

use vfi_dpa::backends::BackendKind;
use vfi_dpa::frame::Frame;
use vfi_dpa::metrics::{
    build_report, format_cell, mse, psnr, psnr_from_mse, ssim, ssim_planes, summarize,
    tolerance_accuracy, Subset, PSNR_CAP_DB,
};
use vfi_dpa::router::RoutingDecision;

fn noise_frame(w: usize, h: usize, c: usize, seed: u64) -> Frame {
    let mut r = common::rng(seed);
    Frame::new(w, h, c, (0..w * h * c).map(|_| r.random()).collect()).unwrap()
}

/// `frame` with `amount` of uniform noise added, clamped to 0..=255.
fn perturbed(frame: &Frame, amount: i32, seed: u64) -> Frame {
    let mut r = common::rng(seed);
    let data = frame
        .data()
        .iter()
        .map(|&v| (i32::from(v) + r.random_range(-amount..=amount)).clamp(0, 255) as u8)
        .collect();
    Frame::new(frame.width(), frame.height(), frame.channels(), data).unwrap()
}

/// Direct per-window SSIM: for every valid top-left corner, weighted means,
/// variances and covariance are taken over the full 11×11 window in two
/// passes, with no separable filtering or E[x²] - μ² shortcut.
fn naive_ssim(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    const N: usize = 11;
    let g: Vec<f64> = (0..N)
        .map(|i| {
            let d = i as f64 - 5.0;
            (-d * d / 4.5).exp()
        })
        .collect();
    let norm: f64 = g.iter().sum::<f64>().powi(2);
    let weight = |i: usize, j: usize| g[i] * g[j] / norm;
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut total = 0.0;
    let mut count = 0;
    for y0 in 0..=h - N {
        for x0 in 0..=w - N {
            let at = |p: &[f64], i: usize, j: usize| p[(y0 + i) * w + x0 + j];
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..N {
                for j in 0..N {
                    ma += weight(i, j) * at(a, i, j);
                    mb += weight(i, j) * at(b, i, j);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..N {
                for j in 0..N {
                    let (da, db) = (at(a, i, j) - ma, at(b, i, j) - mb);
                    va += weight(i, j) * da * da;
                    vb += weight(i, j) * db * db;
                    cov += weight(i, j) * da * db;
                }
            }
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

fn rec601(f: &Frame) -> Vec<f64> {
    f.data()
        .chunks(3)
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect()
}

#[test]
fn unit_difference_psnr() {
    let a = Frame::filled(17, 9, 3, 200);
    let b = Frame::filled(17, 9, 3, 201);
    let p = psnr(&a, &b).unwrap();
    assert!((p - 10.0 * 65025f64.log10()).abs() < 1e-12);
    assert!((p - 48.1308).abs() < 1e-4, "{p}");
    assert_eq!(mse(&a, &b).unwrap(), 1.0);
}

#[test]
fn psnr_matches_a_direct_mse_oracle() {
    let a = noise_frame(23, 19, 3, 1);
    let b = perturbed(&a, 9, 2);
    let sq: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum();
    let m = sq / a.data().len() as f64;
    let expected = 10.0 * (255.0f64 * 255.0 / m).log10();
    assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-10);
    assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
    assert_eq!(psnr_from_mse(1e-30), PSNR_CAP_DB);
    assert!(psnr(&a, &Frame::filled(23, 19, 1, 0)).is_err());
}

#[test]
fn ssim_of_an_image_with_itself_is_one() {
    for (c, seed) in [(1, 3), (3, 4)] {
        let a = noise_frame(31, 22, c, seed);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }
    let flat = Frame::filled(11, 11, 3, 0);
    assert!((ssim(&flat, &flat).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn ssim_matches_the_direct_window_oracle() {
    let a = noise_frame(29, 21, 3, 5);
    for (amount, seed) in [(4, 6), (30, 7), (120, 8)] {
        let b = perturbed(&a, amount, seed);
        let expected = naive_ssim(&rec601(&a), &rec601(&b), 29, 21);
        let got = ssim(&a, &b).unwrap();
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }
    let gray = noise_frame(14, 30, 1, 9);
    let other = noise_frame(14, 30, 1, 10);
    let planes = |f: &Frame| f.data().iter().map(|&v| f64::from(v)).collect::<Vec<_>>();
    let (pa, pb) = (planes(&gray), planes(&other));
    let got = ssim_planes(&pa, &pb, 14, 30).unwrap();
    assert!((got - naive_ssim(&pa, &pb, 14, 30)).abs() < 1e-10);
    assert!(ssim_planes(&pa, &pb, 15, 30).is_err());
    assert!(ssim(&Frame::filled(10, 40, 1, 0), &Frame::filled(10, 40, 1, 0)).is_err());
}

#[test]
fn tolerance_accuracy_hand_example() {
    let preds = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    assert_eq!(
        tolerance_accuracy(&preds, &[1.0 / 3.0; 4], 0.25).unwrap(),
        0.25
    );
    // Strict: an error equal to the tolerance is a miss.
    assert_eq!(tolerance_accuracy(&[0.0], &[0.5], 0.5).unwrap(), 0.0);
    assert!(tolerance_accuracy(&[], &[], 0.25).is_err());
    assert!(tolerance_accuracy(&[0.1, 0.2], &[0.1], 0.25).is_err());
}

#[test]
fn table_cells_have_four_decimals() {
    assert_eq!(format_cell(40.0068, 0.9904), "40.0068/0.9904");
    assert_eq!(format_cell(40.006_849, 0.990_449), "40.0068/0.9904");
    assert_eq!(format_cell(99.0, 1.0), "99.0000/1.0000");
}

fn decision(id: &str, psnr: f64, ssim: f64, chosen: BackendKind, latency: f64) -> RoutingDecision {
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
fn report_groups_by_subset_in_motion_order() {
    let ds = [
        decision("a", 40.0, 0.9900, BackendKind::Fast, 0.01),
        decision("b", 30.0, 0.9000, BackendKind::Accurate, 0.05),
        decision("c", 40.0136, 0.9908, BackendKind::Accurate, 0.03),
        decision("d", 20.0, 0.5000, BackendKind::Accurate, 0.07),
    ];
    let tags = ["easy", "Hard", "Easy", "hard"];
    let r = build_report(&ds, &tags).unwrap();
    assert_eq!(
        r.iter().map(|s| s.subset).collect::<Vec<_>>(),
        [Subset::Easy, Subset::Hard]
    );
    assert_eq!(r[0].n, 2);
    assert_eq!(r[0].table_cell(), "40.0068/0.9904");
    assert_eq!(r[0].routed_fast_fraction, 0.5);
    assert!((r[0].latency_mean - 0.02).abs() < 1e-15);
    assert_eq!(r[1].routed_fast_fraction, 0.0);
    assert_eq!(r[1].psnr_mean, 25.0);

    let all = summarize(&ds).unwrap();
    assert_eq!(all.n, 4);
    assert_eq!(all.routed_fast_fraction, 0.25);
    assert!((all.psnr_mean - 130.0136 / 4.0).abs() < 1e-12);

    assert!(build_report(&ds, &tags[..3]).is_err());
    assert!(build_report(&ds[..1], &["Trivial"]).is_err());
    let mut blind = ds[0].clone();
    blind.psnr = None;
    assert!(summarize(&[blind]).is_err());
    assert!(summarize(&[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn psnr_is_symmetric_and_capped(w in 1usize..24, h in 1usize..24, seed in 0u64..10_000) {
        let a = noise_frame(w, h, 3, seed);
        let b = noise_frame(w, h, 3, seed + 1);
        let p = psnr(&a, &b).unwrap();
        prop_assert_eq!(p, psnr(&b, &a).unwrap());
        prop_assert!(p <= PSNR_CAP_DB && p > 0.0);
    }

    #[test]
    fn larger_errors_lower_psnr(seed in 0u64..10_000, d1 in 1u8..20, extra in 1u8..30) {
        // Values stay in 50..=200, so adding up to 50 never clamps.
        let a = perturbed(&Frame::filled(16, 16, 3, 125), 75, seed);
        let shifted = |d: u8| {
            let data = a.data().iter().map(|&v| v + d).collect();
            Frame::new(16, 16, 3, data).unwrap()
        };
        let near = psnr(&a, &shifted(d1)).unwrap();
        let far = psnr(&a, &shifted(d1 + extra)).unwrap();
        prop_assert!(far < near);
    }

    #[test]
    fn ssim_is_bounded_and_symmetric(w in 11usize..24, h in 11usize..24, seed in 0u64..10_000) {
        let a = noise_frame(w, h, 1, seed);
        let b = noise_frame(w, h, 1, seed + 1);
        let s = ssim(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert!((s - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tolerance_accuracy_is_monotone_in_tol(
        pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..40),
        t1 in 0.0f64..1.0,
        dt in 0.0f64..1.0,
    ) {
        let (p, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let a = tolerance_accuracy(&p, &g, t1).unwrap();
        let b = tolerance_accuracy(&p, &g, t1 + dt).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(a <= b);
    }
}
