mod common;

use std::sync::Arc;

use proptest::prelude::*;

use vfi_dpa::backends::{
    interpolate_accurate, interpolate_fast, measure_latency, AccurateBackend, AccurateConfig,
    BackendKind, BackendProfile, BackendRegistry, FastBackend, Interpolator,
};
use vfi_dpa::dataset::{generate_synthetic_with, SyntheticOptions};
use vfi_dpa::frame::Frame;
use vfi_dpa::metrics::psnr;

fn synthetic_triplets(count: usize, magnitudes: &[f64], size: usize) -> Vec<[Frame; 3]> {
    let opts = SyntheticOptions {
        size,
        ..Default::default()
    };
    generate_synthetic_with(count, magnitudes, 11, &opts)
        .unwrap()
        .iter()
        .map(|t| t.load().unwrap().as_ref().clone())
        .collect()
}

fn noise_frame(w: usize, h: usize, c: usize, seed: u64) -> Frame {
    use rand::Rng;
    let mut r = common::rng(seed);
    Frame::new(w, h, c, (0..w * h * c).map(|_| r.random()).collect()).unwrap()
}

#[test]
fn identical_inputs_are_returned_unchanged() {
    for c in [1, 3] {
        let f = noise_frame(40, 24, c, c as u64);
        assert_eq!(interpolate_fast(&f, &f).unwrap(), f);
        let out = interpolate_accurate(&f, &f, AccurateConfig::default()).unwrap();
        assert_eq!(out.frame, f);
        assert!(!out.fell_back);
        assert!(out.vectors.iter().all(|&v| v == (0, 0)));
    }
}

#[test]
fn fast_blend_rounds_half_up() {
    let a = Frame::new(3, 1, 1, vec![10, 255, 0]).unwrap();
    let b = Frame::new(3, 1, 1, vec![20, 254, 1]).unwrap();
    assert_eq!(interpolate_fast(&a, &b).unwrap().data(), &[15, 255, 1]);
}

#[test]
fn block_matching_recovers_an_8px_shift() {
    for [f0, f1, f2] in synthetic_triplets(4, &[8.0], 128) {
        let fast = psnr(&interpolate_fast(&f0, &f2).unwrap(), &f1).unwrap();
        let out = interpolate_accurate(&f0, &f2, AccurateConfig::default()).unwrap();
        let accurate = psnr(&out.frame, &f1).unwrap();
        assert!(
            accurate > fast + 3.0,
            "accurate {accurate:.2} fast {fast:.2}"
        );
        // Most blocks find the 4px half-vector along one axis.
        let hits = out
            .vectors
            .iter()
            .filter(|&&(dy, dx)| dy.abs() + dx.abs() == 4 && (dy == 0 || dx == 0))
            .count();
        assert!(hits * 2 > out.vectors.len(), "{hits}/{}", out.vectors.len());
    }
}

#[test]
fn zero_search_is_the_fast_blend() {
    let a = noise_frame(50, 34, 3, 1);
    let b = noise_frame(50, 34, 3, 2);
    let cfg = AccurateConfig {
        block: 8,
        search: 0,
    };
    let out = interpolate_accurate(&a, &b, cfg).unwrap();
    assert_eq!(out.frame, interpolate_fast(&a, &b).unwrap());
}

#[test]
fn accurate_dominates_fast_for_motion_of_4px_and_more() {
    for [f0, f1, f2] in synthetic_triplets(9, &[4.0, 8.0, 16.0], 96) {
        let fast = psnr(&interpolate_fast(&f0, &f2).unwrap(), &f1).unwrap();
        let accurate = psnr(
            &interpolate_accurate(&f0, &f2, AccurateConfig::default())
                .unwrap()
                .frame,
            &f1,
        )
        .unwrap();
        assert!(accurate >= fast, "accurate {accurate:.2} fast {fast:.2}");
    }
}

#[test]
fn accurate_is_slower_than_fast_at_256px() {
    let [f0, _, f2] = synthetic_triplets(1, &[8.0], 256).remove(0);
    let median = |b: &dyn Interpolator| {
        let mut t: Vec<f64> = (0..20)
            .map(|_| measure_latency(b, &f0, &f2).unwrap().1)
            .collect();
        t.sort_by(f64::total_cmp);
        (t[9] + t[10]) / 2.0
    };
    let fast = median(&FastBackend);
    let accurate = median(&AccurateBackend::default());
    assert!(accurate > fast, "accurate {accurate:e}s fast {fast:e}s");
}

#[test]
fn tiny_frames_fall_back_to_blending() {
    let a = noise_frame(10, 10, 1, 3);
    let b = noise_frame(10, 10, 1, 4);
    let out = interpolate_accurate(&a, &b, AccurateConfig::default()).unwrap();
    assert!(out.fell_back);
    assert_eq!(out.frame, interpolate_fast(&a, &b).unwrap());
}

#[test]
fn mismatched_frames_and_bad_configs_are_errors() {
    let a = noise_frame(32, 32, 3, 1);
    let b = noise_frame(32, 30, 3, 2);
    assert!(interpolate_fast(&a, &b).is_err());
    assert!(interpolate_accurate(&a, &b, AccurateConfig::default()).is_err());
    assert!(interpolate_fast(&a, &noise_frame(32, 32, 1, 2)).is_err());
    for block in [0, 3] {
        assert!(interpolate_accurate(&a, &a, AccurateConfig { block, search: 2 }).is_err());
    }
}

#[test]
fn registry_and_profiles() {
    let mut reg = BackendRegistry::default();
    assert_eq!(reg.names().collect::<Vec<_>>(), ["accurate", "fast"]);
    assert_eq!(reg.get("fast").unwrap().kind(), BackendKind::Fast);
    assert!(reg.get("rife").is_err());
    let tuned = AccurateBackend {
        config: AccurateConfig {
            block: 8,
            search: 4,
        },
    };
    reg.register(Arc::new(tuned));
    assert_eq!(reg.names().count(), 2);

    let f = noise_frame(32, 32, 3, 7);
    let mut p = BackendProfile::for_backend(reg.get("accurate").unwrap().as_ref());
    assert_eq!(p.measured_latency(), None);
    for _ in 0..3 {
        let (out, secs) = p
            .measure(reg.get("accurate").unwrap().as_ref(), &f, &f)
            .unwrap();
        assert_eq!(out, f);
        assert!(secs > 0.0);
    }
    assert_eq!(p.samples().len(), 3);
    let mean = p.samples().iter().sum::<f64>() / 3.0;
    assert_eq!(p.measured_latency(), Some(mean));

    assert_eq!(
        "Accurate".parse::<BackendKind>().unwrap(),
        BackendKind::Accurate
    );
    assert!("medium".parse::<BackendKind>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fast_blend_is_symmetric_and_between_inputs(w in 1usize..20, h in 1usize..20, seed in 0u64..10_000) {
        let a = noise_frame(w, h, 3, seed);
        let b = noise_frame(w, h, 3, seed + 1);
        let ab = interpolate_fast(&a, &b).unwrap();
        prop_assert_eq!(&ab, &interpolate_fast(&b, &a).unwrap());
        for ((x, y), m) in a.data().iter().zip(b.data()).zip(ab.data()) {
            prop_assert!(m >= x.min(y) && m <= x.max(y));
        }
    }

    #[test]
    fn accurate_output_stays_in_the_input_range(w in 8usize..40, h in 8usize..40, seed in 0u64..10_000) {
        let a = noise_frame(w, h, 1, seed);
        let b = noise_frame(w, h, 1, seed + 1);
        let cfg = AccurateConfig { block: 8, search: 3 };
        let out = interpolate_accurate(&a, &b, cfg).unwrap().frame;
        prop_assert_eq!(out.dims(), a.dims());
        let lo = a.data().iter().chain(b.data()).min().unwrap();
        let hi = a.data().iter().chain(b.data()).max().unwrap();
        prop_assert!(out.data().iter().all(|v| v >= lo && v <= hi));
    }
}
