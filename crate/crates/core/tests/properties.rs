//! Property-based invariants over the public API.

use proptest::prelude::*;

use faintprint::acbnet::{acb_forward, AcbKernel, Mode};
use faintprint::armodel::serpentine_scan;
use faintprint::chromppg::{chrom_signals, normalize_u8, s_hat};
use faintprint::config::RunConfig;
use faintprint::eval::roc_auc;
use faintprint::fingerprint::window_segments;
use ndarray::{Array1, Array3, Array4};

proptest! {
    /// Every pixel appears exactly twice in a serpentine scan, and
    /// consecutive samples within each traversal phase are grid neighbors.
    #[test]
    fn serpentine_scan_is_a_neighbor_preserving_double_cover(
        h in 2usize..11,
        w in 2usize..11,
    ) {
        // Unique sample values encode pixel positions (h*w <= 100 < 256).
        let plane: Vec<u8> = (0..h * w).map(|i| i as u8).collect();
        let seq = serpentine_scan::<f64>(&plane, h, w);
        prop_assert_eq!(seq.values.len(), 2 * h * w);

        let mut counts = vec![0usize; h * w];
        for v in &seq.values {
            counts[*v as usize] += 1;
        }
        prop_assert!(counts.iter().all(|&c| c == 2), "each pixel sampled twice");

        let pos = |v: f64| -> (usize, usize) {
            let i = v as usize;
            (i / w, i % w)
        };
        // Rows phase then columns phase; adjacency holds inside each phase.
        for phase in [&seq.values[..h * w], &seq.values[h * w..]] {
            for pair in phase.windows(2) {
                let (y0, x0) = pos(pair[0]);
                let (y1, x1) = pos(pair[1]);
                let dist = y0.abs_diff(y1) + x0.abs_diff(x1);
                prop_assert_eq!(dist, 1, "phase jump from {:?} to {:?}", (y0, x0), (y1, x1));
            }
        }
    }

    /// Segment windows start at stride multiples, fit the video, and appear
    /// in the exact count the arithmetic predicts.
    #[test]
    fn segment_windows_tile_the_video(
        video_len in 65usize..2000,
        n in 64usize..256,
        stride in 1usize..300,
    ) {
        match window_segments(video_len, n, stride) {
            Ok(segments) => {
                prop_assert!(video_len > n);
                let expected = (video_len - n) / stride + 1;
                prop_assert_eq!(segments.len(), expected);
                for (i, seg) in segments.iter().enumerate() {
                    prop_assert_eq!(seg.start_frame, i * stride);
                    prop_assert_eq!(seg.len, n);
                    prop_assert!(seg.start_frame + seg.len <= video_len);
                }
            }
            Err(_) => prop_assert!(video_len <= n),
        }
    }

    /// Min-max byte normalization stays in range, is monotone, and pins the
    /// extremes of any non-constant input.
    #[test]
    fn normalization_is_monotone_and_pins_extremes(
        xs in prop::collection::vec(-1e6f64..1e6, 2..300),
    ) {
        let out = normalize_u8(&xs);
        prop_assert_eq!(out.len(), xs.len());
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            prop_assert!(out.iter().all(|&b| b == 0), "constant maps to zeros");
        } else {
            for (i, j) in (0..xs.len()).zip(1..xs.len()) {
                if xs[i] <= xs[j] {
                    prop_assert!(out[i] <= out[j], "order must be preserved");
                } else {
                    prop_assert!(out[i] >= out[j]);
                }
            }
            let imin = xs.iter().position(|&v| v == lo).unwrap();
            let imax = xs.iter().position(|&v| v == hi).unwrap();
            prop_assert_eq!(out[imin], 0);
            prop_assert_eq!(out[imax], 255);
        }
    }

    /// Quantization shifts by at most one gray level when the input is
    /// rescaled affinely (positive gain), since the normalized values agree
    /// up to floating-point rounding.
    #[test]
    fn normalization_is_stable_under_affine_rescale(
        xs in prop::collection::vec(-1e3f64..1e3, 2..100),
        gain in 0.25f64..8.0,
        offset in -100.0f64..100.0,
    ) {
        let scaled: Vec<f64> = xs.iter().map(|v| gain * v + offset).collect();
        let a = normalize_u8(&xs);
        let b = normalize_u8(&scaled);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x.abs_diff(*y) <= 1, "{x} vs {y}");
        }
    }

    /// The combined chrominance projection is the fixed linear map
    /// `1.5 r - 3 g + 1.5 b` of the inputs.
    #[test]
    fn chrominance_projection_is_the_expected_linear_map(
        r in prop::collection::vec(0.0f64..255.0, 1..50),
        seedg in 0.0f64..255.0,
        seedb in 0.0f64..255.0,
    ) {
        let g: Vec<f64> = r.iter().map(|v| (v * 0.7 + seedg) % 255.0).collect();
        let b: Vec<f64> = r.iter().map(|v| (v * 1.3 + seedb) % 255.0).collect();
        let (xs, ys) = chrom_signals(&r, &g, &b);
        let s = s_hat(&xs, &ys);
        for i in 0..r.len() {
            let want = 1.5 * r[i] - 3.0 * g[i] + 1.5 * b[i];
            prop_assert!((s[i] - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }

    /// AUC depends only on the score ordering: exact halving (lossless in
    /// floating point) must not change it, and negating scores while
    /// flipping labels must mirror it.
    #[test]
    fn auc_is_rank_based(
        scores in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..120),
    ) {
        let halved: Vec<(f64, bool)> =
            scores.iter().map(|&(s, y)| (s / 2.0, y)).collect();
        prop_assert_eq!(roc_auc(&scores), roc_auc(&halved));
        let mirrored: Vec<(f64, bool)> =
            scores.iter().map(|&(s, y)| (-s, !y)).collect();
        prop_assert_eq!(roc_auc(&scores), roc_auc(&mirrored));
        if let Some(auc) = roc_auc(&scores) {
            prop_assert!((0.0..=1.0).contains(&auc));
        }
    }

    /// Collapsing the three convolution branches into one kernel never
    /// changes the block's output beyond rounding.
    #[test]
    fn branch_fusion_is_exact(
        vals in prop::collection::vec(-2.0f64..2.0, 27 + 9 + 9 + 1 + 48),
        stride in 1usize..3,
    ) {
        // One input channel, one output channel, 6x8 input.
        let mut it = vals.into_iter();
        let mut next = || it.next().unwrap();
        let k33 = Array4::from_shape_fn((3, 3, 1, 1), |_| next());
        let k13 = Array4::from_shape_fn((1, 3, 1, 1), |_| next());
        let k31 = Array4::from_shape_fn((3, 1, 1, 1), |_| next());
        let bias = Array1::from_shape_fn(1, |_| next());
        let kernel = AcbKernel { k33, k13, k31, bias };
        let input = Array3::from_shape_fn((6, 8, 1), |_| next());
        let train = acb_forward(&input, &kernel, Mode::Train, stride);
        let fused = acb_forward(&input, &kernel, Mode::Fused, stride);
        prop_assert_eq!(train.dim(), fused.dim());
        for (a, b) in train.iter().zip(fused.iter()) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Any valid configuration survives the TOML file round trip unchanged.
    #[test]
    fn config_round_trips_through_toml(
        n in 64usize..512,
        explicit_stride in prop::option::of(1usize..512),
        ar_order in 1usize..64,
        seed in any::<u64>(),
        jobs in 0usize..16,
    ) {
        let config = RunConfig {
            n,
            stride: explicit_stride,
            ar_order,
            seed,
            jobs,
            ..RunConfig::default()
        };
        prop_assume!(config.validate().is_ok());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        config.save(&path).unwrap();
        let back = RunConfig::load(&path).unwrap();
        prop_assert_eq!(back, config);
    }
}
