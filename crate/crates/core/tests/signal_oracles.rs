mod common;

use std::f64::consts::PI;

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use solo_sf::eval::{oracle_dominance_mask, rank_auc, score_feature, BinLabel};
use solo_sf::room::{rt60_to_absorption, sample_protocol_scenario, sufficient_image_order};
use solo_sf::{
    compute_ipd, compute_tpd_3d, istft, lps, stft, ComplexSpectrogram, Error, FeatureKind, FeatureMap, MicPair,
    RoomScenario, Rt60Band, StftConfig, WaveBuffer, WindowKind,
};

use common::{dft_bins, dist, hann, pairwise_auc, principal_angle, random_complex, wrap};

#[test]
fn stft_frames_match_direct_dft() {
    let cfg = StftConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..1_500).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let spec = stft(&WaveBuffer::mono(x.clone(), 16_000).unwrap(), &cfg).unwrap();
    // Valid frames only: 1 + (1500 - 400) / 160 = 7.
    assert_eq!(spec.num_frames(), 7);
    assert_eq!(spec.num_bins(), 257);
    let w = hann(400);
    for t in [0, 3, 6] {
        let frame: Vec<f64> = (0..400).map(|n| x[t * 160 + n] * w[n]).collect();
        let want = dft_bins(&frame, 512);
        for (f, z) in want.iter().enumerate() {
            assert!((spec.data()[[t, f, 0]] - z).norm() < 1e-9, "t={t} f={f}");
        }
    }
}

#[test]
fn short_input_is_rejected() {
    let cfg = StftConfig::default();
    let r = stft(&WaveBuffer::mono(vec![0.0; 399], 16_000).unwrap(), &cfg);
    assert!(matches!(r, Err(Error::InputTooShort { samples: 399, window_len: 400 })));
    assert_eq!(stft(&WaveBuffer::mono(vec![0.0; 400], 16_000).unwrap(), &cfg).unwrap().num_frames(), 1);
}

#[test]
fn inverse_restores_the_interior() {
    let cfg = StftConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..8_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y = istft(&stft(&WaveBuffer::mono(x.clone(), 16_000).unwrap(), &cfg).unwrap()).unwrap();
    assert_eq!(y.len(), 400 + 47 * 160);
    for n in 400..y.len() - 400 {
        assert!((y.samples()[[0, n]] - x[n]).abs() < 1e-10);
    }
}

#[test]
fn non_invertible_window_is_reported() {
    // A Hann window hopped by its full length leaves every frame's first
    // sample with zero weight.
    let cfg = StftConfig { window_len: 400, hop: 400, fft_size: 512, ..StftConfig::default() };
    let spec = stft(&WaveBuffer::mono(vec![1.0; 2_000], 16_000).unwrap(), &cfg).unwrap();
    assert!(matches!(istft(&spec), Err(Error::NotInvertible { .. })));
    let rect = StftConfig { window: WindowKind::Rectangular, ..cfg };
    let spec = stft(&WaveBuffer::mono(vec![1.0; 2_000], 16_000).unwrap(), &rect).unwrap();
    assert!(istft(&spec).is_ok());
}

#[test]
fn lps_is_log_magnitude_with_floor() {
    let cfg = StftConfig { window_len: 4, hop: 2, fft_size: 4, ..StftConfig::default() };
    let mut data = Array3::<Complex64>::zeros((2, 3, 2));
    data[[0, 1, 0]] = Complex64::new(3.0, 4.0);
    data[[1, 2, 1]] = Complex64::new(1.0, 0.0);
    let map = lps(&ComplexSpectrogram::new(data.clone(), cfg).unwrap(), 0).unwrap();
    assert!((map.data()[[0, 1]] - 5.0f64.ln()).abs() < 1e-15);
    assert!((map.data()[[0, 0]] - 1e-8f64.ln()).abs() < 1e-12);
    assert!(lps(&ComplexSpectrogram::new(data, cfg).unwrap(), 2).is_err());
}

#[test]
fn ipd_matches_principal_angles() {
    let cfg = StftConfig { window_len: 16, hop: 4, fft_size: 16, ..StftConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut data = Array3::from_shape_simple_fn((20, 9, 3), || random_complex(&mut rng));
    data[[0, 0, 1]] = Complex64::new(0.0, 0.0);
    let spec = ComplexSpectrogram::new(data.clone(), cfg).unwrap();
    let ipd = compute_ipd(&spec, MicPair::new(1, 2).unwrap()).unwrap();
    for ((t, f), v) in ipd.indexed_iter() {
        let want = wrap(principal_angle(data[[t, f, 1]]) - principal_angle(data[[t, f, 2]]));
        assert!(wrap(v - want).abs() < 1e-12);
        assert!(*v > -PI && *v <= PI);
    }
}

#[test]
fn tpd_matches_path_difference() {
    let cfg = StftConfig::default();
    for seed in 0..20 {
        let sc = sample_protocol_scenario(Rt60Band::Weak, seed);
        let bearing = sc.bearing(0).unwrap();
        let mics = sc.mic_positions();
        for (a, b) in [(0, 7), (2, 3), (3, 4)] {
            let tpd = compute_tpd_3d(&bearing, &cfg, MicPair::new(a, b).unwrap(), 257).unwrap();
            let delta = dist(&sc.source_positions[0], &mics[b]) - dist(&sc.source_positions[0], &mics[a]);
            for f in [1, 40, 128, 256] {
                let hz = f as f64 * 16_000.0 / 512.0;
                assert!((tpd[f] - 2.0 * PI * hz * delta / 343.0).abs() < 1e-9, "seed {seed} pair {a}{b} f {f}");
            }
        }
    }
}

#[test]
fn sabine_inversion_arithmetic() {
    // Room 6 x 4 x 3: V = 72, S = 108, alpha = 0.161 V / (S T).
    let est = rt60_to_absorption([6.0, 4.0, 3.0], 0.3).unwrap();
    assert!((est.alpha - 0.161 * 72.0 / (108.0 * 0.3)).abs() < 1e-12);
    assert!(!est.clamped);
    let tiny = rt60_to_absorption([6.0, 4.0, 3.0], 0.01).unwrap();
    assert!(tiny.clamped && tiny.alpha <= 1.0);
    assert!(rt60_to_absorption([6.0, 4.0, 3.0], -1.0).is_err());
}

#[test]
fn image_order_covers_the_tail() {
    // The order-n image shell along an axis lies n room lengths away; it must
    // reach c * T in the longest-room direction.
    let dims = [8.0, 6.0, 4.0];
    let n = sufficient_image_order(dims, 0.6, 343.0);
    assert!(n as f64 * 4.0 >= 343.0 * 0.6);
}

#[test]
fn scenario_rejects_mics_outside_room() {
    let sc = RoomScenario::anechoic([3.0, 3.0, 2.5], [0.2, 1.5, 1.2], 0.0, vec![[1.5, 2.5, 1.5]]);
    assert!(sc.validate().is_err());
}

#[test]
fn dominance_mask_labels() {
    let cfg = StftConfig { window_len: 4, hop: 2, fft_size: 4, ..StftConfig::default() };
    let t = Array3::from_shape_vec((1, 3, 1), vec![Complex64::new(10.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.001, 0.0)]).unwrap();
    let i = Array3::from_shape_vec((1, 3, 1), vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)]).unwrap();
    let mask = oracle_dominance_mask(&ComplexSpectrogram::new(t, cfg).unwrap(), &ComplexSpectrogram::new(i, cfg).unwrap(), 1e-3)
        .unwrap();
    // Equal magnitudes go to interference; 0.001 < 1e-3 * 10 is silent.
    assert_eq!(mask.labels().row(0).to_vec(), vec![BinLabel::Target, BinLabel::Interference, BinLabel::Silent]);
}

#[test]
fn rank_auc_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let np = rng.gen_range(1..40);
        let nn = rng.gen_range(1..40);
        // Coarse values force ties.
        let pos: Vec<f64> = (0..np).map(|_| (rng.gen_range(-1.0..1.0f64) * 5.0).round()).collect();
        let neg: Vec<f64> = (0..nn).map(|_| (rng.gen_range(-1.0..1.0f64) * 5.0).round()).collect();
        assert!((rank_auc(&pos, &neg) - pairwise_auc(&pos, &neg)).abs() < 1e-12);
    }
}

#[test]
fn score_feature_separation_and_degenerate_masks() {
    let labels = Array2::from_shape_fn((4, 10), |(t, _)| if t < 2 { BinLabel::Target } else { BinLabel::Interference });
    let mask = solo_sf::eval::DominanceMask::new(labels, 1e-3);
    let data = Array2::from_shape_fn((4, 10), |(t, f)| if t < 2 { 0.5 + 0.01 * f as f64 } else { -0.2 });
    let r = score_feature(&FeatureMap::new(data, FeatureKind::SoloSf), &mask).unwrap();
    assert!((r.mean_target - 0.545).abs() < 1e-12);
    assert!((r.separation - 0.745).abs() < 1e-12);
    assert_eq!(r.auc, 1.0);
    assert_eq!((r.n_target, r.n_interf), (20, 20));

    let few = Array2::from_shape_fn((4, 10), |(t, f)| if t == 0 && f < 5 { BinLabel::Target } else { BinLabel::Interference });
    let r = score_feature(&FeatureMap::new(Array2::zeros((4, 10)), FeatureKind::SoloSf), &solo_sf::eval::DominanceMask::new(few, 1e-3));
    assert!(matches!(r, Err(Error::DegenerateMask(_))));
}
