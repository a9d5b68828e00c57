mod common;

use ndarray::Array3;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use solo_sf::eval::rank_auc;
use solo_sf::{
    compute_rir_sf, compute_solo_sf, phase_convolve, stft, Aggregation, ComplexSpectrogram, ConvKernel, PairSet,
    StftConfig, WaveBuffer, WindowKind,
};

fn config(bins: usize) -> StftConfig {
    let n = 2 * (bins - 1);
    StftConfig { window_len: n, hop: 1, fft_size: n, window: WindowKind::Hann, sample_rate: 16_000, sound_speed: 343.0 }
}

fn tensor(t: usize, f: usize, m: usize, seed: u64) -> Array3<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array3::from_shape_simple_fn((t, f, m), || common::random_complex(&mut rng))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stft_frame_count_and_linearity(len in 400usize..3_000, a in -3.0f64..3.0, seed in any::<u64>()) {
        let cfg = StftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..len).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let y: Vec<f64> = (0..len).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let sx = stft(&WaveBuffer::mono(x, 16_000).unwrap(), &cfg).unwrap();
        let sy = stft(&WaveBuffer::mono(y, 16_000).unwrap(), &cfg).unwrap();
        let sz = stft(&WaveBuffer::mono(z, 16_000).unwrap(), &cfg).unwrap();
        prop_assert_eq!(sz.num_frames(), 1 + (len - 400) / 160);
        for ((p, q), r) in sx.data().iter().zip(sy.data().iter()).zip(sz.data().iter()) {
            prop_assert!((p * a + q - r).norm() < 1e-9);
        }
    }

    #[test]
    fn convolved_phase_in_principal_range(t in 1usize..30, f in 2usize..10, m in 1usize..4, k in 1usize..8, seed in any::<u64>()) {
        let k = k.min(t);
        let y = ComplexSpectrogram::new(tensor(t, f, m, seed), config(f)).unwrap();
        let kern = ConvKernel::new(tensor(k, f, m, seed ^ 1)).unwrap();
        let p = phase_convolve(&y, &kern).unwrap();
        prop_assert!(p.iter().all(|v| *v > -std::f64::consts::PI && *v <= std::f64::consts::PI));
    }

    #[test]
    fn spatial_features_stay_in_range(t in 2usize..25, f in 2usize..10, m in 2usize..5, k in 1usize..6, seed in any::<u64>()) {
        let k = k.min(t);
        let y = ComplexSpectrogram::new(tensor(t, f, m, seed), config(f)).unwrap();
        let kern = ConvKernel::new(tensor(k, f, m, seed ^ 2)).unwrap();
        let mean = PairSet::all_pairs(m, Aggregation::Mean).unwrap();
        let sum = PairSet::all_pairs(m, Aggregation::Sum).unwrap();
        let a = compute_solo_sf(&y, &kern, &mean).unwrap();
        let b = compute_rir_sf(&y, &kern, &sum).unwrap();
        let npairs = (m * (m - 1) / 2) as f64;
        prop_assert!(a.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        prop_assert!(b.data().iter().all(|v| (-npairs..=npairs).contains(v)));
        for (x, s) in a.data().iter().zip(b.data().iter()) {
            prop_assert!((x * npairs - s).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_channels_give_one(t in 2usize..20, f in 2usize..8, m in 2usize..5, seed in any::<u64>()) {
        let one = tensor(t, f, 1, seed);
        let y = Array3::from_shape_fn((t, f, m), |(a, b, _)| one[[a, b, 0]]);
        let kone = tensor(1, f, 1, seed ^ 3);
        let kern = Array3::from_shape_fn((1, f, m), |(a, b, _)| kone[[a, b, 0]]);
        let map = compute_solo_sf(
            &ComplexSpectrogram::new(y, config(f)).unwrap(),
            &ConvKernel::new(kern).unwrap(),
            &PairSet::all_pairs(m, Aggregation::Mean).unwrap(),
        )
        .unwrap();
        prop_assert!(map.data().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn auc_ignores_monotone_maps(seed in any::<u64>(), n in 5usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos: Vec<f64> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let neg: Vec<f64> = (0..n + 3).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let g = |v: &f64| (3.0 * v).exp() + 2.0;
        let a = rank_auc(&pos, &neg);
        let b = rank_auc(&pos.iter().map(g).collect::<Vec<_>>(), &neg.iter().map(g).collect::<Vec<_>>());
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((a - common::pairwise_auc(&pos, &neg)).abs() < 1e-12);
    }
}

#[test]
fn shuffled_labels_give_chance_auc() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut values: Vec<f64> = (0..4_000).map(|i| (i as f64 * 0.37).sin()).collect();
    values.shuffle(&mut rng);
    let auc = rank_auc(&values[..2_000], &values[2_000..]);
    // Standard error of the AUC under the null is about 0.0065 here.
    assert!((auc - 0.5).abs() < 0.03, "{auc}");
}
