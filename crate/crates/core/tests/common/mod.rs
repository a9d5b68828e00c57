//! Reference computations shared by the integration tests. Everything here is
//! written from first principles and never calls into the code under test
//! beyond plain data access.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;

/// RT60 from Schroeder backward integration: least-squares line through the
/// energy decay curve between -5 and -25 dB, extrapolated to -60 dB.
pub fn schroeder_rt60(h: &[f64], fs: f64) -> f64 {
    let mut edc = vec![0.0; h.len()];
    let mut acc = 0.0;
    for i in (0..h.len()).rev() {
        acc += h[i] * h[i];
        edc[i] = acc;
    }
    let total = edc[0];
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, e) in edc.iter().enumerate() {
        let db = 10.0 * (e / total).log10();
        if (-25.0..=-5.0).contains(&db) {
            let t = i as f64 / fs;
            sx += t;
            sy += db;
            sxx += t * t;
            sxy += t * db;
            n += 1.0;
        }
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    -60.0 / slope
}

/// Direct DFT of one frame of length `n_fft` (zero-padded), bins `0..=n_fft/2`.
pub fn dft_bins(frame: &[f64], n_fft: usize) -> Vec<Complex64> {
    (0..=n_fft / 2)
        .map(|k| {
            frame.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (n, x)| {
                let w = -2.0 * std::f64::consts::PI * (k * n) as f64 / n_fft as f64;
                acc + Complex64::from_polar(*x, w)
            })
        })
        .collect()
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len).map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()).collect()
}

pub fn random_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Principal angle with angle(0) = 0.
pub fn principal_angle(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        z.im.atan2(z.re)
    }
}

/// Wraps into (-pi, pi].
pub fn wrap(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x % two_pi;
    if y <= -std::f64::consts::PI {
        y += two_pi;
    } else if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

/// Euclidean distance.
pub fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mann-Whitney AUC by explicit pair counting; ties count one half.
pub fn pairwise_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for q in neg {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}
