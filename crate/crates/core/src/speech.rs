//! Deterministic speech-like dry sources.
//!
//! Utterances are sequences of syllables separated by pauses. A syllable is
//! an optional unvoiced (noise) onset followed by a voiced nucleus: a
//! harmonic series on a gliding pitch contour, shaped by three formant
//! resonances and a spectral tilt. The result is sparse in time-frequency the
//! way speech is, which is what distinguishes the solo-segment strategies.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Voice characteristics held fixed across one speaker's utterances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Voice {
    pub f0: f64,
    pub formant_scale: f64,
}

impl Voice {
    pub fn random(rng: &mut impl Rng) -> Self {
        Self { f0: rng.gen_range(90.0..240.0), formant_scale: rng.gen_range(0.9..1.15) }
    }
}

/// `seconds` of speech-like signal at `sample_rate`, peak-normalized to 0.5.
pub fn synth_speech(voice: Voice, seconds: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    let fs = sample_rate as f64;
    let total = (seconds * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; total];

    // Short leading pause so utterances do not start on a hard edge.
    let mut pos = (rng.gen_range(0.01..0.06) * fs) as usize;
    while pos < total {
        if rng.gen_bool(0.4) {
            let len = (rng.gen_range(0.04..0.10) * fs) as usize;
            fricative(&mut out[pos..], len, &mut rng);
            pos += len;
        }
        let len = (rng.gen_range(0.10..0.28) * fs) as usize;
        voiced(&mut out[pos.min(total)..], len, voice, fs, &mut rng);
        pos += len;
        let pause = if rng.gen_bool(0.15) { rng.gen_range(0.25..0.5) } else { rng.gen_range(0.03..0.2) };
        pos += (pause * fs) as usize;
    }

    let peak = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    out
}

fn envelope(i: usize, len: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    if i < ramp {
        0.5 - 0.5 * (PI * i as f64 / ramp as f64).cos()
    } else if i >= len - ramp {
        0.5 - 0.5 * (PI * (len - i) as f64 / ramp as f64).cos()
    } else {
        1.0
    }
}

fn fricative(out: &mut [f64], len: usize, rng: &mut impl Rng) {
    let len = len.min(out.len());
    let gain = rng.gen_range(0.05..0.2);
    let mut prev = 0.0;
    for i in 0..len {
        let n: f64 = rng.gen_range(-1.0..1.0);
        // First difference tilts the noise toward high frequencies.
        out[i] += gain * (n - prev) * envelope(i, len, len / 4);
        prev = n;
    }
}

fn voiced(out: &mut [f64], len: usize, voice: Voice, fs: f64, rng: &mut impl Rng) {
    let len = len.min(out.len());
    if len == 0 {
        return;
    }
    let s = voice.formant_scale;
    let formants = [
        (rng.gen_range(300.0..850.0) * s, 90.0, 1.0),
        (rng.gen_range(900.0..2300.0) * s, 120.0, 0.6),
        (rng.gen_range(2400.0..3300.0) * s, 180.0, 0.3),
    ];
    let f0_start = voice.f0 * rng.gen_range(0.85..1.15);
    let f0_end = voice.f0 * rng.gen_range(0.85..1.15);
    let amp = rng.gen_range(0.5..1.0);
    let max_harmonic = (5000.0 / f0_start.max(f0_end)).floor() as usize;

    let weight = |freq: f64| {
        let resonance: f64 = formants
            .iter()
            .map(|(fc, bw, g)| g / (1.0 + ((freq - fc) / bw).powi(2)))
            .sum();
        (0.03 + resonance) * (300.0 / freq.max(300.0))
    };

    let ramp = (0.02 * fs) as usize;
    let mut phases: Vec<f64> = (0..max_harmonic).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    for i in 0..len {
        let frac = i as f64 / len as f64;
        let f0 = f0_start + (f0_end - f0_start) * frac;
        let mut sample = 0.0;
        for (h, phase) in phases.iter_mut().enumerate() {
            let freq = f0 * (h + 1) as f64;
            if freq >= 0.45 * fs {
                break;
            }
            sample += weight(freq) * phase.sin();
            *phase = (*phase + 2.0 * PI * freq / fs) % (2.0 * PI);
        }
        out[i] += amp * sample * envelope(i, len, ramp);
    }
}
