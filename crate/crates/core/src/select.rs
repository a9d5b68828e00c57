//! Choosing the `K`-frame solo kernel from a longer solo part.
//!
//! All strategies decide frame offsets from a single reference channel and
//! apply the same offsets to every channel, so the interchannel phase
//! relations of the solo part survive in the kernel.

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::ComplexSpectrogram;
use crate::error::{Error, Result};
use crate::features::ConvKernel;

/// Relative peak magnitude below which a kernel cell counts as silent.
pub const LOW_ENERGY_THRESHOLD: f64 = 1e-6;

/// STFT of the target speaker talking alone, `[G x F x M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoloPart {
    data: Array3<Complex64>,
    origin: String,
}

impl SoloPart {
    pub fn new(data: Array3<Complex64>, origin: impl Into<String>) -> Result<Self> {
        let (g, f, m) = data.dim();
        if g == 0 || f == 0 || m == 0 {
            return Err(Error::ShapeMismatch(format!("empty solo part {:?}", (g, f, m))));
        }
        Ok(Self { data, origin: origin.into() })
    }

    pub fn from_spectrogram(spec: ComplexSpectrogram, origin: impl Into<String>) -> Result<Self> {
        Self::new(spec.into_data(), origin)
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn num_frames(&self) -> usize {
        self.data.dim().0
    }

    pub fn num_channels(&self) -> usize {
        self.data.dim().2
    }

    fn check(&self, k: usize, ref_channel: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidConfig("kernel length must be at least one frame".into()));
        }
        if self.num_frames() < k {
            return Err(Error::SoloTooShort { frames: self.num_frames(), kernel: k });
        }
        if ref_channel >= self.num_channels() {
            return Err(Error::InvalidConfig(format!(
                "reference channel {ref_channel} out of range for {} channels",
                self.num_channels()
            )));
        }
        Ok(())
    }

    /// Gathers `S[t, f, m] = P[starts[f] + t, f, m]`.
    fn gather(&self, k: usize, starts: &[usize]) -> ConvKernel {
        let (_, f_len, m_len) = self.data.dim();
        let data = Array3::from_shape_fn((k, f_len, m_len), |(t, f, m)| self.data[[starts[f] + t, f, m]]);
        ConvKernel::new(data).expect("k, F, M are nonzero")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    Max,
    Compose,
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(StrategyKind::Random),
            "max" => Ok(StrategyKind::Max),
            "compose" => Ok(StrategyKind::Compose),
            other => Err(Error::InvalidConfig(format!("unknown selection strategy '{other}'"))),
        }
    }
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Max => "max",
            StrategyKind::Compose => "compose",
        }
    }
}

/// How Compose scores a candidate start frame for one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ComposeScore {
    /// Magnitude of the start frame alone.
    #[default]
    StartFrame,
    /// Energy summed over the `K` frames of the window.
    WindowEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionStrategy {
    pub kind: StrategyKind,
    pub seed: u64,
    pub ref_channel: usize,
}

impl SelectionStrategy {
    pub fn select(&self, solo: &SoloPart, k: usize) -> Result<ConvKernel> {
        match self.kind {
            StrategyKind::Random => select_random(solo, k, self.seed),
            StrategyKind::Max => select_max(solo, k, self.ref_channel),
            StrategyKind::Compose => select_compose(solo, k, self.ref_channel),
        }
    }
}

/// Uniform start offset in `[0, G - K]` drawn from `seed`.
pub fn random_start(frames: usize, k: usize, seed: u64) -> Result<usize> {
    if frames < k {
        return Err(Error::SoloTooShort { frames, kernel: k });
    }
    Ok(ChaCha8Rng::seed_from_u64(seed).gen_range(0..=frames - k))
}

pub fn select_random(solo: &SoloPart, k: usize, seed: u64) -> Result<ConvKernel> {
    solo.check(k, 0)?;
    let c = random_start(solo.num_frames(), k, seed)?;
    Ok(solo.gather(k, &vec![c; solo.data.dim().1]))
}

/// Start frame maximizing `sum_f |P[t', f, ref]|`; lowest index wins ties.
pub fn max_slice_start(solo: &SoloPart, k: usize, ref_channel: usize) -> Result<usize> {
    solo.check(k, ref_channel)?;
    let reference = solo.data.index_axis(Axis(2), ref_channel);
    let mut best = (0, f64::NEG_INFINITY);
    for t in 0..=solo.num_frames() - k {
        let score: f64 = reference.row(t).iter().map(|z| z.norm()).sum();
        if score > best.1 {
            best = (t, score);
        }
    }
    Ok(best.0)
}

pub fn select_max(solo: &SoloPart, k: usize, ref_channel: usize) -> Result<ConvKernel> {
    let c = max_slice_start(solo, k, ref_channel)?;
    Ok(solo.gather(k, &vec![c; solo.data.dim().1]))
}

/// Per-frequency start frames for Compose; lowest index wins ties.
pub fn compose_starts(solo: &SoloPart, k: usize, ref_channel: usize, score: ComposeScore) -> Result<Vec<usize>> {
    solo.check(k, ref_channel)?;
    let reference = solo.data.index_axis(Axis(2), ref_channel);
    let last = solo.num_frames() - k;
    Ok((0..reference.ncols())
        .map(|f| {
            let column = reference.column(f);
            let mut best = (0, f64::NEG_INFINITY);
            for t in 0..=last {
                let s = match score {
                    ComposeScore::StartFrame => column[t].norm(),
                    ComposeScore::WindowEnergy => (t..t + k).map(|i| column[i].norm_sqr()).sum(),
                };
                if s > best.1 {
                    best = (t, s);
                }
            }
            best.0
        })
        .collect())
}

pub fn select_compose(solo: &SoloPart, k: usize, ref_channel: usize) -> Result<ConvKernel> {
    select_compose_with(solo, k, ref_channel, ComposeScore::StartFrame)
}

pub fn select_compose_with(solo: &SoloPart, k: usize, ref_channel: usize, score: ComposeScore) -> Result<ConvKernel> {
    let starts = compose_starts(solo, k, ref_channel, score)?;
    Ok(solo.gather(k, &starts))
}

/// Per `(f, m)` peak magnitude of a kernel and which cells fall below
/// [`LOW_ENERGY_THRESHOLD`] of the global peak.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEnergyReport {
    pub peak: Array2<f64>,
    pub low_energy: Array2<bool>,
    pub global_peak: f64,
}

impl KernelEnergyReport {
    pub fn num_bins(&self) -> usize {
        self.peak.nrows()
    }

    /// Number of flagged `(f, m)` cells.
    pub fn num_flagged(&self) -> usize {
        self.low_energy.iter().filter(|b| **b).count()
    }

    /// Frequencies with at least one flagged channel.
    pub fn flagged_frequencies(&self) -> Vec<usize> {
        self.low_energy
            .outer_iter()
            .enumerate()
            .filter(|(_, row)| row.iter().any(|b| *b))
            .map(|(f, _)| f)
            .collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.low_energy.iter().all(|b| *b)
    }

    /// CSV rows `frequency,channel,peak,low_energy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency,channel,peak,low_energy\n");
        for ((f, m), p) in self.peak.indexed_iter() {
            out.push_str(&format!("{f},{m},{p:.6e},{}\n", self.low_energy[[f, m]]));
        }
        out
    }
}

pub fn kernel_energy_report(kernel: &ConvKernel) -> KernelEnergyReport {
    let (_, f_len, m_len) = kernel.data().dim();
    let peak = Array2::from_shape_fn((f_len, m_len), |(f, m)| {
        kernel
            .data()
            .index_axis(Axis(1), f)
            .column(m)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    });
    let global_peak = peak.iter().copied().fold(0.0, f64::max);
    let threshold = LOW_ENERGY_THRESHOLD * global_peak;
    let low_energy = if global_peak == 0.0 {
        Array2::from_elem((f_len, m_len), true)
    } else {
        peak.mapv(|p| p < threshold)
    };
    KernelEnergyReport { peak, low_energy, global_peak }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_part(seed: u64, g: usize, f: usize, m: usize) -> SoloPart {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array3::from_shape_fn((g, f, m), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        SoloPart::new(data, "test").unwrap()
    }

    #[test]
    fn random_with_g_equal_k_returns_whole_part() {
        let p = random_part(1, 10, 5, 2);
        let s = select_random(&p, 10, 77).unwrap();
        assert_eq!(s.data(), p.data());
    }

    #[test]
    fn random_is_deterministic() {
        let p = random_part(2, 40, 5, 2);
        assert_eq!(select_random(&p, 10, 3).unwrap(), select_random(&p, 10, 3).unwrap());
    }

    #[test]
    fn too_short_is_rejected() {
        let p = random_part(3, 5, 4, 2);
        for r in [select_random(&p, 6, 0), select_max(&p, 6, 0), select_compose(&p, 6, 0)] {
            assert!(r.unwrap_err().to_string().contains("solo part too short"));
        }
    }

    #[test]
    fn max_finds_single_energetic_frame() {
        let mut data = Array3::zeros((30, 6, 2));
        for f in 0..6 {
            data[[7, f, 0]] = Complex64::new(1.0 / 6f64.sqrt(), 0.0);
        }
        let p = SoloPart::new(data, "impulse").unwrap();
        assert_eq!(max_slice_start(&p, 10, 0).unwrap(), 7);
    }

    #[test]
    fn max_ties_break_low() {
        let p = SoloPart::new(Array3::from_elem((20, 4, 2), Complex64::new(0.5, 0.5)), "flat").unwrap();
        assert_eq!(max_slice_start(&p, 5, 0).unwrap(), 0);
    }

    #[test]
    fn compose_picks_per_frequency_peak() {
        let mut data = Array3::from_elem((80, 5, 2), Complex64::new(0.01, 0.0));
        data[[50, 3, 0]] = Complex64::new(0.0, 2.0);
        let p = SoloPart::new(data, "peak").unwrap();
        let starts = compose_starts(&p, 10, 0, ComposeScore::StartFrame).unwrap();
        assert_eq!(starts[3], 50);
        assert_eq!(starts[0], 0);
    }

    #[test]
    fn compose_with_g_equal_k_returns_whole_part() {
        let p = random_part(4, 10, 6, 3);
        assert_eq!(select_compose(&p, 10, 1).unwrap().data(), p.data());
    }

    #[test]
    fn window_energy_mode_scores_whole_window() {
        // One loud isolated frame at 3 versus a sustained run at 20..24.
        let mut data = Array3::from_elem((40, 1, 1), Complex64::new(0.0, 0.0));
        data[[3, 0, 0]] = Complex64::new(2.0, 0.0);
        for t in 20..24 {
            data[[t, 0, 0]] = Complex64::new(1.5, 0.0);
        }
        let p = SoloPart::new(data, "runs").unwrap();
        assert_eq!(compose_starts(&p, 4, 0, ComposeScore::StartFrame).unwrap(), vec![3]);
        assert_eq!(compose_starts(&p, 4, 0, ComposeScore::WindowEnergy).unwrap(), vec![20]);
    }

    #[test]
    fn energy_report_flags() {
        let zero = ConvKernel::new(Array3::zeros((3, 4, 2))).unwrap();
        let r = kernel_energy_report(&zero);
        assert_eq!(r.flagged_frequencies(), vec![0, 1, 2, 3]);
        assert!(r.is_degenerate());

        let mut data = Array3::from_elem((3, 4, 2), Complex64::new(1.0, 0.0));
        for k in 0..3 {
            for m in 0..2 {
                data[[k, 2, m]] = Complex64::new(0.0, 0.0);
            }
        }
        let r = kernel_energy_report(&ConvKernel::new(data).unwrap());
        assert_eq!(r.flagged_frequencies(), vec![2]);
        assert_eq!(r.num_flagged(), 2);
        assert!(!r.is_degenerate());
        assert!(r.to_csv().lines().count() == 9);
    }

    #[test]
    fn bad_reference_channel() {
        let p = random_part(5, 20, 3, 2);
        assert!(select_max(&p, 4, 2).is_err());
        assert!(select_compose(&p, 4, 2).is_err());
    }
}
