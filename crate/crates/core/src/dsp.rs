//! STFT / iSTFT, phase extraction and log-power spectra.
//!
//! Framing is "valid only": frame `t` covers samples `[t*hop, t*hop + window_len)`,
//! zero-padded to `fft_size`, so `T = 1 + (N - window_len) / hop`. Spectra are
//! one-sided (`F = fft_size/2 + 1`) and use the forward DFT sign `e^{-i w n}`,
//! i.e. a delay of `tau` seconds rotates a bin by `e^{-i 2 pi f tau}`.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, ArrayView1};
use num_complex::Complex64;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMap};

/// Floor applied to magnitudes before the logarithm in [`lps`].
pub const LPS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hann,
    Hamming,
    Rectangular,
}

impl WindowKind {
    /// Periodic (DFT-even) window of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        let n = len as f64;
        (0..len)
            .map(|i| {
                let phase = 2.0 * PI * i as f64 / n;
                match self {
                    WindowKind::Hann => 0.5 - 0.5 * phase.cos(),
                    WindowKind::Hamming => 0.54 - 0.46 * phase.cos(),
                    WindowKind::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

/// Analysis parameters shared by every spectrogram in a pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub window: WindowKind,
    pub sample_rate: u32,
    /// Speed of sound in m/s, used wherever bins are mapped to geometry.
    pub sound_speed: f64,
}

impl Default for StftConfig {
    /// 25 ms periodic-Hann window, 10 ms hop, 512-point FFT at 16 kHz.
    fn default() -> Self {
        Self {
            window_len: 400,
            hop: 160,
            fft_size: 512,
            window: WindowKind::Hann,
            sample_rate: 16_000,
            sound_speed: 343.0,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.window_len == 0 {
            return Err(Error::InvalidConfig("hop and window_len must be positive".into()));
        }
        if !(self.hop <= self.window_len && self.window_len <= self.fft_size) {
            return Err(Error::InvalidConfig(format!(
                "need hop <= window_len <= fft_size, got {} / {} / {}",
                self.hop, self.window_len, self.fft_size
            )));
        }
        if !self.fft_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("fft_size {} must be even", self.fft_size)));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        if !(self.sound_speed.is_finite() && self.sound_speed > 0.0) {
            return Err(Error::InvalidConfig(format!("sound_speed {} must be > 0", self.sound_speed)));
        }
        Ok(())
    }

    /// One-sided bin count `F`.
    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frame count for `samples` input samples, `None` when shorter than a window.
    pub fn num_frames(&self, samples: usize) -> Option<usize> {
        (samples >= self.window_len).then(|| 1 + (samples - self.window_len) / self.hop)
    }

    /// Center frequency of bin `f` in Hz: `f * fs / fft_size`.
    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.fft_size as f64
    }

    pub fn window_coefficients(&self) -> Vec<f64> {
        self.window.coefficients(self.window_len)
    }

    /// Minimum over one hop period of the overlap-added squared window. Zero
    /// means some output samples receive no analysis weight and cannot be
    /// recovered.
    pub fn min_overlap_energy(&self) -> f64 {
        let w = self.window_coefficients();
        (0..self.hop)
            .map(|n| w.iter().skip(n).step_by(self.hop).map(|v| v * v).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Real multichannel signal, `[channels x samples]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveBuffer {
    samples: Array2<f64>,
    sample_rate: u32,
}

impl WaveBuffer {
    pub fn new(samples: Array2<f64>, sample_rate: u32) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "wave buffer needs at least one channel and one sample, got {:?}",
                samples.dim()
            )));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample_rate must be positive".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn from_channels(channels: &[Vec<f64>], sample_rate: u32) -> Result<Self> {
        let n = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != n) {
            return Err(Error::ShapeMismatch("channels have different lengths".into()));
        }
        let flat: Vec<f64> = channels.iter().flatten().copied().collect();
        let samples = Array2::from_shape_vec((channels.len(), n), flat)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Self::new(samples, sample_rate)
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let n = samples.len();
        let samples = Array2::from_shape_vec((1, n), samples)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn into_samples(self) -> Array2<f64> {
        self.samples
    }

    pub fn channel(&self, m: usize) -> ArrayView1<'_, f64> {
        self.samples.row(m)
    }

    pub fn num_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
}

/// Complex one-sided STFT, `[T x F x M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    data: Array3<Complex64>,
    config: StftConfig,
}

impl ComplexSpectrogram {
    pub fn new(data: Array3<Complex64>, config: StftConfig) -> Result<Self> {
        config.validate()?;
        let (t, f, m) = data.dim();
        if f != config.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram has {f} bins, config implies {}",
                config.num_bins()
            )));
        }
        if t == 0 || m == 0 {
            return Err(Error::ShapeMismatch(format!("empty spectrogram {:?}", (t, f, m))));
        }
        Ok(Self { data, config })
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<Complex64> {
        self.data
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn num_frames(&self) -> usize {
        self.data.dim().0
    }

    pub fn num_bins(&self) -> usize {
        self.data.dim().1
    }

    pub fn num_channels(&self) -> usize {
        self.data.dim().2
    }

    /// Single-channel `[T x F]` view.
    pub fn channel(&self, m: usize) -> ndarray::ArrayView2<'_, Complex64> {
        self.data.index_axis(ndarray::Axis(2), m)
    }
}

/// Principal phase in `(-pi, pi]`, with `angle(0) = 0`.
pub fn angle(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        return 0.0;
    }
    let a = z.im.atan2(z.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Wraps any finite phase into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = (x + PI).rem_euclid(two_pi) - PI;
    if r <= -PI {
        r += two_pi;
    }
    r
}

/// Elementwise [`angle`] over a tensor.
pub fn angle_map<D: ndarray::Dimension>(
    z: &ndarray::Array<Complex64, D>,
) -> ndarray::Array<f64, D> {
    z.mapv(angle)
}

/// Unit phasor `z/|z|`, with the zero bin mapped to `1` so that it carries the
/// `angle(0) = 0` convention.
pub(crate) fn unit_phasor(z: Complex64) -> Complex64 {
    let r = z.re.hypot(z.im);
    if r == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(z.re / r, z.im / r)
    }
}

pub fn stft(wave: &WaveBuffer, config: &StftConfig) -> Result<ComplexSpectrogram> {
    config.validate()?;
    let n = wave.len();
    let frames = config.num_frames(n).ok_or(Error::InputTooShort {
        samples: n,
        window_len: config.window_len,
    })?;
    let bins = config.num_bins();
    let channels = wave.num_channels();
    let window = config.window_coefficients();

    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(config.fft_size);
    let mut input = fft.make_input_vec();
    let mut output = fft.make_output_vec();
    let mut scratch = fft.make_scratch_vec();

    let mut data = Array3::<Complex64>::zeros((frames, bins, channels));
    for m in 0..channels {
        let x = wave.channel(m);
        for t in 0..frames {
            let start = t * config.hop;
            input.iter_mut().for_each(|v| *v = 0.0);
            for (i, w) in window.iter().enumerate() {
                input[i] = x[start + i] * w;
            }
            fft.process_with_scratch(&mut input, &mut output, &mut scratch)
                .expect("fft buffer lengths come from the plan");
            for (f, v) in output.iter().enumerate() {
                data[[t, f, m]] = *v;
            }
        }
    }
    ComplexSpectrogram::new(data, *config)
}

/// Weighted overlap-add inverse: each frame is inverse-transformed, windowed
/// again and normalized by the overlap-added squared window. Output length is
/// `window_len + (T - 1) * hop`.
pub fn istft(spec: &ComplexSpectrogram) -> Result<WaveBuffer> {
    let config = spec.config();
    let min_energy = config.min_overlap_energy();
    if min_energy <= 1e-10 {
        return Err(Error::NotInvertible { min_energy });
    }
    let (frames, bins, channels) = spec.data().dim();
    let window = config.window_coefficients();
    let out_len = config.window_len + (frames - 1) * config.hop;

    let mut norm = vec![0.0; out_len];
    for t in 0..frames {
        for (i, w) in window.iter().enumerate() {
            norm[t * config.hop + i] += w * w;
        }
    }

    let mut planner = RealFftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(config.fft_size);
    let mut input = ifft.make_input_vec();
    let mut output = ifft.make_output_vec();
    let mut scratch = ifft.make_scratch_vec();
    let scale = 1.0 / config.fft_size as f64;

    let mut samples = Array2::<f64>::zeros((channels, out_len));
    for m in 0..channels {
        for t in 0..frames {
            for f in 0..bins {
                input[f] = spec.data()[[t, f, m]];
            }
            // A real signal has purely real DC and Nyquist bins.
            input[0].im = 0.0;
            input[bins - 1].im = 0.0;
            ifft.process_with_scratch(&mut input, &mut output, &mut scratch)
                .expect("fft buffer lengths come from the plan");
            let start = t * config.hop;
            for (i, w) in window.iter().enumerate() {
                samples[[m, start + i]] += output[i] * scale * w;
            }
        }
        for (i, d) in norm.iter().enumerate() {
            samples[[m, i]] = if *d > 1e-10 { samples[[m, i]] / d } else { 0.0 };
        }
    }
    WaveBuffer::new(samples, config.sample_rate)
}

/// Log-magnitude spectrum `log(max(|Y|, 1e-8))` of one reference channel.
pub fn lps(spec: &ComplexSpectrogram, ref_channel: usize) -> Result<FeatureMap> {
    if ref_channel >= spec.num_channels() {
        return Err(Error::InvalidConfig(format!(
            "reference channel {ref_channel} out of range for {} channels",
            spec.num_channels()
        )));
    }
    let data = spec.channel(ref_channel).mapv(|z| z.norm().max(LPS_FLOOR).ln());
    Ok(FeatureMap::new(data, FeatureKind::Lps))
}

/// Full linear convolution of two real sequences via FFT.
pub fn fft_convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut a = fwd.make_input_vec();
    a[..x.len()].copy_from_slice(x);
    let mut b = fwd.make_input_vec();
    b[..h.len()].copy_from_slice(h);
    let mut fa = fwd.make_output_vec();
    let mut fb = fwd.make_output_vec();
    fwd.process(&mut a, &mut fa).expect("plan-sized buffers");
    fwd.process(&mut b, &mut fb).expect("plan-sized buffers");
    for (p, q) in fa.iter_mut().zip(&fb) {
        *p *= q;
    }
    let last = fa.len() - 1;
    fa[0].im = 0.0;
    fa[last].im = 0.0;
    let mut out = inv.make_output_vec();
    inv.process(&mut fa, &mut out).expect("plan-sized buffers");
    let scale = 1.0 / n as f64;
    out.truncate(out_len);
    out.iter_mut().for_each(|v| *v *= scale);
    out
}
