//! Spatial features: IPD, target phase differences, 3D-SF, and the
//! kernel-convolved phase features RIR-SF and Solo-SF.
//!
//! RIR-SF and Solo-SF share one primitive, [`phase_convolve`]: the mixture is
//! correlated along time with the conjugate of a `K`-frame complex kernel,
//! independently per frequency and channel. When the kernel and the dominant
//! source share a room response, the per-channel phase patterns cancel and the
//! interchannel difference of the resulting phases approaches zero.
//!
//! Every map is reduced over the pair set in list order, so results do not
//! depend on scheduling.

use std::f64::consts::PI;

use ndarray::{concatenate, Array1, Array2, Array3, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{angle, unit_phasor, ComplexSpectrogram, StftConfig};
use crate::error::{Error, Result};
use crate::select::kernel_energy_report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MicPair {
    pub m1: usize,
    pub m2: usize,
}

impl MicPair {
    pub fn new(m1: usize, m2: usize) -> Result<Self> {
        if m1 == m2 {
            return Err(Error::InvalidConfig(format!("microphone pair ({m1}, {m2}) repeats a channel")));
        }
        Ok(Self { m1, m2 })
    }

    fn check(&self, channels: usize) -> Result<()> {
        if self.m1 >= channels || self.m2 >= channels {
            return Err(Error::InvalidConfig(format!(
                "pair ({}, {}) out of range for {channels} channels",
                self.m1, self.m2
            )));
        }
        Ok(())
    }

    fn unordered(&self) -> (usize, usize) {
        (self.m1.min(self.m2), self.m1.max(self.m2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Sum,
    #[default]
    Mean,
}

/// Ordered microphone pairs and how their per-pair maps are combined.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pairs: Vec<MicPair>,
    aggregation: Aggregation,
}

impl PairSet {
    pub fn new(pairs: Vec<MicPair>, aggregation: Aggregation) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidConfig("pair set is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &pairs {
            if p.m1 == p.m2 {
                return Err(Error::InvalidConfig(format!("pair ({}, {}) repeats a channel", p.m1, p.m2)));
            }
            if !seen.insert(p.unordered()) {
                return Err(Error::InvalidConfig(format!("duplicate pair ({}, {})", p.m1, p.m2)));
            }
        }
        Ok(Self { pairs, aggregation })
    }

    /// Every unordered pair `m1 < m2` in lexicographic order.
    pub fn all_pairs(channels: usize, aggregation: Aggregation) -> Result<Self> {
        let pairs = (0..channels)
            .flat_map(|a| (a + 1..channels).map(move |b| MicPair { m1: a, m2: b }))
            .collect();
        Self::new(pairs, aggregation)
    }

    pub fn pairs(&self) -> &[MicPair] {
        &self.pairs
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn validate_for(&self, channels: usize) -> Result<()> {
        self.pairs.iter().try_for_each(|p| p.check(channels))
    }

    fn finish(&self, acc: f64) -> f64 {
        match self.aggregation {
            Aggregation::Sum => acc,
            Aggregation::Mean => acc / self.pairs.len() as f64,
        }
    }
}

/// Target position relative to the array origin, as seen by a depth camera.
///
/// `mic_offsets` are signed positions of each microphone along the array axis
/// measured from the origin; azimuth is measured from that axis in the
/// horizontal plane, so `cos(azimuth) * cos(elevation)` is the cosine of the
/// angle between the axis and the source direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceBearing {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub mic_offsets: Vec<f64>,
}

impl SourceBearing {
    /// Source-to-microphone distances by the law of cosines.
    pub fn mic_distances(&self) -> Result<Vec<f64>> {
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return Err(Error::Geometry(format!("source distance {} must be > 0", self.distance)));
        }
        let cos_gamma = self.azimuth.cos() * self.elevation.cos();
        self.mic_offsets
            .iter()
            .map(|&d_om| {
                let r2 = d_om * d_om + self.distance * self.distance
                    - 2.0 * d_om * self.distance * cos_gamma;
                let scale = d_om * d_om + self.distance * self.distance;
                if !r2.is_finite() || r2 < -1e-12 * scale {
                    Err(Error::Geometry(format!(
                        "negative squared distance {r2} for mic offset {d_om}"
                    )))
                } else {
                    Ok(r2.max(0.0).sqrt())
                }
            })
            .collect()
    }
}

/// Complex `[K x F x M]` kernel: a truncated RIR spectrum or a solo segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    data: Array3<Complex64>,
}

impl ConvKernel {
    pub fn new(data: Array3<Complex64>) -> Result<Self> {
        let (k, f, m) = data.dim();
        if k == 0 || f == 0 || m == 0 {
            return Err(Error::ShapeMismatch(format!("empty kernel {:?}", (k, f, m))));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<Complex64> {
        self.data
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
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    #[serde(rename = "3d_sf")]
    Sf3d,
    RirSf,
    SoloSf,
    Lps,
    Composite,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Sf3d => "3d_sf",
            FeatureKind::RirSf => "rir_sf",
            FeatureKind::SoloSf => "solo_sf",
            FeatureKind::Lps => "lps",
            FeatureKind::Composite => "composite",
        }
    }

    pub fn is_spatial(self) -> bool {
        matches!(self, FeatureKind::Sf3d | FeatureKind::RirSf | FeatureKind::SoloSf)
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3d_sf" | "sf3d" => Ok(FeatureKind::Sf3d),
            "rir_sf" => Ok(FeatureKind::RirSf),
            "solo_sf" => Ok(FeatureKind::SoloSf),
            "lps" => Ok(FeatureKind::Lps),
            "composite" => Ok(FeatureKind::Composite),
            other => Err(Error::InvalidConfig(format!("unknown feature kind '{other}'"))),
        }
    }
}

/// Real `[T x F]` feature map (`[T x 2F]` for composites).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    data: Array2<f64>,
    kind: FeatureKind,
}

impl FeatureMap {
    pub fn new(data: Array2<f64>, kind: FeatureKind) -> Self {
        Self { data, kind }
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }
}

/// Interchannel phase difference `angle(Y_m1) - angle(Y_m2)` wrapped to `(-pi, pi]`.
pub fn compute_ipd(y: &ComplexSpectrogram, pair: MicPair) -> Result<Array2<f64>> {
    pair.check(y.num_channels())?;
    let (a, b) = (y.channel(pair.m1), y.channel(pair.m2));
    Ok(ndarray::Zip::from(&a)
        .and(&b)
        .map_collect(|p, q| angle(unit_phasor(*p) * unit_phasor(*q).conj())))
}

/// Target phase difference from source geometry, one value per bin.
///
/// With the forward DFT sign used throughout, a path of length `d` rotates a
/// bin by `-2 pi f d / c`; the pair difference is therefore
/// `2 pi f_hz (d_m2 - d_m1) / c`, with `f_hz = f * fs / fft_size`.
pub fn compute_tpd_3d(
    bearing: &SourceBearing,
    config: &StftConfig,
    pair: MicPair,
    bins: usize,
) -> Result<Array1<f64>> {
    if bins < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 bins, got {bins}")));
    }
    pair.check(bearing.mic_offsets.len())?;
    config.validate()?;
    let d = bearing.mic_distances()?;
    let delta = d[pair.m2] - d[pair.m1];
    Ok(Array1::from_shape_fn(bins, |f| {
        2.0 * PI * config.bin_hz(f) * delta / config.sound_speed
    }))
}

/// Target phase difference read off the direct-wave (first) frame of a kernel.
pub fn compute_tpd_from_rir(r: &ConvKernel, pair: MicPair) -> Result<Array1<f64>> {
    pair.check(r.num_channels())?;
    let frame = r.data().index_axis(Axis(0), 0);
    Ok(Array1::from_shape_fn(r.num_bins(), |f| {
        angle(unit_phasor(frame[[f, pair.m1]]) * unit_phasor(frame[[f, pair.m2]]).conj())
    }))
}

/// `cos(IPD - TPD)` per pair, aggregated. `ipds[i]` and `tpds[i]` belong to
/// `pairs.pairs()[i]`; each TPD is broadcast along time.
pub fn compute_3d_sf(ipds: &[Array2<f64>], tpds: &[Array1<f64>], pairs: &PairSet) -> Result<FeatureMap> {
    if ipds.len() != pairs.len() || tpds.len() != pairs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} pairs but {} IPD and {} TPD maps",
            pairs.len(),
            ipds.len(),
            tpds.len()
        )));
    }
    let (t, f) = ipds[0].dim();
    for (ipd, tpd) in ipds.iter().zip(tpds) {
        if ipd.dim() != (t, f) || tpd.len() != f {
            return Err(Error::ShapeMismatch(format!(
                "IPD {:?} / TPD {} do not match {:?}",
                ipd.dim(),
                tpd.len(),
                (t, f)
            )));
        }
    }
    let data = Array2::from_shape_fn((t, f), |(ti, fi)| {
        let acc = ipds
            .iter()
            .zip(tpds)
            .fold(0.0, |acc, (ipd, tpd)| acc + (ipd[[ti, fi]] - tpd[fi]).cos());
        pairs.finish(acc)
    });
    Ok(FeatureMap::new(data, FeatureKind::Sf3d))
}

/// 3D-SF straight from a spectrogram and a known source bearing.
pub fn spatial_feature_3d(y: &ComplexSpectrogram, bearing: &SourceBearing, pairs: &PairSet) -> Result<FeatureMap> {
    pairs.validate_for(y.num_channels())?;
    let mut ipds = Vec::with_capacity(pairs.len());
    let mut tpds = Vec::with_capacity(pairs.len());
    for &p in pairs.pairs() {
        ipds.push(compute_ipd(y, p)?);
        tpds.push(compute_tpd_3d(bearing, y.config(), p, y.num_bins())?);
    }
    compute_3d_sf(&ipds, &tpds, pairs)
}

fn check_kernel(y: &ComplexSpectrogram, kernel: &ConvKernel) -> Result<()> {
    let (t, f, m) = y.data().dim();
    let (k, kf, km) = kernel.data().dim();
    if kf != f || km != m {
        return Err(Error::ShapeMismatch(format!(
            "kernel is {k}x{kf}x{km}, signal is {t}x{f}x{m}"
        )));
    }
    if k > t {
        return Err(Error::KernelTooLong { kernel: k, frames: t });
    }
    Ok(())
}

/// `sum_k Y[t-k, f, m] * conj(kernel[k, f, m])` with frames before the start
/// treated as zero.
pub fn correlate(y: &ComplexSpectrogram, kernel: &ConvKernel) -> Result<Array3<Complex64>> {
    check_kernel(y, kernel)?;
    let (t_len, f_len, m_len) = y.data().dim();
    let yd = y.data().as_standard_layout();
    let kd: Vec<Complex64> = kernel.data().iter().map(|z| z.conj()).collect();
    let mut out = Array3::<Complex64>::zeros((t_len, f_len, m_len));
    // Row-major [T, F, M]: one (t, k) step touches contiguous F*M slices.
    let ys = yd.as_slice().expect("spectrogram is standard layout");
    let ks = kd.as_slice();
    let os = out.as_slice_mut().expect("fresh array");
    let plane = f_len * m_len;
    for t in 0..t_len {
        let dst = &mut os[t * plane..(t + 1) * plane];
        for k in 0..kernel.num_frames().min(t + 1) {
            let src = &ys[(t - k) * plane..(t - k + 1) * plane];
            let ker = &ks[k * plane..(k + 1) * plane];
            for ((d, s), c) in dst.iter_mut().zip(src).zip(ker) {
                *d += s * c;
            }
        }
    }
    Ok(out)
}

/// Phase of the kernel-correlated spectrogram, `[T x F x M]`. This is the
/// RIR-convolved phase when the kernel is a truncated RIR spectrum and the
/// Solo-convolved phase when it is a solo segment.
pub fn phase_convolve(y: &ComplexSpectrogram, kernel: &ConvKernel) -> Result<Array3<f64>> {
    Ok(correlate(y, kernel)?.mapv(angle))
}

/// `cos(angle(a) - angle(b))` via `a * conj(b)`; exactly 1 when `a == b`.
fn phase_cosine(a: Complex64, b: Complex64) -> f64 {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let a = if a == zero { one } else { a };
    let b = if b == zero { one } else { b };
    let z = a * b.conj();
    let r = z.re.hypot(z.im);
    if r == 0.0 {
        1.0
    } else {
        (z.re / r).clamp(-1.0, 1.0)
    }
}

fn convolved_phase_feature(
    y: &ComplexSpectrogram,
    kernel: &ConvKernel,
    pairs: &PairSet,
    kind: FeatureKind,
) -> Result<FeatureMap> {
    pairs.validate_for(y.num_channels())?;
    let conv = correlate(y, kernel)?;
    let (t, f, _) = conv.dim();
    let data = Array2::from_shape_fn((t, f), |(ti, fi)| {
        let acc = pairs
            .pairs()
            .iter()
            .fold(0.0, |acc, p| acc + phase_cosine(conv[[ti, fi, p.m1]], conv[[ti, fi, p.m2]]));
        pairs.finish(acc)
    });
    Ok(FeatureMap::new(data, kind))
}

/// `cos(RP_m1 - RP_m2)` with the RIR-convolved phase, aggregated over pairs.
pub fn compute_rir_sf(y: &ComplexSpectrogram, r: &ConvKernel, pairs: &PairSet) -> Result<FeatureMap> {
    convolved_phase_feature(y, r, pairs, FeatureKind::RirSf)
}

/// `cos(SP_m1 - SP_m2)` with the solo-convolved phase, aggregated over pairs.
///
/// Frequencies where the kernel carries no energy yield zero correlations,
/// whose phase is taken as 0; such bins read as perfectly coherent. A warning
/// is logged when that happens.
pub fn compute_solo_sf(y: &ComplexSpectrogram, s: &ConvKernel, pairs: &PairSet) -> Result<FeatureMap> {
    let report = kernel_energy_report(s);
    if report.is_degenerate() {
        log::warn!("degenerate kernel: solo segment has no energy at any frequency");
    } else if report.num_flagged() > 0 {
        log::info!(
            "low-energy kernel: {} of {} frequencies below {:.0e} of peak",
            report.flagged_frequencies().len(),
            report.num_bins(),
            crate::select::LOW_ENERGY_THRESHOLD
        );
    }
    convolved_phase_feature(y, s, pairs, FeatureKind::SoloSf)
}

/// `[LPS | SF]` concatenated along frequency.
pub fn assemble_composite(lps: &FeatureMap, sf: &FeatureMap) -> Result<FeatureMap> {
    if lps.dim() != sf.dim() {
        return Err(Error::ShapeMismatch(format!(
            "LPS is {:?}, spatial feature is {:?}",
            lps.dim(),
            sf.dim()
        )));
    }
    let data = concatenate(Axis(1), &[lps.data().view(), sf.data().view()])
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok(FeatureMap::new(data, FeatureKind::Composite))
}
