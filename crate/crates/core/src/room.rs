//! Shoebox room simulation with the image-source method, and two-speaker
//! mixture synthesis following the simulated-meeting protocol: rooms between
//! 3x3x2.5 m and 8x6x4 m, an 8-element nonuniform linear array, RT60 drawn
//! from a weak or strong reverberation band, SIR in [-6, 6] dB and overlap
//! ratio in [0.5, 1].

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{fft_convolve, stft, StftConfig, WaveBuffer};
use crate::error::{Error, Result};
use crate::features::{ConvKernel, SourceBearing};
use crate::speech::{synth_speech, Voice};

/// Gaps between adjacent microphones of the default array, in meters.
pub const DEFAULT_ARRAY_SPACINGS: [f64; 7] = [0.15, 0.10, 0.05, 0.20, 0.05, 0.10, 0.15];

/// Length of the windowed-sinc fractional-delay filter.
pub const SINC_TAPS: usize = 81;

/// Corner frequency of the high-pass applied to reverberant RIRs.
pub const RIR_HIGHPASS_HZ: f64 = 100.0;

/// Smallest and largest protocol room, in meters.
pub const ROOM_MIN: [f64; 3] = [3.0, 3.0, 2.5];
pub const ROOM_MAX: [f64; 3] = [8.0, 6.0, 4.0];

/// Minimum distance from any wall for sampled positions.
pub const WALL_CLEARANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AbsorptionModel {
    /// `alpha = 0.161 V / (T S)`.
    Sabine,
    /// `alpha = 1 - exp(-0.161 V / (T S))`.
    Eyring,
    /// Inverts the decay the image method actually produces in the given
    /// shoebox; see [`rt60_to_absorption_calibrated`].
    #[default]
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionEstimate {
    pub alpha: f64,
    /// Set when the formula exceeded 1 and was clamped.
    pub clamped: bool,
}

fn volume_and_area(dims: [f64; 3]) -> (f64, f64) {
    let [x, y, z] = dims;
    (x * y * z, 2.0 * (x * y + y * z + x * z))
}

fn check_rt60(dims: [f64; 3], rt60: f64) -> Result<()> {
    if !(rt60.is_finite() && rt60 > 0.0) {
        return Err(Error::InvalidConfig(format!("rt60 {rt60} must be > 0")));
    }
    if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::Geometry(format!("room dimensions {dims:?} must be positive")));
    }
    Ok(())
}

fn clamp_alpha(alpha: f64) -> AbsorptionEstimate {
    if alpha > 1.0 {
        log::warn!("absorption {alpha:.3} exceeds 1 for the requested RT60; clamping to 1");
        AbsorptionEstimate { alpha: 1.0, clamped: true }
    } else {
        AbsorptionEstimate { alpha, clamped: false }
    }
}

/// Sabine inversion for a uniform wall absorption coefficient.
pub fn rt60_to_absorption(room_dims: [f64; 3], rt60: f64) -> Result<AbsorptionEstimate> {
    check_rt60(room_dims, rt60)?;
    let (v, s) = volume_and_area(room_dims);
    Ok(clamp_alpha(0.161 * v / (rt60 * s)))
}

/// Eyring inversion for a uniform wall absorption coefficient.
pub fn rt60_to_absorption_eyring(room_dims: [f64; 3], rt60: f64) -> Result<AbsorptionEstimate> {
    check_rt60(room_dims, rt60)?;
    let (v, s) = volume_and_area(room_dims);
    Ok(clamp_alpha(1.0 - (-0.161 * v / (rt60 * s)).exp()))
}

/// RT60 of the image-method decay model at unit `-ln(1 - alpha)`.
///
/// An image reached along direction `u` after time `t` has undergone about
/// `c t sum_a |u_a| / L_a` reflections, so its energy decays at a rate
/// proportional to `g(u) = sum_a |u_a| / L_a`. Averaging over directions gives
/// the energy decay curve `mean_u exp(-c g t) / (c g)`; its -5..-25 dB slope,
/// extrapolated to -60 dB, scales as `1 / -ln(1 - alpha)`.
fn unit_decay_rt60(room_dims: [f64; 3], sound_speed: f64) -> f64 {
    const GRID: usize = 64;
    const STEPS: usize = 800;
    let mut rates = Vec::with_capacity(GRID * GRID);
    for i in 0..GRID {
        let z = (i as f64 + 0.5) / GRID as f64;
        let rho = (1.0 - z * z).sqrt();
        for j in 0..GRID {
            let phi = (j as f64 + 0.5) / GRID as f64 * PI / 2.0;
            let u = [rho * phi.cos(), rho * phi.sin(), z];
            rates.push(sound_speed * (0..3).map(|a| u[a] / room_dims[a]).sum::<f64>());
        }
    }
    let slowest = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let horizon = 8.0 / slowest;
    let edc = |t: f64| rates.iter().map(|g| (-g * t).exp() / g).sum::<f64>();
    let e0 = edc(0.0);

    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..STEPS {
        let t = horizon * k as f64 / STEPS as f64;
        let db = 10.0 * (edc(t) / e0).log10();
        if (-25.0..=-5.0).contains(&db) {
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

/// Absorption whose image-method decay reaches `rt60`. In a shoebox, grazing
/// paths along the long axis hit walls less often than the diffuse-field
/// formulas assume, which stretches the tail of short responses.
pub fn rt60_to_absorption_calibrated(room_dims: [f64; 3], rt60: f64, sound_speed: f64) -> Result<AbsorptionEstimate> {
    check_rt60(room_dims, rt60)?;
    let kappa = unit_decay_rt60(room_dims, sound_speed) / rt60;
    Ok(clamp_alpha(1.0 - (-kappa).exp()))
}

/// Image order whose reflections fill a sphere of radius `c * seconds`.
pub fn sufficient_image_order(room_dims: [f64; 3], seconds: f64, sound_speed: f64) -> usize {
    let inv: f64 = room_dims.iter().map(|d| 1.0 / (d * d)).sum();
    (sound_speed * seconds * inv.sqrt()).ceil() as usize + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rt60Band {
    Weak,
    Strong,
}

impl Rt60Band {
    pub fn range(self) -> (f64, f64) {
        match self {
            Rt60Band::Weak => (0.1, 0.6),
            Rt60Band::Strong => (0.5, 0.7),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rt60Band::Weak => "weak",
            Rt60Band::Strong => "strong",
        }
    }
}

impl std::str::FromStr for Rt60Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weak" => Ok(Rt60Band::Weak),
            "strong" => Ok(Rt60Band::Strong),
            other => Err(Error::InvalidConfig(format!("unknown rt60 band '{other}' (weak|strong)"))),
        }
    }
}

/// Everything needed to render the room responses of one simulated meeting.
///
/// The array is linear, centered on `array_origin`, and oriented at
/// `array_azimuth` in the horizontal plane. `rt60_target = 0` means anechoic.
/// `source_positions[0]` is the target speaker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomScenario {
    pub room_dims: [f64; 3],
    pub rt60_target: f64,
    pub array_origin: [f64; 3],
    pub array_azimuth: f64,
    pub array_spacings: Vec<f64>,
    pub source_positions: Vec<[f64; 3]>,
    pub max_image_order: usize,
    /// RIR length in seconds; the direct path of every source is always kept.
    pub rir_seconds: f64,
    #[serde(default)]
    pub absorption_model: AbsorptionModel,
    pub sound_speed: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl RoomScenario {
    /// Anechoic room with the default array; handy for geometry checks.
    pub fn anechoic(room_dims: [f64; 3], array_origin: [f64; 3], array_azimuth: f64, sources: Vec<[f64; 3]>) -> Self {
        Self {
            room_dims,
            rt60_target: 0.0,
            array_origin,
            array_azimuth,
            array_spacings: DEFAULT_ARRAY_SPACINGS.to_vec(),
            source_positions: sources,
            max_image_order: 0,
            rir_seconds: 0.0,
            absorption_model: AbsorptionModel::default(),
            sound_speed: 343.0,
            sample_rate: 16_000,
            seed: 0,
        }
    }

    pub fn num_mics(&self) -> usize {
        self.array_spacings.len() + 1
    }

    /// Signed positions of the microphones along the array axis, relative to
    /// the array center.
    pub fn mic_offsets(&self) -> Vec<f64> {
        let mut along = vec![0.0];
        for s in &self.array_spacings {
            along.push(along.last().unwrap() + s);
        }
        let center = along.last().unwrap() / 2.0;
        along.iter().map(|p| p - center).collect()
    }

    fn axis(&self) -> [f64; 3] {
        [self.array_azimuth.cos(), self.array_azimuth.sin(), 0.0]
    }

    pub fn mic_positions(&self) -> Vec<[f64; 3]> {
        let u = self.axis();
        self.mic_offsets()
            .iter()
            .map(|o| std::array::from_fn(|i| self.array_origin[i] + o * u[i]))
            .collect()
    }

    fn inside(&self, p: &[f64; 3]) -> bool {
        p.iter().zip(&self.room_dims).all(|(c, d)| *c > 0.0 && c < d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.room_dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Geometry(format!("room dimensions {:?} must be positive", self.room_dims)));
        }
        if self.array_spacings.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Geometry("array spacings must be positive".into()));
        }
        if self.sound_speed.is_nan() || self.sound_speed <= 0.0 || self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sound speed and sample rate must be positive".into()));
        }
        if !(self.rt60_target >= 0.0 && self.rir_seconds >= 0.0) {
            return Err(Error::InvalidConfig("rt60_target and rir_seconds must be >= 0".into()));
        }
        for (i, m) in self.mic_positions().iter().enumerate() {
            if !self.inside(m) {
                return Err(Error::Geometry(format!("microphone {i} at {m:?} is outside the room")));
            }
        }
        for (i, p) in self.source_positions.iter().enumerate() {
            if !self.inside(p) {
                return Err(Error::Geometry(format!("source {i} at {p:?} is outside the room")));
            }
        }
        Ok(())
    }

    /// Wall absorption realizing `rt60_target`; 1 when anechoic.
    pub fn absorption(&self) -> Result<AbsorptionEstimate> {
        if self.rt60_target == 0.0 || self.max_image_order == 0 {
            return Ok(AbsorptionEstimate { alpha: 1.0, clamped: false });
        }
        match self.absorption_model {
            AbsorptionModel::Sabine => rt60_to_absorption(self.room_dims, self.rt60_target),
            AbsorptionModel::Eyring => rt60_to_absorption_eyring(self.room_dims, self.rt60_target),
            AbsorptionModel::Calibrated => {
                rt60_to_absorption_calibrated(self.room_dims, self.rt60_target, self.sound_speed)
            }
        }
    }

    /// Bearing of a source as a depth camera at the array center would report it.
    pub fn bearing(&self, source: usize) -> Result<SourceBearing> {
        let p = self
            .source_positions
            .get(source)
            .ok_or_else(|| Error::InvalidConfig(format!("no source {source}")))?;
        let v: [f64; 3] = std::array::from_fn(|i| p[i] - self.array_origin[i]);
        let distance = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let elevation = (v[2] / distance).asin();
        let u = self.axis();
        let along = v[0] * u[0] + v[1] * u[1];
        let across = -v[0] * u[1] + v[1] * u[0];
        Ok(SourceBearing { azimuth: across.atan2(along), elevation, distance, mic_offsets: self.mic_offsets() })
    }

    /// RIR length in taps: `rir_seconds`, extended so every direct path and
    /// its full interpolation filter fit.
    pub fn rir_len(&self) -> usize {
        let fs = self.sample_rate as f64;
        let mics = self.mic_positions();
        let farthest = self
            .source_positions
            .iter()
            .flat_map(|s| mics.iter().map(move |m| dist(s, m)))
            .fold(0.0, f64::max);
        let direct = (farthest / self.sound_speed * fs).ceil() as usize + SINC_TAPS / 2 + 1;
        ((self.rir_seconds * fs).ceil() as usize).max(direct)
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Per-microphone impulse responses, `[M x L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RirTimeDomain {
    pub taps: Array2<f64>,
    pub sample_rate: u32,
}

impl RirTimeDomain {
    pub fn num_mics(&self) -> usize {
        self.taps.nrows()
    }

    pub fn len(&self) -> usize {
        self.taps.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

/// Per-tap constants of the windowed-sinc filter: the window phase step
/// `cos`/`sin` of `2 pi j / SINC_TAPS`, and the sign of `sin(pi (x0 + j))`.
struct SincTable {
    cos: [f64; SINC_TAPS],
    sin: [f64; SINC_TAPS],
    sign: [f64; SINC_TAPS],
}

impl SincTable {
    fn new() -> Self {
        let step = 2.0 * PI / SINC_TAPS as f64;
        Self {
            cos: std::array::from_fn(|j| (step * j as f64).cos()),
            sin: std::array::from_fn(|j| (step * j as f64).sin()),
            sign: std::array::from_fn(|j| if j % 2 == 0 { 1.0 } else { -1.0 }),
        }
    }

    /// Adds a Hann-windowed sinc centered at fractional tap `delay`.
    fn add_impulse(&self, out: &mut [f64], delay: f64, gain: f64) {
        let half = (SINC_TAPS / 2) as isize;
        let center = delay.round() as isize;
        let frac = delay - center as f64;
        if frac == 0.0 {
            if center >= 0 && (center as usize) < out.len() {
                out[center as usize] += gain;
            }
            return;
        }
        let first = center - half;
        let x0 = first as f64 - delay;
        let sin0 = (PI * x0).sin();
        let phase = 2.0 * PI * x0 / SINC_TAPS as f64;
        let (c0, s0) = (phase.cos(), phase.sin());

        let lo = (-first).max(0) as usize;
        let hi = ((out.len() as isize - first).min(SINC_TAPS as isize)).max(0) as usize;
        if lo >= hi {
            return;
        }
        let dst = &mut out[(first + lo as isize) as usize..(first + hi as isize) as usize];
        for (j, o) in (lo..hi).zip(dst.iter_mut()) {
            let x = x0 + j as f64;
            let window = 0.5 * (1.0 + c0 * self.cos[j] - s0 * self.sin[j]);
            *o += gain * window * self.sign[j] * sin0 / (PI * x);
        }
    }
}

/// Second-order high-pass at `cutoff_hz`, run in place. Image amplitudes are
/// all positive, so without it a growing DC term stretches the decay tail.
fn highpass_in_place(x: &mut [f64], cutoff_hz: f64, fs: f64) {
    let w = 2.0 * PI * cutoff_hz / fs;
    let r1 = (-w).exp();
    let b1 = 2.0 * r1 * w.cos();
    let b2 = -r1 * r1;
    let a1 = -(1.0 + r1);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for v in x.iter_mut() {
        let y = *v + a1 * x1 + r1 * x2 + b1 * y1 + b2 * y2;
        x2 = x1;
        x1 = *v;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

/// Image positions and reflection counts along one axis.
fn axis_images(src: f64, len: f64, order: usize) -> Vec<(f64, usize)> {
    let n = order as i64;
    let mut out = Vec::new();
    for i in -n..=n {
        for q in 0..2i64 {
            let refl = ((i - q).abs() + i.abs()) as usize;
            if refl <= order {
                let pos = (1 - 2 * q) as f64 * src + 2.0 * i as f64 * len;
                out.push((pos, refl));
            }
        }
    }
    out
}

/// Image-source RIR from `source` to every microphone. Each image contributes
/// `beta^r / (4 pi d)` at fractional delay `d / c * fs`, with
/// `beta = sqrt(1 - alpha)` and `r` its reflection count. Reverberant
/// responses are high-passed at [`RIR_HIGHPASS_HZ`].
pub fn simulate_rir(scenario: &RoomScenario, source: usize) -> Result<RirTimeDomain> {
    scenario.validate()?;
    let src = *scenario
        .source_positions
        .get(source)
        .ok_or_else(|| Error::InvalidConfig(format!("no source {source}")))?;
    let alpha = scenario.absorption()?.alpha;
    let beta = (1.0 - alpha).max(0.0).sqrt();
    let order = if alpha >= 1.0 { 0 } else { scenario.max_image_order };

    let fs = scenario.sample_rate as f64;
    let c = scenario.sound_speed;
    let len = scenario.rir_len();
    let mics = scenario.mic_positions();
    let max_path = (len + SINC_TAPS / 2) as f64 / fs * c;

    let center = scenario.array_origin;
    let reach = max_path + scenario.array_spacings.iter().sum::<f64>();
    let per_axis: Vec<Vec<(f64, usize)>> = (0..3).map(|a| axis_images(src[a], scenario.room_dims[a], order)).collect();
    let beta_pow: Vec<f64> = (0..=3 * order).map(|r| beta.powi(r as i32)).collect();

    let sinc = SincTable::new();
    let mut taps = Array2::<f64>::zeros((mics.len(), len));
    for &(x, rx) in &per_axis[0] {
        let dx = x - center[0];
        if dx.abs() > reach {
            continue;
        }
        for &(y, ry) in &per_axis[1] {
            let dy = y - center[1];
            if rx + ry > order || dx * dx + dy * dy > reach * reach {
                continue;
            }
            for &(z, rz) in &per_axis[2] {
                let refl = rx + ry + rz;
                let dz = z - center[2];
                if refl > order || dx * dx + dy * dy + dz * dz > reach * reach {
                    continue;
                }
                let image = [x, y, z];
                for (m, mic) in mics.iter().enumerate() {
                    let d = dist(&image, mic);
                    if d > max_path {
                        continue;
                    }
                    let gain = beta_pow[refl] / (4.0 * PI * d.max(1e-3));
                    let mut row = taps.row_mut(m);
                    sinc.add_impulse(row.as_slice_mut().expect("row-major"), d / c * fs, gain);
                }
            }
        }
    }
    if order > 0 {
        for mut row in taps.rows_mut() {
            highpass_in_place(row.as_slice_mut().expect("row-major"), RIR_HIGHPASS_HZ, fs);
        }
    }
    Ok(RirTimeDomain { taps, sample_rate: scenario.sample_rate })
}

/// First `k` STFT frames of a RIR under the signal-path analysis config.
///
/// The RIR is shifted so that frame 0 is centered on the direct path, taken
/// as the earliest per-mic magnitude peak. Lag 0 then holds the direct wave
/// near the window peak, whatever the source distance; the common shift is
/// the same on every channel and drops out of interchannel phase differences.
pub fn rir_to_kernel(rir: &RirTimeDomain, config: &StftConfig, k: usize) -> Result<ConvKernel> {
    config.validate()?;
    if k == 0 {
        return Err(Error::InvalidConfig("kernel length must be at least one frame".into()));
    }
    if rir.is_empty() || rir.num_mics() == 0 {
        return Err(Error::InvalidInput("empty impulse response".into()));
    }
    if rir.len() < config.window_len {
        log::warn!(
            "RIR has {} taps, shorter than one {}-sample window; zero-padding",
            rir.len(),
            config.window_len
        );
    }
    let onset = direct_path_tap(rir);
    let lead = config.window_len / 2;
    let needed = config.window_len + (k - 1) * config.hop;
    // Output tap n reads input tap n + onset - lead.
    let (dst0, src0) = if onset >= lead { (0, onset - lead) } else { (lead - onset, 0) };
    let used = (rir.len() - src0).min(needed - dst0);
    let mut taps = Array2::zeros((rir.num_mics(), needed));
    taps.slice_mut(ndarray::s![.., dst0..dst0 + used])
        .assign(&rir.taps.slice(ndarray::s![.., src0..src0 + used]));
    let spec = stft(&WaveBuffer::new(taps, rir.sample_rate)?, config)?;
    ConvKernel::new(spec.into_data())
}

/// Earliest per-mic tap of maximum magnitude; lowest index on ties.
pub fn direct_path_tap(rir: &RirTimeDomain) -> usize {
    rir.taps
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = (0, f64::NEG_INFINITY);
            for (i, v) in row.iter().enumerate() {
                if v.abs() > best.1 {
                    best = (i, v.abs());
                }
            }
            best.0
        })
        .min()
        .unwrap_or(0)
}

/// SIR, overlap and placement seed of one mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub sir_db: f64,
    pub overlap_ratio: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureResult {
    pub mixture: WaveBuffer,
    pub target_image: WaveBuffer,
    /// Already scaled to the requested SIR.
    pub interference_image: WaveBuffer,
    pub target_rir: RirTimeDomain,
    /// Target solo part rendered through `target_rir`, when attached.
    pub solo_image: Option<WaveBuffer>,
    pub scenario: RoomScenario,
    pub spec: MixtureSpec,
    /// Sample range `[start, end)` of the interference in the dry timeline.
    pub overlap: (usize, usize),
    pub interference_gain: f64,
}

impl MixtureResult {
    /// Renders a dry solo recording of the target through the same RIR and
    /// keeps the first `solo_dry.len()` samples.
    pub fn attach_solo(&mut self, solo_dry: &[f64]) -> Result<()> {
        if solo_dry.is_empty() {
            return Err(Error::InvalidInput("empty solo recording".into()));
        }
        self.solo_image = Some(render(solo_dry, &self.target_rir, solo_dry.len())?);
        Ok(())
    }
}

fn render(dry: &[f64], rir: &RirTimeDomain, len: usize) -> Result<WaveBuffer> {
    let mut out = Array2::<f64>::zeros((rir.num_mics(), len));
    for m in 0..rir.num_mics() {
        let wet = fft_convolve(dry, rir.taps.row(m).as_slice().expect("row-major"));
        let n = wet.len().min(len);
        out.row_mut(m).slice_mut(ndarray::s![..n]).assign(&ndarray::ArrayView1::from(&wet[..n]));
    }
    WaveBuffer::new(out, rir.sample_rate)
}

fn mono_samples(w: &WaveBuffer, what: &str) -> Result<Vec<f64>> {
    if w.num_channels() != 1 {
        return Err(Error::InvalidInput(format!("{what} must be mono, got {} channels", w.num_channels())));
    }
    Ok(w.channel(0).to_vec())
}

/// Renders target and interference through their RIRs and mixes them.
///
/// The interference is cropped to `overlap_ratio` of the target length and
/// placed at a seeded offset inside the target span. Its gain makes the
/// power ratio over that span, on microphone 0, equal `sir_db`.
pub fn synthesize_mixture(
    target_dry: &WaveBuffer,
    interf_dry: &WaveBuffer,
    scenario: &RoomScenario,
    spec: &MixtureSpec,
) -> Result<MixtureResult> {
    let target = mono_samples(target_dry, "target")?;
    let interf = mono_samples(interf_dry, "interference")?;
    if scenario.source_positions.len() < 2 {
        return Err(Error::InvalidConfig("mixture needs two source positions".into()));
    }
    if target_dry.sample_rate() != scenario.sample_rate || interf_dry.sample_rate() != scenario.sample_rate {
        return Err(Error::InvalidInput("dry sources and scenario sample rates differ".into()));
    }
    if !(spec.overlap_ratio > 0.0 && spec.overlap_ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!("overlap ratio {} outside (0, 1]", spec.overlap_ratio)));
    }
    if !spec.sir_db.is_finite() {
        return Err(Error::InvalidConfig("sir_db must be finite".into()));
    }

    let n_target = target.len();
    let span = ((spec.overlap_ratio * n_target as f64).round() as usize).clamp(1, n_target);
    if interf.len() < span {
        return Err(Error::InvalidInput(format!(
            "interference has {} samples, overlap needs {span}",
            interf.len()
        )));
    }
    let offset = ChaCha8Rng::seed_from_u64(spec.seed).gen_range(0..=n_target - span);
    let mut placed = vec![0.0; n_target];
    placed[offset..offset + span].copy_from_slice(&interf[..span]);

    let target_rir = simulate_rir(scenario, 0)?;
    let interf_rir = simulate_rir(scenario, 1)?;
    let len = n_target + target_rir.len().max(interf_rir.len()) - 1;
    let target_image = render(&target, &target_rir, len)?;
    let raw_interf = render(&placed, &interf_rir, len)?;

    let power = |w: &WaveBuffer| {
        let x = w.channel(0);
        x.slice(ndarray::s![offset..offset + span]).iter().map(|v| v * v).sum::<f64>() / span as f64
    };
    let (p_target, p_interf) = (power(&target_image), power(&raw_interf));
    if p_target == 0.0 || p_interf == 0.0 {
        return Err(Error::InvalidInput("a source is silent over the overlap region".into()));
    }
    let gain = (p_target / (p_interf * 10f64.powf(spec.sir_db / 10.0))).sqrt();
    let interference_image = WaveBuffer::new(raw_interf.samples() * gain, scenario.sample_rate)?;
    let mixture = WaveBuffer::new(target_image.samples() + interference_image.samples(), scenario.sample_rate)?;

    Ok(MixtureResult {
        mixture,
        target_image,
        interference_image,
        target_rir,
        solo_image: None,
        scenario: scenario.clone(),
        spec: *spec,
        overlap: (offset, offset + span),
        interference_gain: gain,
    })
}

/// Independent sub-seed `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Draws a protocol room: uniform dimensions, uniform RT60 in `band`, a
/// randomly placed and oriented default array, and two speakers at least
/// [`WALL_CLEARANCE`] from every wall, 0.5 m from the array center and from
/// each other, at heights in [1, 2] m.
pub fn sample_protocol_scenario(band: Rt60Band, seed: u64) -> RoomScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let room_dims: [f64; 3] = std::array::from_fn(|i| rng.gen_range(ROOM_MIN[i]..=ROOM_MAX[i]));
    let (lo, hi) = band.range();
    let rt60 = rng.gen_range(lo..=hi);

    let spacings = DEFAULT_ARRAY_SPACINGS.to_vec();
    let half = spacings.iter().sum::<f64>() / 2.0;
    let azimuth = rng.gen_range(0.0..2.0 * PI);
    let reach = [half * azimuth.cos().abs(), half * azimuth.sin().abs()];
    let origin = [
        rng.gen_range(WALL_CLEARANCE + reach[0]..room_dims[0] - WALL_CLEARANCE - reach[0]),
        rng.gen_range(WALL_CLEARANCE + reach[1]..room_dims[1] - WALL_CLEARANCE - reach[1]),
        rng.gen_range(1.0..1.5),
    ];

    let mut sources: Vec<[f64; 3]> = Vec::with_capacity(2);
    while sources.len() < 2 {
        let p = [
            rng.gen_range(WALL_CLEARANCE..room_dims[0] - WALL_CLEARANCE),
            rng.gen_range(WALL_CLEARANCE..room_dims[1] - WALL_CLEARANCE),
            rng.gen_range(1.0..2.0),
        ];
        if dist(&p, &origin) >= 0.5 && sources.iter().all(|q| dist(&p, q) >= 0.5) {
            sources.push(p);
        }
    }

    RoomScenario {
        room_dims,
        rt60_target: rt60,
        array_origin: origin,
        array_azimuth: azimuth,
        array_spacings: spacings,
        source_positions: sources,
        max_image_order: sufficient_image_order(room_dims, rt60, 343.0),
        rir_seconds: rt60,
        absorption_model: AbsorptionModel::default(),
        sound_speed: 343.0,
        sample_rate: 16_000,
        seed,
    }
}

/// Draw ranges for protocol mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub utterance_seconds: f64,
    pub solo_seconds: f64,
    pub sir_db: (f64, f64),
    pub overlap: (f64, f64),
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { utterance_seconds: 3.0, solo_seconds: 2.0, sir_db: (-6.0, 6.0), overlap: (0.5, 1.0) }
    }
}

/// One protocol mixture with synthetic speakers and an attached solo part,
/// fully determined by `(band, seed, params)`.
pub fn render_protocol_mixture(band: Rt60Band, seed: u64, params: &ProtocolParams) -> Result<MixtureResult> {
    let scenario = sample_protocol_scenario(band, derive_seed(seed, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let target_voice = Voice::random(&mut rng);
    let interf_voice = Voice::random(&mut rng);
    let sir_db = rng.gen_range(params.sir_db.0..=params.sir_db.1);
    let overlap_ratio = rng.gen_range(params.overlap.0..=params.overlap.1);
    let fs = scenario.sample_rate;

    let target = synth_speech(target_voice, params.utterance_seconds, fs, derive_seed(seed, 2));
    let solo = synth_speech(target_voice, params.solo_seconds, fs, derive_seed(seed, 3));
    let interf = synth_speech(interf_voice, params.utterance_seconds, fs, derive_seed(seed, 4));

    let spec = MixtureSpec { sir_db, overlap_ratio, seed: derive_seed(seed, 5) };
    let mut result = synthesize_mixture(
        &WaveBuffer::mono(target, fs)?,
        &WaveBuffer::mono(interf, fs)?,
        &scenario,
        &spec,
    )?;
    result.attach_solo(&solo)?;
    Ok(result)
}

/// `n` protocol mixtures; mixture `i` uses sub-seed `i` of `seed`. Rendered
/// in parallel on the current rayon pool, returned in index order.
pub fn render_protocol_batch(band: Rt60Band, n: usize, seed: u64, params: &ProtocolParams) -> Result<Vec<MixtureResult>> {
    use rayon::prelude::*;
    (0..n as u64)
        .into_par_iter()
        .map(|i| render_protocol_mixture(band, derive_seed(seed, i), params))
        .collect()
}

/// On-disk description of one rendered mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureRecord {
    pub scenario: RoomScenario,
    pub spec: MixtureSpec,
    pub overlap: [usize; 2],
    pub interference_gain: f64,
}

impl From<&MixtureResult> for MixtureRecord {
    fn from(m: &MixtureResult) -> Self {
        Self {
            scenario: m.scenario.clone(),
            spec: m.spec,
            overlap: [m.overlap.0, m.overlap.1],
            interference_gain: m.interference_gain,
        }
    }
}
