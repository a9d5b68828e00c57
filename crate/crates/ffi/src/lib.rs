//! C ABI over the solo-sf feature pipeline.
//!
//! Objects cross the boundary as opaque handles created by `ssf_*` functions
//! and released with the matching `*_free`. Every call returns an
//! [`SsfStatus`]; on failure [`ssf_last_error`] describes what went wrong on
//! the calling thread. Panics never unwind into C.
//!
//! Arrays are row-major. Multichannel audio is `[channels x samples]`; complex
//! values are interleaved `(re, im)` pairs of doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ndarray::Array2;

use solo_sf::features::{assemble_composite, compute_rir_sf, compute_solo_sf, Aggregation, ConvKernel, FeatureMap, MicPair, PairSet};
use solo_sf::io::{save_tensor, TensorData};
use solo_sf::room::{rir_to_kernel, RirTimeDomain};
use solo_sf::select::{SelectionStrategy, SoloPart, StrategyKind};
use solo_sf::{lps, stft, ComplexSpectrogram, Error, StftConfig, WaveBuffer, WindowKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    InputTooShort = 4,
    Degenerate = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsfWindow {
    Hann = 0,
    Hamming = 1,
    Rectangular = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsfStrategy {
    Random = 0,
    Max = 1,
    Compose = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsfAggregation {
    Mean = 0,
    Sum = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsfStftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub window: SsfWindow,
    pub sample_rate: u32,
    pub sound_speed: f64,
}

/// Microphone pairs reduced by spatial features. `pairs` holds `count`
/// `(m1, m2)` index pairs; a null `pairs` selects every pair.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsfPairs {
    pub pairs: *const usize,
    pub count: usize,
    pub aggregation: SsfAggregation,
}

pub struct SsfSpectrogram(ComplexSpectrogram);

pub struct SsfKernel(ConvKernel);

pub struct SsfFeatureMap(FeatureMap);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> SsfStatus {
    match e {
        Error::InputTooShort { .. } | Error::SoloTooShort { .. } | Error::KernelTooLong { .. } => SsfStatus::InputTooShort,
        Error::ShapeMismatch(_) => SsfStatus::ShapeMismatch,
        Error::DegenerateMask(_) => SsfStatus::Degenerate,
        Error::Io(_) | Error::Wav(_) | Error::TensorFormat(_) => SsfStatus::Io,
        _ => SsfStatus::InvalidArgument,
    }
}

fn call(f: impl FnOnce() -> Result<(), Fail>) -> SsfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SsfStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            SsfStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            SsfStatus::Panic
        }
    }
}

fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    // SAFETY: callers pass either null or a pointer obtained from this library
    // (or a valid struct), live for the duration of the call.
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    // SAFETY: the caller guarantees `len` readable elements at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    // SAFETY: the caller guarantees `len` writable elements at `p`.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    // SAFETY: `out` is non-null and points to writable storage for a pointer.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn write_dim(p: *mut usize, v: usize) {
    if !p.is_null() {
        // SAFETY: non-null output pointers must be writable.
        unsafe { *p = v };
    }
}

fn free<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: `p` came from `Box::into_raw` in this library and is freed once.
        drop(unsafe { Box::from_raw(p) });
    }
}

impl From<SsfStftConfig> for StftConfig {
    fn from(c: SsfStftConfig) -> Self {
        StftConfig {
            window_len: c.window_len,
            hop: c.hop,
            fft_size: c.fft_size,
            window: match c.window {
                SsfWindow::Hann => WindowKind::Hann,
                SsfWindow::Hamming => WindowKind::Hamming,
                SsfWindow::Rectangular => WindowKind::Rectangular,
            },
            sample_rate: c.sample_rate,
            sound_speed: c.sound_speed,
        }
    }
}

fn pair_set(p: *const SsfPairs, channels: usize) -> Result<PairSet, Fail> {
    let spec = deref(p, "pairs")?;
    let aggregation = match spec.aggregation {
        SsfAggregation::Mean => Aggregation::Mean,
        SsfAggregation::Sum => Aggregation::Sum,
    };
    let set = if spec.pairs.is_null() {
        PairSet::all_pairs(channels, aggregation)?
    } else {
        let flat = slice(spec.pairs, 2 * spec.count, "pairs.pairs")?;
        let pairs = flat.chunks_exact(2).map(|c| MicPair::new(c[0], c[1])).collect::<solo_sf::Result<Vec<_>>>()?;
        PairSet::new(pairs, aggregation)?
    };
    set.validate_for(channels)?;
    Ok(set)
}

/// Last error message on this thread; empty after a successful call. The
/// pointer stays valid until the next `ssf_*` call on the same thread.
#[no_mangle]
pub extern "C" fn ssf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// 400-sample Hann window, 160 hop, 512-point FFT at 16 kHz, c = 343 m/s.
#[no_mangle]
pub extern "C" fn ssf_stft_config_default() -> SsfStftConfig {
    let d = StftConfig::default();
    SsfStftConfig {
        window_len: d.window_len,
        hop: d.hop,
        fft_size: d.fft_size,
        window: SsfWindow::Hann,
        sample_rate: d.sample_rate,
        sound_speed: d.sound_speed,
    }
}

/// STFT of `channels x len` samples.
///
/// # Safety
/// `samples` must hold `channels * len` doubles; `config` and `out` must be
/// valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ssf_stft(
    samples: *const f64,
    channels: usize,
    len: usize,
    config: *const SsfStftConfig,
    out: *mut *mut SsfSpectrogram,
) -> SsfStatus {
    call(|| {
        let cfg: StftConfig = (*deref(config, "config")?).into();
        let data = slice(samples, channels * len, "samples")?.to_vec();
        let x = Array2::from_shape_vec((channels, len), data).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let wave = WaveBuffer::new(x, cfg.sample_rate)?;
        put(out, SsfSpectrogram(stft(&wave, &cfg)?))
    })
}

/// # Safety
/// `spec` must be a live spectrogram handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn ssf_spectrogram_shape(
    spec: *const SsfSpectrogram,
    frames: *mut usize,
    bins: *mut usize,
    channels: *mut usize,
) -> SsfStatus {
    call(|| {
        let (t, f, m) = deref(spec, "spectrogram")?.0.data().dim();
        write_dim(frames, t);
        write_dim(bins, f);
        write_dim(channels, m);
        Ok(())
    })
}

/// Copies `[T x F x M]` complex values as interleaved `(re, im)` into `out`,
/// which must hold `len >= 2 * T * F * M` doubles.
///
/// # Safety
/// `spec` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ssf_spectrogram_copy(spec: *const SsfSpectrogram, out: *mut f64, len: usize) -> SsfStatus {
    call(|| {
        let data = deref(spec, "spectrogram")?.0.data();
        copy_complex(data.iter(), data.len(), out, len)
    })
}

fn copy_complex<'a>(
    values: impl Iterator<Item = &'a num_complex::Complex64>,
    count: usize,
    out: *mut f64,
    len: usize,
) -> Result<(), Fail> {
    if len < 2 * count {
        return Err(Error::ShapeMismatch(format!("buffer holds {len} doubles, need {}", 2 * count)).into());
    }
    let dst = slice_mut(out, len, "out")?;
    for (pair, z) in dst.chunks_exact_mut(2).zip(values) {
        pair[0] = z.re;
        pair[1] = z.im;
    }
    Ok(())
}

/// # Safety
/// `spec` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssf_spectrogram_free(spec: *mut SsfSpectrogram) {
    free(spec);
}

/// Selects a `k`-frame kernel from the STFT of a solo recording.
///
/// # Safety
/// `solo` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssf_select_kernel(
    solo: *const SsfSpectrogram,
    k: usize,
    strategy: SsfStrategy,
    seed: u64,
    ref_channel: usize,
    out: *mut *mut SsfKernel,
) -> SsfStatus {
    call(|| {
        let spec = deref(solo, "solo")?.0.clone();
        let part = SoloPart::from_spectrogram(spec, "ffi")?;
        let kind = match strategy {
            SsfStrategy::Random => StrategyKind::Random,
            SsfStrategy::Max => StrategyKind::Max,
            SsfStrategy::Compose => StrategyKind::Compose,
        };
        let kernel = SelectionStrategy { kind, seed, ref_channel }.select(&part, k)?;
        put(out, SsfKernel(kernel))
    })
}

/// Kernel from the first `k` STFT frames of a `mics x len` impulse response.
///
/// # Safety
/// `taps` must hold `mics * len` doubles; `config` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssf_kernel_from_rir(
    taps: *const f64,
    mics: usize,
    len: usize,
    config: *const SsfStftConfig,
    k: usize,
    out: *mut *mut SsfKernel,
) -> SsfStatus {
    call(|| {
        let cfg: StftConfig = (*deref(config, "config")?).into();
        let data = slice(taps, mics * len, "taps")?.to_vec();
        let taps = Array2::from_shape_vec((mics, len), data).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        if taps.is_empty() {
            return Err(Error::InvalidInput("empty impulse response".into()).into());
        }
        let rir = RirTimeDomain { taps, sample_rate: cfg.sample_rate };
        put(out, SsfKernel(rir_to_kernel(&rir, &cfg, k)?))
    })
}

/// # Safety
/// `kernel` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn ssf_kernel_shape(
    kernel: *const SsfKernel,
    frames: *mut usize,
    bins: *mut usize,
    channels: *mut usize,
) -> SsfStatus {
    call(|| {
        let (k, f, m) = deref(kernel, "kernel")?.0.data().dim();
        write_dim(frames, k);
        write_dim(bins, f);
        write_dim(channels, m);
        Ok(())
    })
}

/// Copies `[K x F x M]` complex values as interleaved `(re, im)`.
///
/// # Safety
/// `kernel` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ssf_kernel_copy(kernel: *const SsfKernel, out: *mut f64, len: usize) -> SsfStatus {
    call(|| {
        let data = deref(kernel, "kernel")?.0.data();
        copy_complex(data.iter(), data.len(), out, len)
    })
}

/// # Safety
/// `kernel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssf_kernel_free(kernel: *mut SsfKernel) {
    free(kernel);
}

/// Solo-SF of mixture `y` against a kernel selected from a solo part.
///
/// # Safety
/// Handles must be live; `pairs` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ssf_solo_sf(
    y: *const SsfSpectrogram,
    kernel: *const SsfKernel,
    pairs: *const SsfPairs,
    out: *mut *mut SsfFeatureMap,
) -> SsfStatus {
    call(|| {
        let y = &deref(y, "y")?.0;
        let set = pair_set(pairs, y.num_channels())?;
        put(out, SsfFeatureMap(compute_solo_sf(y, &deref(kernel, "kernel")?.0, &set)?))
    })
}

/// RIR-SF of mixture `y` against a kernel from [`ssf_kernel_from_rir`].
///
/// # Safety
/// Handles must be live; `pairs` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ssf_rir_sf(
    y: *const SsfSpectrogram,
    kernel: *const SsfKernel,
    pairs: *const SsfPairs,
    out: *mut *mut SsfFeatureMap,
) -> SsfStatus {
    call(|| {
        let y = &deref(y, "y")?.0;
        let set = pair_set(pairs, y.num_channels())?;
        put(out, SsfFeatureMap(compute_rir_sf(y, &deref(kernel, "kernel")?.0, &set)?))
    })
}

/// Log power spectrum of one channel.
///
/// # Safety
/// `y` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssf_lps(y: *const SsfSpectrogram, ref_channel: usize, out: *mut *mut SsfFeatureMap) -> SsfStatus {
    call(|| put(out, SsfFeatureMap(lps(&deref(y, "y")?.0, ref_channel)?)))
}

/// `[LPS | SF]` side by side, `[T x 2F]`.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssf_composite(
    lps_map: *const SsfFeatureMap,
    sf_map: *const SsfFeatureMap,
    out: *mut *mut SsfFeatureMap,
) -> SsfStatus {
    call(|| {
        let map = assemble_composite(&deref(lps_map, "lps")?.0, &deref(sf_map, "sf")?.0)?;
        put(out, SsfFeatureMap(map))
    })
}

/// # Safety
/// `map` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn ssf_feature_shape(map: *const SsfFeatureMap, rows: *mut usize, cols: *mut usize) -> SsfStatus {
    call(|| {
        let (t, f) = deref(map, "map")?.0.dim();
        write_dim(rows, t);
        write_dim(cols, f);
        Ok(())
    })
}

/// Copies the row-major `[rows x cols]` map into `out`.
///
/// # Safety
/// `map` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ssf_feature_copy(map: *const SsfFeatureMap, out: *mut f64, len: usize) -> SsfStatus {
    call(|| {
        let data = deref(map, "map")?.0.data();
        if len < data.len() {
            return Err(Error::ShapeMismatch(format!("buffer holds {len} doubles, need {}", data.len())).into());
        }
        let dst = slice_mut(out, len, "out")?;
        for (d, v) in dst.iter_mut().zip(data.iter()) {
            *d = *v;
        }
        Ok(())
    })
}

/// Writes the map as a binary tensor file.
///
/// # Safety
/// `map` must be a live handle and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn ssf_feature_save(map: *const SsfFeatureMap, path: *const c_char) -> SsfStatus {
    call(|| {
        let map = &deref(map, "map")?.0;
        if path.is_null() {
            return Err(Fail::Null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Error::InvalidInput("path is not UTF-8".into()))?;
        save_tensor(path, &TensorData::Real(map.data().clone().into_dyn()))?;
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssf_feature_free(map: *mut SsfFeatureMap) {
    free(map);
}
