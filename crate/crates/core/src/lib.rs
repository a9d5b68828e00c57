//! Spatial features for target speaker extraction with a multi-channel array,
//! built from a short solo recording of the target instead of its room impulse
//! response or its 3-D position.

pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod room;
pub mod select;
pub mod speech;

pub use dsp::{istft, lps, stft, ComplexSpectrogram, StftConfig, WaveBuffer, WindowKind};
pub use error::{Error, Result};
pub use features::{
    assemble_composite, compute_3d_sf, compute_ipd, compute_rir_sf, compute_solo_sf, compute_tpd_3d,
    compute_tpd_from_rir, phase_convolve, Aggregation, ConvKernel, FeatureKind, FeatureMap, MicPair, PairSet,
    SourceBearing,
};
pub use room::{
    rir_to_kernel, rt60_to_absorption, simulate_rir, synthesize_mixture, MixtureResult, MixtureSpec, RirTimeDomain,
    RoomScenario, Rt60Band,
};
pub use select::{select_compose, select_max, select_random, SelectionStrategy, SoloPart, StrategyKind};
