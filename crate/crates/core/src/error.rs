use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input too short: {samples} samples, one window needs {window_len}")]
    InputTooShort { samples: usize, window_len: usize },

    #[error("window/hop not invertible: overlap-added squared window vanishes (min {min_energy:.3e})")]
    NotInvertible { min_energy: f64 },

    #[error("kernel longer than signal: kernel has {kernel} frames, signal has {frames}")]
    KernelTooLong { kernel: usize, frames: usize },

    #[error("solo part too short: {frames} frames available, kernel needs {kernel}")]
    SoloTooShort { frames: usize, kernel: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("degenerate mask: {0}")]
    DegenerateMask(String),

    #[error("insufficient batch: {got} mixtures, need at least {need}")]
    InsufficientBatch { got: usize, need: usize },

    #[error("tensor file: {0}")]
    TensorFormat(String),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("config: {0}")]
    ConfigWrite(#[from] toml::ser::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
