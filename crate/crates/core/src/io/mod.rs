//! File formats: WAV audio, a self-describing binary tensor layout, PGM
//! heatmaps and TOML run configuration.

pub mod config;
pub mod heatmap;
pub mod tensor;
pub mod wav;

pub use config::RunConfig;
pub use heatmap::{export_heatmap, heatmap_pixels};
pub use tensor::{load_tensor, read_tensor, save_tensor, write_tensor, TensorData};
pub use wav::{read_wav, write_wav, write_wav_pcm16};
