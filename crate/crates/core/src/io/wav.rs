use std::path::Path;

use ndarray::Array2;

use crate::dsp::WaveBuffer;
use crate::error::{Error, Result};

/// Reads 16-bit PCM or 32-bit float WAV of any channel count. PCM samples are
/// scaled by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<WaveBuffer> {
    let mut reader = hound::WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (format, bits) => {
            return Err(Error::InvalidInput(format!(
                "unsupported WAV encoding: {bits}-bit {format:?} (need 16-bit PCM or 32-bit float)"
            )))
        }
    };
    if channels == 0 || !interleaved.len().is_multiple_of(channels) {
        return Err(Error::InvalidInput("WAV sample count is not a multiple of the channel count".into()));
    }
    let frames = interleaved.len() / channels;
    let samples = Array2::from_shape_fn((channels, frames), |(m, n)| interleaved[n * channels + m]);
    WaveBuffer::new(samples, spec.sample_rate)
}

fn write_with<F>(wave: &WaveBuffer, path: &Path, spec: hound::WavSpec, mut put: F) -> Result<()>
where
    F: FnMut(&mut hound::WavWriter<std::io::BufWriter<std::fs::File>>, f64) -> std::result::Result<(), hound::Error>,
{
    let channels = u16::try_from(wave.num_channels())
        .map_err(|_| Error::InvalidInput("too many channels for WAV".into()))?;
    let mut writer = hound::WavWriter::create(path, hound::WavSpec { channels, ..spec })?;
    let s = wave.samples();
    for n in 0..wave.len() {
        for m in 0..wave.num_channels() {
            put(&mut writer, s[[m, n]])?;
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Writes 32-bit float WAV. Values are rounded to `f32`; buffers read back
/// from a float WAV survive the round trip bit for bit.
pub fn write_wav(wave: &WaveBuffer, path: impl AsRef<Path>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate(),
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    write_with(wave, path.as_ref(), spec, |w, v| w.write_sample(v as f32))
}

/// Writes 16-bit PCM: `round(x * 32768)` clamped to the i16 range.
pub fn write_wav_pcm16(wave: &WaveBuffer, path: impl AsRef<Path>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    write_with(wave, path.as_ref(), spec, |w, v| {
        w.write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
    })
}
