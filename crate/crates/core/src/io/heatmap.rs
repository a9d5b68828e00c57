use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMap};

/// 8-bit pixels `[F rows x T columns]`, highest frequency on the first row.
///
/// Spatial features map `[-1, 1]` linearly onto `[0, 255]` as
/// `round((x + 1) * 127.5)`, halves rounded away from zero, so 0 becomes 128.
/// LPS and composite maps are stretched min to max; a constant map is all 0.
pub fn heatmap_pixels(feature: &FeatureMap) -> Result<Vec<u8>> {
    let data = feature.data();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("heatmap needs finite values".into()));
    }
    let (t_len, f_len) = data.dim();
    let (lo, hi) = match feature.kind() {
        FeatureKind::Sf3d | FeatureKind::RirSf | FeatureKind::SoloSf => (-1.0, 1.0),
        FeatureKind::Lps | FeatureKind::Composite => data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v))),
    };
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let mut out = Vec::with_capacity(t_len * f_len);
    for f in (0..f_len).rev() {
        for t in 0..t_len {
            out.push(((data[[t, f]] - lo) * scale).round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(out)
}

/// Binary PGM (P5), time left to right, frequency bottom to top.
pub fn export_heatmap(feature: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    let pixels = heatmap_pixels(feature)?;
    let (t_len, f_len) = feature.dim();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(w, "P5\n{t_len} {f_len}\n255\n")?;
    w.write_all(&pixels)?;
    w.flush()?;
    Ok(())
}
