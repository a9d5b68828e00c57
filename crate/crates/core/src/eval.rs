//! Feature quality against an oracle dominance mask.
//!
//! Each time-frequency bin of the mixture is labeled by whichever rendered
//! source image is louder there. A good target-speaker feature is high on
//! target bins and low on interference bins; the separation of class means
//! and the rank AUC measure how well it does that.

use std::fmt::Write as _;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{stft, ComplexSpectrogram, StftConfig};
use crate::error::{Error, Result};
use crate::features::{compute_rir_sf, compute_solo_sf, spatial_feature_3d, FeatureKind, FeatureMap, PairSet};
use crate::room::{derive_seed, render_protocol_batch, rir_to_kernel, MixtureResult, ProtocolParams, Rt60Band};
use crate::select::{select_compose, select_max, select_random, SoloPart};

pub const DEFAULT_ENERGY_FLOOR: f64 = 1e-3;
pub const MIN_CLASS_BINS: usize = 10;
pub const MIN_BATCH: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinLabel {
    Target,
    Interference,
    Silent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceMask {
    labels: Array2<BinLabel>,
    energy_floor: f64,
}

impl DominanceMask {
    pub fn new(labels: Array2<BinLabel>, energy_floor: f64) -> Self {
        Self { labels, energy_floor }
    }

    pub fn labels(&self) -> &Array2<BinLabel> {
        &self.labels
    }

    pub fn energy_floor(&self) -> f64 {
        self.energy_floor
    }

    pub fn dim(&self) -> (usize, usize) {
        self.labels.dim()
    }

    pub fn count(&self, label: BinLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }
}

/// Labels bins of channel 0: silent when both magnitudes fall below
/// `floor` times the largest magnitude of either source, otherwise target iff
/// the target is strictly louder.
pub fn oracle_dominance_mask(target: &ComplexSpectrogram, interf: &ComplexSpectrogram, floor: f64) -> Result<DominanceMask> {
    if target.data().dim() != interf.data().dim() {
        return Err(Error::ShapeMismatch(format!(
            "target spectrogram {:?} vs interference {:?}",
            target.data().dim(),
            interf.data().dim()
        )));
    }
    if !(floor >= 0.0 && floor.is_finite()) {
        return Err(Error::InvalidConfig(format!("energy floor {floor} must be finite and >= 0")));
    }
    let t = target.channel(0).mapv(|z| z.norm());
    let i = interf.channel(0).mapv(|z| z.norm());
    let peak = t.iter().chain(i.iter()).cloned().fold(0.0, f64::max);
    let threshold = floor * peak;
    let labels = ndarray::Zip::from(&t).and(&i).map_collect(|&a, &b| {
        if a < threshold && b < threshold {
            BinLabel::Silent
        } else if a > b {
            BinLabel::Target
        } else {
            BinLabel::Interference
        }
    });
    Ok(DominanceMask::new(labels, floor))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminabilityReport {
    pub feature_kind: String,
    pub mean_target: f64,
    pub mean_interf: f64,
    pub separation: f64,
    pub auc: f64,
    pub n_target: usize,
    pub n_interf: usize,
    pub rt60: Option<f64>,
    pub sir_db: Option<f64>,
}

/// Probability that a random target bin outscores a random interference bin,
/// ties counted as one half, from midranks.
pub fn rank_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = pos.iter().map(|v| (*v, true)).chain(neg.iter().map(|v| (*v, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // Ranks are 1-based; a tie block shares its average rank.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * all[i..=j].iter().filter(|x| x.1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    (rank_sum - np * (np + 1.0) / 2.0) / (np * nn)
}

pub fn score_feature(feature: &FeatureMap, mask: &DominanceMask) -> Result<DiscriminabilityReport> {
    if feature.dim() != mask.dim() {
        return Err(Error::ShapeMismatch(format!("feature {:?} vs mask {:?}", feature.dim(), mask.dim())));
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (v, l) in feature.data().iter().zip(mask.labels()) {
        match l {
            BinLabel::Target => pos.push(*v),
            BinLabel::Interference => neg.push(*v),
            BinLabel::Silent => {}
        }
    }
    if pos.len() < MIN_CLASS_BINS || neg.len() < MIN_CLASS_BINS {
        return Err(Error::DegenerateMask(format!(
            "{} target and {} interference bins, need {MIN_CLASS_BINS} of each",
            pos.len(),
            neg.len()
        )));
    }
    if pos.iter().chain(&neg).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("feature has non-finite values".into()));
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let (mt, mi) = (mean(&pos), mean(&neg));
    Ok(DiscriminabilityReport {
        feature_kind: feature.kind().name().to_string(),
        mean_target: mt,
        mean_interf: mi,
        separation: mt - mi,
        auc: rank_auc(&pos, &neg),
        n_target: pos.len(),
        n_interf: neg.len(),
        rt60: None,
        sir_db: None,
    })
}

/// Methods compared by [`compare_strategies`], in report order.
pub const METHODS: [&str; 5] = ["rir_gt", "solo_compose", "solo_max", "solo_random", "3d_gt"];

/// Scores of every method on one mixture, in [`METHODS`] order.
pub fn score_mixture(mix: &MixtureResult, config: &StftConfig, k: usize, pairs: &PairSet) -> Result<Vec<DiscriminabilityReport>> {
    let solo_wave = mix
        .solo_image
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("mixture has no solo part".into()))?;
    let y = stft(&mix.mixture, config)?;
    let mask = oracle_dominance_mask(&stft(&mix.target_image, config)?, &stft(&mix.interference_image, config)?, DEFAULT_ENERGY_FLOOR)?;
    let solo = SoloPart::from_spectrogram(stft(solo_wave, config)?, "solo")?;

    let rir_kernel = rir_to_kernel(&mix.target_rir, config, k)?;
    let maps = [
        compute_rir_sf(&y, &rir_kernel, pairs)?,
        compute_solo_sf(&y, &select_compose(&solo, k, 0)?, pairs)?,
        compute_solo_sf(&y, &select_max(&solo, k, 0)?, pairs)?,
        compute_solo_sf(&y, &select_random(&solo, k, derive_seed(mix.spec.seed, 7))?, pairs)?,
        spatial_feature_3d(&y, &mix.scenario.bearing(0)?, pairs)?,
    ];
    maps.iter()
        .zip(METHODS)
        .map(|(map, name)| {
            let mut r = score_feature(map, &mask)?;
            r.feature_kind = name.to_string();
            r.rt60 = Some(mix.scenario.rt60_target);
            r.sir_db = Some(mix.spec.sir_db);
            Ok(r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub rt60_band: String,
    /// `"all"` or a half-open SIR interval such as `[-2,2)`.
    pub sir_db: String,
    pub separation: f64,
    pub auc: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyReport {
    pub rows: Vec<MethodSummary>,
    /// `per_mixture[i][j]` scores method `METHODS[j]` on mixture `i`.
    pub per_mixture: Vec<Vec<DiscriminabilityReport>>,
}

const SIR_BUCKETS: [(f64, f64, &str); 3] = [(f64::NEG_INFINITY, -2.0, "[-6,-2)"), (-2.0, 2.0, "[-2,2)"), (2.0, f64::INFINITY, "[2,6]")];

impl StrategyReport {
    /// Batch-mean summary of `method` over all SIRs.
    pub fn overall(&self, method: &str) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == method && r.sir_db == "all")
    }

    pub fn with_band(mut self, band: &str) -> Self {
        for r in &mut self.rows {
            r.rt60_band = band.to_string();
        }
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,rt60_band,sir_db,separation,auc,n\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{:.6},{:.6},{}", r.method, r.rt60_band, r.sir_db, r.separation, r.auc, r.n).unwrap();
        }
        out
    }

    /// Methods by decreasing mean separation, ties kept in report order.
    pub fn separation_ordering(&self) -> Vec<&MethodSummary> {
        let mut all: Vec<&MethodSummary> = self.rows.iter().filter(|r| r.sir_db == "all").collect();
        all.sort_by(|a, b| b.separation.total_cmp(&a.separation));
        all
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let band = self.rows.first().map(|r| r.rt60_band.as_str()).unwrap_or("");
        writeln!(out, "mixtures: {}", self.per_mixture.len()).unwrap();
        writeln!(out, "rt60 band: {band}").unwrap();
        for r in self.rows.iter().filter(|r| r.sir_db == "all") {
            writeln!(out, "{:<13} separation {:+.4}  auc {:.4}", r.method, r.separation, r.auc).unwrap();
        }
        let order: Vec<String> = self.separation_ordering().iter().map(|r| r.method.clone()).collect();
        writeln!(out, "observed ordering by separation: {}", order.join(" > ")).unwrap();
        out
    }
}

fn summarize(per_mixture: &[Vec<DiscriminabilityReport>]) -> Vec<MethodSummary> {
    let mut rows = Vec::new();
    let buckets = std::iter::once((f64::NEG_INFINITY, f64::INFINITY, "all")).chain(SIR_BUCKETS);
    for (lo, hi, label) in buckets {
        for (j, method) in METHODS.iter().enumerate() {
            let picked: Vec<&DiscriminabilityReport> = per_mixture
                .iter()
                .map(|m| &m[j])
                .filter(|r| label == "all" || r.sir_db.is_some_and(|s| s >= lo && s < hi))
                .collect();
            if picked.is_empty() {
                continue;
            }
            let n = picked.len() as f64;
            rows.push(MethodSummary {
                method: method.to_string(),
                rt60_band: String::new(),
                sir_db: label.to_string(),
                separation: picked.iter().map(|r| r.separation).sum::<f64>() / n,
                auc: picked.iter().map(|r| r.auc).sum::<f64>() / n,
                n: picked.len(),
            });
        }
    }
    rows
}

/// Scores every method on every mixture and averages per method. Mixtures are
/// scored in parallel and reduced in batch order, so the result does not
/// depend on the worker count.
pub fn compare_strategies(batch: &[MixtureResult], config: &StftConfig, k: usize, pairs: &PairSet) -> Result<StrategyReport> {
    if batch.len() < MIN_BATCH {
        return Err(Error::InsufficientBatch { got: batch.len(), need: MIN_BATCH });
    }
    let per_mixture: Vec<Vec<DiscriminabilityReport>> =
        batch.par_iter().map(|m| score_mixture(m, config, k, pairs)).collect::<Result<_>>()?;
    Ok(StrategyReport { rows: summarize(&per_mixture), per_mixture })
}

/// Renders a protocol batch and compares every method on it.
pub fn evaluate_protocol(
    band: Rt60Band,
    n: usize,
    seed: u64,
    params: &ProtocolParams,
    config: &StftConfig,
    k: usize,
    pairs: &PairSet,
) -> Result<StrategyReport> {
    let batch = render_protocol_batch(band, n, seed, params)?;
    Ok(compare_strategies(&batch, config, k, pairs)?.with_band(band.name()))
}

/// Feature map kinds as labeled in reports.
pub fn method_kind(method: &str) -> Option<FeatureKind> {
    match method {
        "rir_gt" => Some(FeatureKind::RirSf),
        "solo_compose" | "solo_max" | "solo_random" => Some(FeatureKind::SoloSf),
        "3d_gt" => Some(FeatureKind::Sf3d),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::StftConfig;
    use ndarray::Array3;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(data: Array3<Complex64>) -> ComplexSpectrogram {
        let cfg = StftConfig { window_len: 8, hop: 4, fft_size: 8, ..StftConfig::default() };
        ComplexSpectrogram::new(data, cfg).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng) -> Array3<Complex64> {
        Array3::from_shape_fn((12, 5, 2), |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn zero_interference_labels_energetic_bins_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random(&mut rng);
        let m = oracle_dominance_mask(&spec(t.clone()), &spec(Array3::zeros((12, 5, 2))), 1e-3).unwrap();
        assert_eq!(m.count(BinLabel::Interference), 0);
        let peak = t.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let energetic = t.index_axis(ndarray::Axis(2), 0).iter().filter(|z| z.norm() >= 1e-3 * peak).count();
        assert_eq!(m.count(BinLabel::Target), energetic);

        let m = oracle_dominance_mask(&spec(Array3::zeros((12, 5, 2))), &spec(t), 1e-3).unwrap();
        assert_eq!(m.count(BinLabel::Target), 0);
    }

    #[test]
    fn mask_matches_scalar_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (t, i) = (random(&mut rng), random(&mut rng));
        let m = oracle_dominance_mask(&spec(t.clone()), &spec(i.clone()), 0.2).unwrap();
        let peak = t
            .index_axis(ndarray::Axis(2), 0)
            .iter()
            .chain(i.index_axis(ndarray::Axis(2), 0).iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        for tt in 0..12 {
            for f in 0..5 {
                let (a, b) = (t[[tt, f, 0]].norm(), i[[tt, f, 0]].norm());
                let want = if a < 0.2 * peak && b < 0.2 * peak {
                    BinLabel::Silent
                } else if a > b {
                    BinLabel::Target
                } else {
                    BinLabel::Interference
                };
                assert_eq!(m.labels()[[tt, f]], want);
            }
        }
    }

    #[test]
    fn ties_go_to_interference() {
        let x = Array3::from_elem((3, 5, 1), Complex64::new(1.0, 0.0));
        let m = oracle_dominance_mask(&spec(x.clone()), &spec(x), 1e-3).unwrap();
        assert_eq!(m.count(BinLabel::Interference), 15);
    }

    fn half_mask() -> DominanceMask {
        DominanceMask::new(
            Array2::from_shape_fn((10, 4), |(t, _)| if t < 5 { BinLabel::Target } else { BinLabel::Interference }),
            1e-3,
        )
    }

    #[test]
    fn perfect_and_constant_features() {
        let mask = half_mask();
        let perfect = FeatureMap::new(Array2::from_shape_fn((10, 4), |(t, _)| if t < 5 { 1.0 } else { -1.0 }), FeatureKind::SoloSf);
        let r = score_feature(&perfect, &mask).unwrap();
        assert_eq!(r.separation, 2.0);
        assert_eq!(r.auc, 1.0);
        assert_eq!((r.n_target, r.n_interf), (20, 20));

        let flat = FeatureMap::new(Array2::from_elem((10, 4), 0.3), FeatureKind::SoloSf);
        let r = score_feature(&flat, &mask).unwrap();
        assert_eq!(r.separation, 0.0);
        assert_eq!(r.auc, 0.5);
    }

    #[test]
    fn degenerate_mask_rejected() {
        let mask = DominanceMask::new(Array2::from_elem((10, 4), BinLabel::Target), 1e-3);
        let f = FeatureMap::new(Array2::zeros((10, 4)), FeatureKind::SoloSf);
        let err = score_feature(&f, &mask).unwrap_err();
        assert!(err.to_string().contains("degenerate mask"));
    }

    #[test]
    fn rank_auc_against_pair_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            // Coarse values force ties.
            let pos: Vec<f64> = (0..37).map(|_| rng.gen_range(0.0f64..6.0).floor() + 0.5).collect();
            let neg: Vec<f64> = (0..23).map(|_| (rng.gen_range(0.0..5.0) as f64).floor()).collect();
            let mut wins = 0.0;
            for p in &pos {
                for q in &neg {
                    wins += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
                }
            }
            assert!((rank_auc(&pos, &neg) - wins / (37.0 * 23.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn small_batch_rejected() {
        let pairs = PairSet::all_pairs(2, crate::features::Aggregation::Mean).unwrap();
        let err = compare_strategies(&[], &StftConfig::default(), 10, &pairs).unwrap_err();
        assert!(matches!(err, Error::InsufficientBatch { got: 0, need: 30 }));
    }
}
