//! Post-hoc analyses: bootstrap stability of the per-resolution CRF mean as a
//! function of sample size, and a fidelity comparison of emulated outputs
//! against their real shared counterparts.

use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitrate::{self, BitrateError};
use crate::estimator::EstimationResult;
use crate::media::Resolution;
use crate::probe::{self, MediaInfo, ProbeError};
use crate::profile_db::ProfileEntry;
use crate::tools::Toolchain;

pub const DEFAULT_ITERATIONS: usize = 1000;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("estimates span several output resolutions: {0:?}")]
    MixedResolutions(Vec<Resolution>),
    #[error("population of {population} is too small for subsets of {requested}")]
    PopulationTooSmall { population: usize, requested: usize },
    #[error("invalid subset-size range {0}..={1}")]
    InvalidRange(usize, usize),
    #[error("iterations must be positive")]
    NoIterations,
    #[error("{emulated} emulated files vs {shared} shared files")]
    LengthMismatch { emulated: usize, shared: usize },
    #[error("nothing to compare")]
    Empty,
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Bitrate(#[from] BitrateError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Anything carrying a CRF estimate and the output resolution it belongs to.
pub trait CrfSample {
    fn rho_out(&self) -> Resolution;
    fn crf_hat(&self) -> u32;
    fn is_saturated(&self) -> bool;
}

impl CrfSample for EstimationResult {
    fn rho_out(&self) -> Resolution {
        self.rho_out
    }
    fn crf_hat(&self) -> u32 {
        self.crf_hat
    }
    fn is_saturated(&self) -> bool {
        self.saturated
    }
}

impl CrfSample for ProfileEntry {
    fn rho_out(&self) -> Resolution {
        self.rho_out
    }
    fn crf_hat(&self) -> u32 {
        self.crf_hat
    }
    fn is_saturated(&self) -> bool {
        self.saturated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub n_prime: usize,
    pub crf_min: f64,
    pub crf_max: f64,
    pub crf_mean: f64,
    pub crf_stddev: f64,
}

impl StabilityRow {
    pub fn range_width(&self) -> f64 {
        self.crf_max - self.crf_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub resolution: Resolution,
    pub iterations: usize,
    pub seed: u64,
    pub population: usize,
    /// Ascending by `n_prime`.
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    pub fn row(&self, n_prime: usize) -> Option<&StabilityRow> {
        self.rows.iter().find(|r| r.n_prime == n_prime)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Running per-size statistics of subset sums. Sums stay integral so that a
/// subset equal to the whole population reproduces its mean exactly.
#[derive(Clone)]
struct SumStats {
    min: u64,
    max: u64,
    total: u128,
    total_sq: u128,
}

impl SumStats {
    fn new() -> Self {
        Self {
            min: u64::MAX,
            max: 0,
            total: 0,
            total_sq: 0,
        }
    }

    fn push(&mut self, sum: u64) {
        self.min = self.min.min(sum);
        self.max = self.max.max(sum);
        self.total += u128::from(sum);
        self.total_sq += u128::from(sum) * u128::from(sum);
    }

    fn row(&self, n: usize, iterations: usize) -> StabilityRow {
        let n_f = n as f64;
        let iters = iterations as u128;
        // iters * sum(s^2) - (sum s)^2 == iters^2 * var(s), exact and non-negative.
        let spread = iters * self.total_sq - self.total * self.total;
        let variance = spread as f64 / (iters as f64 * iters as f64) / (n_f * n_f);
        StabilityRow {
            n_prime: n,
            crf_min: self.min as f64 / n_f,
            crf_max: self.max as f64 / n_f,
            crf_mean: self.total as f64 / (iters as f64 * n_f),
            crf_stddev: variance.sqrt(),
        }
    }
}

/// Subset means for every size in `lo..=hi`. Each iteration shuffles the
/// population once and uses its first `n` values as the size-`n` subset, so
/// rows share their draws and the curve does not wobble between sizes.
fn subset_means(values: &[u32], lo: usize, hi: usize, iterations: usize, seed: u64) -> Vec<StabilityRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<u32> = values.to_vec();
    let mut stats = vec![SumStats::new(); hi - lo + 1];
    for _ in 0..iterations {
        order.shuffle(&mut rng);
        let mut sum = 0u64;
        for (n, v) in order[..hi].iter().enumerate().map(|(i, v)| (i + 1, v)) {
            sum += u64::from(*v);
            if n >= lo {
                stats[n - lo].push(sum);
            }
        }
    }
    stats
        .iter()
        .enumerate()
        .map(|(i, s)| s.row(lo + i, iterations))
        .collect()
}

/// For each subset size in `n_prime_range`, draws `iterations` random subsets
/// (without replacement inside a subset, independently across iterations),
/// averages the CRF estimates of each, and records the spread of those means.
/// Subsets of different sizes in the same iteration are nested prefixes of
/// one random ordering.
pub fn bootstrap_stability<S: CrfSample + Sync>(
    estimates: &[S],
    n_prime_range: RangeInclusive<usize>,
    iterations: usize,
    seed: u64,
) -> Result<StabilityReport, AnalysisError> {
    let (lo, hi) = (*n_prime_range.start(), *n_prime_range.end());
    if lo == 0 || lo > hi {
        return Err(AnalysisError::InvalidRange(lo, hi));
    }
    if iterations == 0 {
        return Err(AnalysisError::NoIterations);
    }
    let mut resolutions: Vec<Resolution> = estimates.iter().map(CrfSample::rho_out).collect();
    resolutions.sort();
    resolutions.dedup();
    if resolutions.len() > 1 {
        return Err(AnalysisError::MixedResolutions(resolutions));
    }
    let population = estimates.len();
    if population < 2 || hi > population {
        return Err(AnalysisError::PopulationTooSmall {
            population,
            requested: hi,
        });
    }
    let values: Vec<u32> = estimates.iter().map(CrfSample::crf_hat).collect();
    let rows = subset_means(&values, lo, hi, iterations, seed);
    Ok(StabilityReport {
        resolution: resolutions[0],
        iterations,
        seed,
        population,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Recommendation {
    pub n_prime: usize,
    /// False when no row met the threshold; `n_prime` is then the largest size tried.
    pub achieved: bool,
}

/// Smallest subset size whose min-max band is at most `width_threshold` wide.
pub fn recommend_sample_size(report: &StabilityReport, width_threshold: f64) -> Recommendation {
    match report.rows.iter().find(|r| r.range_width() <= width_threshold) {
        Some(r) => Recommendation {
            n_prime: r.n_prime,
            achieved: true,
        },
        None => {
            let largest = report.rows.iter().map(|r| r.n_prime).max().unwrap_or(0);
            log::warn!("no subset size reaches a CRF range of {width_threshold}; largest tried is {largest}");
            Recommendation {
                n_prime: largest,
                achieved: false,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityPair {
    pub emulated: PathBuf,
    pub shared: PathBuf,
    pub emulated_resolution: Resolution,
    pub shared_resolution: Resolution,
    pub resolution_equal: bool,
    pub codec_match: bool,
    pub pixel_format_match: bool,
    pub emulated_bitrate: f64,
    pub shared_bitrate: f64,
    /// |B_emulated - B_shared| / B_shared
    pub relative_bitrate_diff: f64,
}

impl FidelityPair {
    pub fn compare(emulated: &MediaInfo, emulated_bitrate: f64, shared: &MediaInfo, shared_bitrate: f64) -> Self {
        Self {
            emulated: emulated.path.clone(),
            shared: shared.path.clone(),
            emulated_resolution: emulated.resolution(),
            shared_resolution: shared.resolution(),
            resolution_equal: emulated.resolution() == shared.resolution(),
            codec_match: emulated.codec_name == shared.codec_name,
            pixel_format_match: emulated.pixel_format == shared.pixel_format,
            emulated_bitrate,
            shared_bitrate,
            relative_bitrate_diff: (emulated_bitrate - shared_bitrate).abs() / shared_bitrate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub pairs: Vec<FidelityPair>,
    pub resolution_equality_rate: f64,
    pub codec_match_rate: f64,
    pub pixel_format_match_rate: f64,
    pub mean_relative_bitrate_diff: f64,
    pub median_relative_bitrate_diff: f64,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

impl FidelityReport {
    pub fn from_pairs(pairs: Vec<FidelityPair>) -> Result<Self, AnalysisError> {
        if pairs.is_empty() {
            return Err(AnalysisError::Empty);
        }
        let n = pairs.len() as f64;
        let rate = |f: fn(&FidelityPair) -> bool| pairs.iter().filter(|p| f(p)).count() as f64 / n;
        let diffs: Vec<f64> = pairs.iter().map(|p| p.relative_bitrate_diff).collect();
        Ok(Self {
            resolution_equality_rate: rate(|p| p.resolution_equal),
            codec_match_rate: rate(|p| p.codec_match),
            pixel_format_match_rate: rate(|p| p.pixel_format_match),
            mean_relative_bitrate_diff: diffs.iter().sum::<f64>() / n,
            median_relative_bitrate_diff: median(diffs),
            pairs,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One CSV row per pair.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "emulated",
            "shared",
            "emulated_resolution",
            "shared_resolution",
            "resolution_equal",
            "codec_match",
            "pixel_format_match",
            "emulated_bitrate",
            "shared_bitrate",
            "relative_bitrate_diff",
        ])?;
        for p in &self.pairs {
            w.write_record([
                p.emulated.display().to_string(),
                p.shared.display().to_string(),
                p.emulated_resolution.to_string(),
                p.shared_resolution.to_string(),
                p.resolution_equal.to_string(),
                p.codec_match.to_string(),
                p.pixel_format_match.to_string(),
                p.emulated_bitrate.to_string(),
                p.shared_bitrate.to_string(),
                p.relative_bitrate_diff.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.json` and `<stem>.csv` next to each other.
    pub fn save(&self, stem: &Path) -> Result<(PathBuf, PathBuf), AnalysisError> {
        let json = stem.with_extension("json");
        let csv_path = stem.with_extension("csv");
        let io = |path: &Path, message: String| AnalysisError::Io {
            path: path.to_path_buf(),
            message,
        };
        std::fs::write(&json, self.to_json()).map_err(|e| io(&json, e.to_string()))?;
        let file = std::fs::File::create(&csv_path).map_err(|e| io(&csv_path, e.to_string()))?;
        self.write_csv(file).map_err(|e| io(&csv_path, e.to_string()))?;
        Ok((json, csv_path))
    }
}

/// Compares emulated outputs with shared videos paired by list position.
pub fn fidelity_report(
    tools: &Toolchain,
    emulated: &[PathBuf],
    shared: &[PathBuf],
) -> Result<FidelityReport, AnalysisError> {
    if emulated.len() != shared.len() {
        return Err(AnalysisError::LengthMismatch {
            emulated: emulated.len(),
            shared: shared.len(),
        });
    }
    let pairs = emulated
        .iter()
        .zip(shared)
        .map(|(e, s)| {
            let ei = probe::probe_media(tools, e)?;
            let si = probe::probe_media(tools, s)?;
            let eb = bitrate::measure_bitrate(tools, &ei)?.value;
            let sb = bitrate::measure_bitrate(tools, &si)?.value;
            Ok(FidelityPair::compare(&ei, eb, &si, sb))
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    FidelityReport::from_pairs(pairs)
}
