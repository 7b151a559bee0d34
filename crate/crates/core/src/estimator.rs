//! CRF estimation: for each (original, shared) pair, the minimum integer CRF
//! whose trial re-encode of the original at the shared resolution does not
//! exceed the shared video's bitrate.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitrate::{self, BitrateError};
use crate::encoder::{self, EncodeError, EncodeSpec, DEFAULT_PRESET};
use crate::media::Resolution;
use crate::pool;
use crate::probe::{self, ProbeError};
use crate::tools::Toolchain;

pub const DEFAULT_CRF_MIN: u32 = 21;
pub const DEFAULT_CRF_MAX: u32 = 50;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("invalid CRF range [{0}, {1}]: need c_min < c_max <= 51")]
    InvalidRange(u32, u32),
    #[error("pair {pair_id}: {source}")]
    Probe {
        pair_id: String,
        #[source]
        source: ProbeError,
    },
    #[error("pair {pair_id}: {source}")]
    Encode {
        pair_id: String,
        #[source]
        source: EncodeError,
    },
    #[error("pair {pair_id}: {source}")]
    Bitrate {
        pair_id: String,
        #[source]
        source: BitrateError,
    },
    #[error("pair {pair_id}: scratch directory: {source}")]
    Scratch {
        pair_id: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no pairs to estimate")]
    NoPairs,
    #[error("all {0} pairs failed")]
    AllPairsFailed(usize),
}

/// An original video and its platform-shared counterpart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoPair {
    pub pair_id: String,
    pub original: PathBuf,
    pub shared: PathBuf,
}

impl VideoPair {
    pub fn new(pair_id: impl Into<String>, original: impl Into<PathBuf>, shared: impl Into<PathBuf>) -> Self {
        Self {
            pair_id: pair_id.into(),
            original: original.into(),
            shared: shared.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    #[default]
    LinearSweep,
    BisectionWithVerify,
}

impl FromStr for SearchStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" | "linear-sweep" => Ok(Self::LinearSweep),
            "bisection" | "bisection-with-verify" => Ok(Self::BisectionWithVerify),
            other => Err(format!("unknown strategy `{other}` (expected linear or bisection)")),
        }
    }
}

impl fmt::Display for SearchStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LinearSweep => "linear",
            Self::BisectionWithVerify => "bisection",
        })
    }
}

/// One trial encode: CRF and the measured bitrate in bits/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub crf: u32,
    pub bitrate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub pair_id: String,
    pub rho_in: Resolution,
    pub rho_out: Resolution,
    pub crf_hat: u32,
    /// Even `c_max` exceeded the target bitrate; `crf_hat` is clamped.
    pub saturated: bool,
    /// Sorted by CRF ascending.
    pub trial_log: Vec<Trial>,
    pub target_bitrate: f64,
    pub c_min: u32,
    pub c_max: u32,
}

impl EstimationResult {
    fn trial(&self, crf: u32) -> Option<f64> {
        self.trial_log.iter().find(|t| t.crf == crf).map(|t| t.bitrate)
    }

    /// Checks from the trial log alone that `crf_hat` is the minimum passing CRF.
    pub fn minimality_witness(&self) -> bool {
        if self.trial_log.is_empty()
            || !self.trial_log.windows(2).all(|w| w[0].crf < w[1].crf)
            || !(self.c_min..=self.c_max).contains(&self.crf_hat)
        {
            return false;
        }
        if self.saturated {
            return self.crf_hat == self.c_max && self.trial(self.c_max).is_some_and(|b| b > self.target_bitrate);
        }
        let passes = self.trial(self.crf_hat).is_some_and(|b| b <= self.target_bitrate);
        let previous_fails =
            self.crf_hat == self.c_min || self.trial(self.crf_hat - 1).is_some_and(|b| b > self.target_bitrate);
        passes && previous_fails
    }
}

/// Outcome of a CRF search independent of how trials are produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub crf_hat: u32,
    pub saturated: bool,
    pub trials: Vec<Trial>,
}

/// Finds the minimum CRF in `[c_min, c_max]` with `trial(crf) <= target`.
///
/// `trial` returns the measured bitrate of an encode at the given CRF; each
/// CRF is evaluated at most once.
pub fn search_min_crf<E, F>(
    c_min: u32,
    c_max: u32,
    strategy: SearchStrategy,
    target: f64,
    mut trial: F,
) -> Result<SearchOutcome, E>
where
    F: FnMut(u32) -> Result<f64, E>,
{
    let mut seen: BTreeMap<u32, f64> = BTreeMap::new();
    let mut passes = |crf: u32| -> Result<bool, E> {
        let bitrate = match seen.get(&crf) {
            Some(b) => *b,
            None => {
                let b = trial(crf)?;
                seen.insert(crf, b);
                b
            }
        };
        Ok(bitrate <= target)
    };

    let found = match strategy {
        SearchStrategy::LinearSweep => {
            let mut hit = None;
            for crf in c_min..=c_max {
                if passes(crf)? {
                    hit = Some(crf);
                    break;
                }
            }
            hit
        }
        SearchStrategy::BisectionWithVerify => {
            if !passes(c_max)? {
                None
            } else {
                let (mut lo, mut hi) = (c_min, c_max);
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    if passes(mid)? {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                // Rate noise can break monotonicity; walk down until the CRF below fails.
                let mut hat = hi;
                while hat > c_min && passes(hat - 1)? {
                    hat -= 1;
                }
                Some(hat)
            }
        }
    };

    let trials = seen.into_iter().map(|(crf, bitrate)| Trial { crf, bitrate }).collect();
    Ok(match found {
        Some(crf_hat) => SearchOutcome {
            crf_hat,
            saturated: false,
            trials,
        },
        None => SearchOutcome {
            crf_hat: c_max,
            saturated: true,
            trials,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub c_min: u32,
    pub c_max: u32,
    pub strategy: SearchStrategy,
    pub preset: String,
    /// Trial-encode only the first `n` seconds of the original.
    pub trial_seconds: Option<f64>,
    pub scratch_dir: PathBuf,
    pub keep_trials: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            c_min: DEFAULT_CRF_MIN,
            c_max: DEFAULT_CRF_MAX,
            strategy: SearchStrategy::LinearSweep,
            preset: DEFAULT_PRESET.to_string(),
            trial_seconds: None,
            scratch_dir: std::env::temp_dir(),
            keep_trials: false,
        }
    }
}

impl EstimateOptions {
    fn check_range(&self) -> Result<(), EstimateError> {
        if self.c_min >= self.c_max || self.c_max > 51 {
            return Err(EstimateError::InvalidRange(self.c_min, self.c_max));
        }
        Ok(())
    }
}

fn scratch_prefix(pair_id: &str) -> String {
    let clean: String = pair_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .take(48)
        .collect();
    format!("snvse-{clean}-")
}

/// Estimates the platform CRF for one pair.
pub fn estimate_crf(
    tools: &Toolchain,
    pair: &VideoPair,
    opts: &EstimateOptions,
) -> Result<EstimationResult, EstimateError> {
    opts.check_range()?;
    let id = || pair.pair_id.clone();
    let original =
        probe::probe_media(tools, &pair.original).map_err(|source| EstimateError::Probe { pair_id: id(), source })?;
    let shared =
        probe::probe_media(tools, &pair.shared).map_err(|source| EstimateError::Probe { pair_id: id(), source })?;
    if shared.codec_name != encoder::CODEC {
        log::warn!(
            "pair {}: shared video codec is {}; trial encodes remain h264",
            pair.pair_id,
            shared.codec_name
        );
    }
    let target = bitrate::measure_bitrate(tools, &shared)
        .map_err(|source| EstimateError::Bitrate { pair_id: id(), source })?
        .value;
    let rho_out = encoder::normalize_resolution(shared.resolution());

    let scratch = tempfile::Builder::new()
        .prefix(&scratch_prefix(&pair.pair_id))
        .tempdir_in(&opts.scratch_dir)
        .map_err(|source| EstimateError::Scratch { pair_id: id(), source })?;

    let outcome = search_min_crf(opts.c_min, opts.c_max, opts.strategy, target, |crf| {
        let mut spec = EncodeSpec::h264(rho_out, f64::from(crf), shared.frame_rate, opts.preset.clone());
        spec.max_seconds = opts.trial_seconds;
        let out = scratch.path().join(format!("trial-crf{crf:02}.mp4"));
        let info = encoder::encode(tools, &pair.original, &spec, &out)
            .map_err(|source| EstimateError::Encode { pair_id: id(), source })?;
        let measured = bitrate::measure_bitrate(tools, &info)
            .map_err(|source| EstimateError::Bitrate { pair_id: id(), source })?;
        log::debug!(
            "pair {}: crf {crf} -> {:.0} bit/s (target {:.0})",
            pair.pair_id,
            measured.value,
            target
        );
        if !opts.keep_trials {
            let _ = std::fs::remove_file(&out);
        }
        Ok(measured.value)
    })?;

    if opts.keep_trials {
        let kept = scratch.keep();
        log::info!("pair {}: trial encodes kept in {}", pair.pair_id, kept.display());
    }
    if outcome.saturated {
        log::warn!(
            "pair {}: even CRF {} exceeds the shared bitrate; estimate clamped",
            pair.pair_id,
            opts.c_max
        );
    }

    Ok(EstimationResult {
        pair_id: pair.pair_id.clone(),
        rho_in: original.resolution(),
        rho_out,
        crf_hat: outcome.crf_hat,
        saturated: outcome.saturated,
        trial_log: outcome.trials,
        target_bitrate: target,
        c_min: opts.c_min,
        c_max: opts.c_max,
    })
}

/// A pair that could not be estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFailure {
    pub pair_id: String,
    pub error: String,
}

pub type PairOutcome = Result<EstimationResult, PairFailure>;

/// Runs `estimate` over `pairs` with bounded concurrency; one outcome per
/// pair in input order. Fails only if the batch is empty or every pair failed.
pub fn run_batch<F>(pairs: &[VideoPair], workers: usize, estimate: F) -> Result<Vec<PairOutcome>, EstimateError>
where
    F: Fn(&VideoPair) -> Result<EstimationResult, EstimateError> + Sync + Send,
{
    if pairs.is_empty() {
        return Err(EstimateError::NoPairs);
    }
    let outcomes = pool::bounded_map(pairs, workers, |pair| {
        estimate(pair).map_err(|e| {
            log::error!("{e}");
            PairFailure {
                pair_id: pair.pair_id.clone(),
                error: e.to_string(),
            }
        })
    });
    if outcomes.iter().all(Result::is_err) {
        return Err(EstimateError::AllPairsFailed(outcomes.len()));
    }
    Ok(outcomes)
}

pub fn estimate_batch(
    tools: &Toolchain,
    pairs: &[VideoPair],
    workers: usize,
    opts: &EstimateOptions,
) -> Result<Vec<PairOutcome>, EstimateError> {
    opts.check_range()?;
    run_batch(pairs, workers, |pair| estimate_crf(tools, pair, opts))
}

/// Pairs files in two directories by file stem. Returns the pairs sorted by
/// stem plus the names left unmatched on either side.
pub fn pair_by_stem(originals: &Path, shared: &Path) -> std::io::Result<(Vec<VideoPair>, Vec<PathBuf>)> {
    let list = |dir: &Path| -> std::io::Result<BTreeMap<String, PathBuf>> {
        let mut map = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if !path.is_file() {
                continue;
            }
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                if stem.starts_with('.') {
                    continue;
                }
                if let Some(prev) = map.insert(stem.to_string(), path.clone()) {
                    log::warn!("duplicate stem `{stem}`: {} shadows {}", path.display(), prev.display());
                }
            }
        }
        Ok(map)
    };
    let mut originals = list(originals)?;
    let mut shared = list(shared)?;
    let mut pairs = Vec::new();
    let stems: Vec<String> = originals.keys().cloned().collect();
    for stem in stems {
        if let Some(s) = shared.remove(&stem) {
            let o = originals.remove(&stem).expect("stem listed");
            pairs.push(VideoPair::new(stem, o, s));
        }
    }
    let unmatched = originals.into_values().chain(shared.into_values()).collect();
    Ok((pairs, unmatched))
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    original: PathBuf,
    shared: PathBuf,
    #[serde(default)]
    pair_id: Option<String>,
}

/// Reads pairs from a CSV with header `original,shared[,pair_id]`.
/// Relative paths resolve against the manifest's directory.
pub fn pair_by_manifest(manifest: &Path) -> Result<Vec<VideoPair>, String> {
    let base = manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(manifest)
        .map_err(|e| format!("{}: {e}", manifest.display()))?;
    let mut pairs = Vec::new();
    for (i, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let row = row.map_err(|e| format!("{}: row {}: {e}", manifest.display(), i + 1))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let pair_id = row.pair_id.filter(|s| !s.is_empty()).unwrap_or_else(|| {
            row.original
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("pair{}", i + 1))
        });
        pairs.push(VideoPair::new(pair_id, resolve(row.original), resolve(row.shared)));
    }
    Ok(pairs)
}
