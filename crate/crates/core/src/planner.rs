//! Emulation planning: pick the output resolution for an input from the
//! profile (exact input-resolution match, else Euclidean-nearest input
//! resolution), average the CRF estimates recorded for that output
//! resolution, and run the resulting encodes.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{self, AudioPolicy, EncodeError, EncodeSpec};
use crate::media::Resolution;
use crate::pool;
use crate::probe::{self, MediaInfo, ProbeError};
use crate::profile_db::{PlatformProfile, ProfileEntry};
use crate::tools::Toolchain;

/// Relative aspect-ratio change above which a plan is flagged.
pub const ASPECT_TOLERANCE: f64 = 0.01;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FAILURES_FILE: &str = "failures.json";

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("profile has no entries")]
    EmptyProfile,
    #[error("no usable entries with output resolution {0} (saturated entries excluded)")]
    NoSupport(Resolution),
    #[error("profile preset `{profile}` differs from configured preset `{configured}`")]
    PresetMismatch { profile: String, configured: String },
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no inputs to emulate")]
    NoInputs,
    #[error("all {0} inputs failed")]
    AllInputsFailed(usize),
}

/// Output of the resolution lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolutionMatch {
    pub rho_star: Resolution,
    pub matched_exactly: bool,
}

/// Most frequent `rho_out` among `entries`; ties prefer more pixels, then more width.
fn majority_output<'a>(entries: impl Iterator<Item = &'a ProfileEntry>) -> Option<Resolution> {
    let mut counts: BTreeMap<Resolution, usize> = BTreeMap::new();
    for e in entries {
        *counts.entry(e.rho_out).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by_key(|(r, n)| (*n, r.pixels(), r.width))
        .map(|(r, _)| r)
}

/// Selects the output resolution for an input of resolution `rho`.
///
/// An entry with `rho_in == rho` wins outright. Otherwise the entry whose
/// `rho_in` is nearest in Euclidean distance is used; distance ties go to the
/// larger `rho_in` pixel count, then the larger width. When several entries
/// share the chosen `rho_in` with different outputs, the most frequent output
/// wins (ties: more pixels, then more width).
pub fn select_resolution(rho: Resolution, profile: &PlatformProfile) -> Result<ResolutionMatch, PlanError> {
    let exact = majority_output(profile.entries.iter().filter(|e| e.rho_in == rho));
    if let Some(rho_star) = exact {
        return Ok(ResolutionMatch {
            rho_star,
            matched_exactly: true,
        });
    }
    let nearest_in = profile
        .entries
        .iter()
        .map(|e| e.rho_in)
        .min_by_key(|r| {
            (
                r.distance_sq(rho),
                std::cmp::Reverse(r.pixels()),
                std::cmp::Reverse(r.width),
            )
        })
        .ok_or(PlanError::EmptyProfile)?;
    let rho_star = majority_output(profile.entries.iter().filter(|e| e.rho_in == nearest_in)).expect("group non-empty");
    Ok(ResolutionMatch {
        rho_star,
        matched_exactly: false,
    })
}

/// Mean CRF estimate over the entries whose output resolution is `rho_star`,
/// with the number of entries averaged.
pub fn select_crf(
    rho_star: Resolution,
    profile: &PlatformProfile,
    include_saturated: bool,
) -> Result<(f64, usize), PlanError> {
    let (sum, count) = profile
        .entries
        .iter()
        .filter(|e| e.rho_out == rho_star && (include_saturated || !e.saturated))
        .fold((0u64, 0usize), |(s, n), e| (s + u64::from(e.crf_hat), n + 1));
    if count == 0 {
        return Err(PlanError::NoSupport(rho_star));
    }
    Ok((sum as f64 / count as f64, count))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanOptions {
    pub include_saturated: bool,
    pub audio_policy: AudioPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulationPlan {
    pub input: PathBuf,
    pub rho_star: Resolution,
    pub crf_star: f64,
    pub matched_exactly: bool,
    pub support_count: usize,
    /// Output aspect ratio differs from the input's by more than 1%.
    pub aspect_changed: bool,
    pub spec: EncodeSpec,
}

/// Builds the plan for an already-probed input.
pub fn plan_for(info: &MediaInfo, profile: &PlatformProfile, opts: &PlanOptions) -> Result<EmulationPlan, PlanError> {
    if profile.entries.is_empty() {
        return Err(PlanError::EmptyProfile);
    }
    let found = select_resolution(info.resolution(), profile)?;
    let (crf_star, support_count) = select_crf(found.rho_star, profile, opts.include_saturated)?;
    let rho_star = encoder::normalize_resolution(found.rho_star);
    let input_aspect = info.resolution().aspect_ratio();
    let aspect_changed = ((rho_star.aspect_ratio() - input_aspect) / input_aspect).abs() > ASPECT_TOLERANCE;
    if aspect_changed {
        log::warn!(
            "{}: {} -> {} changes the aspect ratio",
            info.path.display(),
            info.resolution(),
            rho_star
        );
    }
    let mut spec = EncodeSpec::h264(rho_star, crf_star, info.frame_rate, profile.preset.clone());
    spec.audio_policy = opts.audio_policy;
    Ok(EmulationPlan {
        input: info.path.clone(),
        rho_star,
        crf_star,
        matched_exactly: found.matched_exactly,
        support_count,
        aspect_changed,
        spec,
    })
}

pub fn plan_emulation(
    tools: &Toolchain,
    input: &Path,
    profile: &PlatformProfile,
    opts: &PlanOptions,
) -> Result<EmulationPlan, PlanError> {
    let info = probe::probe_media(tools, input)?;
    plan_for(&info, profile, opts)
}

/// Manifest line for one emulated video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub input: PathBuf,
    pub output: PathBuf,
    pub rho_star: Resolution,
    pub crf_star: f64,
    pub matched_exactly: bool,
    pub support_count: usize,
    pub aspect_changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFailure {
    pub input: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Emulated {
    pub output: PathBuf,
    pub plan: EmulationPlan,
    pub info: MediaInfo,
}

pub type EmulationOutcome = Result<Emulated, InputFailure>;

#[derive(Debug)]
pub struct EmulationBatch {
    pub outcomes: Vec<EmulationOutcome>,
    pub manifest: PathBuf,
}

impl EmulationBatch {
    pub fn succeeded(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_ok()).count()
    }

    pub fn failures(&self) -> impl Iterator<Item = &InputFailure> {
        self.outcomes.iter().filter_map(|o| o.as_ref().err())
    }
}

/// `<stem>.<platform>.mp4`
pub fn output_name(input: &Path, platform: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".into());
    PathBuf::from(format!("{stem}.{platform}.mp4"))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmulateOptions {
    pub plan: PlanOptions,
    /// When set, must equal the profile's preset.
    pub configured_preset: Option<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PlanError> {
    let mut text = serde_json::to_string_pretty(value).expect("manifest serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| PlanError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Emulates the platform on every input, writing `<stem>.<platform>.mp4`
/// files plus `manifest.json` (and `failures.json` when any input failed)
/// into `out_dir`. Individual failures are recorded, not fatal.
pub fn emulate_batch(
    tools: &Toolchain,
    inputs: &[PathBuf],
    profile: &PlatformProfile,
    out_dir: &Path,
    workers: usize,
    opts: &EmulateOptions,
) -> Result<EmulationBatch, PlanError> {
    if inputs.is_empty() {
        return Err(PlanError::NoInputs);
    }
    if profile.entries.is_empty() {
        return Err(PlanError::EmptyProfile);
    }
    if let Some(configured) = &opts.configured_preset {
        if configured != &profile.preset {
            return Err(PlanError::PresetMismatch {
                profile: profile.preset.clone(),
                configured: configured.clone(),
            });
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|source| PlanError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let mut first_owner: HashMap<PathBuf, usize> = HashMap::new();
    let jobs: Vec<(usize, &PathBuf, PathBuf)> = inputs
        .iter()
        .enumerate()
        .map(|(i, input)| {
            let out = out_dir.join(output_name(input, &profile.platform_name));
            first_owner.entry(out.clone()).or_insert(i);
            (i, input, out)
        })
        .collect();

    let outcomes = pool::bounded_map(&jobs, workers, |(i, input, output)| {
        let fail = |error: String| {
            log::error!("{}: {error}", input.display());
            InputFailure {
                input: (*input).clone(),
                error,
            }
        };
        if first_owner[output] != *i {
            return Err(fail(format!(
                "output name {} collides with an earlier input",
                output.display()
            )));
        }
        let plan = plan_emulation(tools, input, profile, &opts.plan).map_err(|e| fail(e.to_string()))?;
        let info = encoder::encode(tools, input, &plan.spec, output).map_err(|e| fail(e.to_string()))?;
        Ok(Emulated {
            output: output.clone(),
            plan,
            info,
        })
    });

    let records: Vec<ManifestRecord> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .map(|e| ManifestRecord {
            input: e.plan.input.clone(),
            output: e.output.clone(),
            rho_star: e.plan.rho_star,
            crf_star: e.plan.crf_star,
            matched_exactly: e.plan.matched_exactly,
            support_count: e.plan.support_count,
            aspect_changed: e.plan.aspect_changed,
        })
        .collect();
    let manifest = out_dir.join(MANIFEST_FILE);
    write_json(&manifest, &records)?;

    let failures: Vec<&InputFailure> = outcomes.iter().filter_map(|o| o.as_ref().err()).collect();
    let failures_path = out_dir.join(FAILURES_FILE);
    if failures.is_empty() {
        let _ = std::fs::remove_file(&failures_path);
    } else {
        write_json(&failures_path, &failures)?;
    }

    if records.is_empty() {
        return Err(PlanError::AllInputsFailed(outcomes.len()));
    }
    Ok(EmulationBatch { outcomes, manifest })
}
