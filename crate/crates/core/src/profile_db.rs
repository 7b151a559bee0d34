//! Platform profiles: the persisted table of (input resolution, output
//! resolution, estimated CRF) triplets for one platform, plus the encoder
//! preset they were estimated under.
//!
//! On-disk format is a single pretty-printed JSON document:
//!
//! ```json
//! {
//!   "platform_name": "facebook",
//!   "captured_at": "2025-03-01",
//!   "preset": "medium",
//!   "tool_version": "snvse 0.1.0",
//!   "entries": [
//!     {"rho_in": [1920, 1080], "rho_out": [1280, 720], "crf_hat": 31,
//!      "saturated": false, "pair_id": "000", "target_bitrate": 1450000.0}
//!   ]
//! }
//! ```

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder;
use crate::estimator::EstimationResult;
use crate::media::Resolution;

/// Bounds every stored CRF estimate must respect.
pub const CRF_HAT_RANGE: (u32, u32) = (21, 50);

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation at `{field}`: {message}")]
    SchemaViolation { field: String, message: String },
    #[error("preset mismatch: `{0}` vs `{1}`")]
    PresetMismatch(String, String),
    #[error("platform mismatch: `{0}` vs `{1}`")]
    PlatformMismatch(String, String),
    #[error("pair `{0}` appears in both profiles")]
    DuplicatePair(String),
}

impl ProfileError {
    fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::SchemaViolation {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub rho_in: Resolution,
    pub rho_out: Resolution,
    pub crf_hat: u32,
    pub saturated: bool,
    pub pair_id: String,
    pub target_bitrate: f64,
}

impl From<&EstimationResult> for ProfileEntry {
    fn from(r: &EstimationResult) -> Self {
        Self {
            rho_in: r.rho_in,
            rho_out: r.rho_out,
            crf_hat: r.crf_hat,
            saturated: r.saturated,
            pair_id: r.pair_id.clone(),
            target_bitrate: r.target_bitrate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformProfile {
    pub platform_name: String,
    pub captured_at: NaiveDate,
    pub preset: String,
    pub tool_version: String,
    pub entries: Vec<ProfileEntry>,
}

pub fn tool_version() -> String {
    format!("snvse {}", env!("CARGO_PKG_VERSION"))
}

impl PlatformProfile {
    pub fn new(platform_name: impl Into<String>, captured_at: NaiveDate, preset: impl Into<String>) -> Self {
        Self {
            platform_name: platform_name.into(),
            captured_at,
            preset: preset.into(),
            tool_version: tool_version(),
            entries: Vec::new(),
        }
    }

    /// Re-checks every invariant. An empty entry list is allowed here;
    /// consumers that need entries reject it themselves.
    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.platform_name.trim().is_empty() {
            return Err(ProfileError::schema("platform_name", "must not be empty"));
        }
        encoder::validate_preset(&self.preset).map_err(|m| ProfileError::schema("preset", m))?;
        for (i, e) in self.entries.iter().enumerate() {
            let field = |name: &str| format!("entries[{i}].{name}");
            for (name, rho) in [("rho_in", e.rho_in), ("rho_out", e.rho_out)] {
                if rho.width == 0 || rho.height == 0 {
                    return Err(ProfileError::schema(field(name), format!("{rho} has a zero dimension")));
                }
            }
            if !e.rho_out.is_even() {
                return Err(ProfileError::schema(
                    field("rho_out"),
                    format!("{} has an odd dimension", e.rho_out),
                ));
            }
            let (lo, hi) = CRF_HAT_RANGE;
            if !(lo..=hi).contains(&e.crf_hat) {
                return Err(ProfileError::schema(
                    field("crf_hat"),
                    format!("{} outside [{lo}, {hi}]", e.crf_hat),
                ));
            }
            if !(e.target_bitrate.is_finite() && e.target_bitrate > 0.0) {
                return Err(ProfileError::schema(
                    field("target_bitrate"),
                    "must be a positive number",
                ));
            }
        }
        Ok(())
    }

    /// Entry count per output resolution, ascending by resolution.
    pub fn counts_by_output(&self) -> BTreeMap<Resolution, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(e.rho_out).or_insert(0) += 1;
        }
        counts
    }
}

pub fn to_json(profile: &PlatformProfile) -> String {
    let mut s = serde_json::to_string_pretty(profile).expect("profile serializes");
    s.push('\n');
    s
}

/// Writes `profile` atomically (temp file in the same directory, then rename).
pub fn save_profile(profile: &PlatformProfile, path: &Path) -> Result<(), ProfileError> {
    profile.validate()?;
    if profile.entries.is_empty() {
        log::warn!(
            "saving profile `{}` with no entries; it can be inspected but not used for emulation",
            profile.platform_name
        );
    }
    let io = |source| ProfileError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(to_json(profile).as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn from_json(text: &str) -> Result<PlatformProfile, ProfileError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let profile: PlatformProfile = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        ProfileError::schema(field, e.into_inner().to_string())
    })?;
    profile.validate()?;
    Ok(profile)
}

pub fn load_profile(path: &Path) -> Result<PlatformProfile, ProfileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_json(&text)
}

/// Concatenates two captures of the same platform under the same preset.
pub fn merge_profiles(a: &PlatformProfile, b: &PlatformProfile) -> Result<PlatformProfile, ProfileError> {
    if a.platform_name != b.platform_name {
        return Err(ProfileError::PlatformMismatch(
            a.platform_name.clone(),
            b.platform_name.clone(),
        ));
    }
    if a.preset != b.preset {
        return Err(ProfileError::PresetMismatch(a.preset.clone(), b.preset.clone()));
    }
    let ids: HashSet<&str> = a.entries.iter().map(|e| e.pair_id.as_str()).collect();
    if let Some(dup) = b.entries.iter().find(|e| ids.contains(e.pair_id.as_str())) {
        return Err(ProfileError::DuplicatePair(dup.pair_id.clone()));
    }
    let mut merged = a.clone();
    merged.captured_at = a.captured_at.max(b.captured_at);
    merged.entries.extend(b.entries.iter().cloned());
    Ok(merged)
}

/// One line of the `db show` table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingRow {
    pub rho_in: Resolution,
    pub rho_out: Resolution,
    pub count: usize,
    pub saturated: usize,
    pub mean_crf: f64,
}

/// Groups entries by (rho_in, rho_out).
pub fn mapping_table(profile: &PlatformProfile) -> Vec<MappingRow> {
    let mut groups: BTreeMap<(Resolution, Resolution), (usize, usize, u64)> = BTreeMap::new();
    for e in &profile.entries {
        let g = groups.entry((e.rho_in, e.rho_out)).or_default();
        g.0 += 1;
        g.1 += usize::from(e.saturated);
        g.2 += u64::from(e.crf_hat);
    }
    groups
        .into_iter()
        .map(|((rho_in, rho_out), (count, saturated, sum))| MappingRow {
            rho_in,
            rho_out,
            count,
            saturated,
            mean_crf: sum as f64 / count as f64,
        })
        .collect()
}
