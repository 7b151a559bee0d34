//! The encode operator: H.264/yuv420p re-encode of a video to a target
//! resolution and CRF.

use std::ffi::OsString;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media::{FrameRate, Resolution};
use crate::probe::{self, MediaInfo, ProbeError};
use crate::tools::{self, Toolchain};

pub const CODEC: &str = "h264";
pub const PIXEL_FORMAT: &str = "yuv420p";
pub const DEFAULT_PRESET: &str = "medium";
/// Valid CRF interval for 8-bit x264.
pub const CRF_LIMITS: (f64, f64) = (0.0, 51.0);

const X264_PRESETS: &[&str] = &[
    "ultrafast",
    "superfast",
    "veryfast",
    "faster",
    "fast",
    "medium",
    "slow",
    "slower",
    "veryslow",
    "placebo",
];

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("encoder failed for {input}: {diagnostics}")]
    EncoderFailure { input: String, diagnostics: String },
    #[error(transparent)]
    Probe(#[from] ProbeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AudioPolicy {
    #[default]
    Drop,
    Copy,
}

impl FromStr for AudioPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "drop" => Ok(Self::Drop),
            "copy" => Ok(Self::Copy),
            other => Err(format!("unknown audio policy `{other}` (expected drop or copy)")),
        }
    }
}

impl fmt::Display for AudioPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Drop => "drop",
            Self::Copy => "copy",
        })
    }
}

/// Full argument set of one encode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeSpec {
    pub target: Resolution,
    pub crf: f64,
    pub frame_rate: FrameRate,
    pub codec: String,
    pub pixel_format: String,
    pub preset: String,
    pub audio_policy: AudioPolicy,
    /// Encode only the first `n` seconds of the input (trial encodes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_seconds: Option<f64>,
}

impl EncodeSpec {
    pub fn h264(target: Resolution, crf: f64, frame_rate: FrameRate, preset: impl Into<String>) -> Self {
        Self {
            target,
            crf,
            frame_rate,
            codec: CODEC.to_string(),
            pixel_format: PIXEL_FORMAT.to_string(),
            preset: preset.into(),
            audio_policy: AudioPolicy::Drop,
            max_seconds: None,
        }
    }

    pub fn validate(&self) -> Result<(), EncodeError> {
        let violation = |msg: String| Err(EncodeError::PreconditionViolation(msg));
        if self.target.width == 0 || self.target.height == 0 || !self.target.is_even() {
            return violation(format!("target {} must have positive even dimensions", self.target));
        }
        if !(self.crf.is_finite() && self.crf >= CRF_LIMITS.0 && self.crf <= CRF_LIMITS.1) {
            return violation(format!("crf {} outside [0, 51]", self.crf));
        }
        if self.codec != CODEC {
            return violation(format!("codec `{}` unsupported, only h264", self.codec));
        }
        if self.pixel_format != PIXEL_FORMAT {
            return violation(format!(
                "pixel format `{}` unsupported, only yuv420p",
                self.pixel_format
            ));
        }
        validate_preset(&self.preset).map_err(EncodeError::PreconditionViolation)?;
        if let Some(t) = self.max_seconds {
            if !(t.is_finite() && t > 0.0) {
                return violation(format!("trial duration {t} must be positive"));
            }
        }
        Ok(())
    }
}

pub fn validate_preset(preset: &str) -> Result<(), String> {
    if X264_PRESETS.contains(&preset) {
        Ok(())
    } else {
        Err(format!(
            "unknown encoder preset `{preset}` (expected one of {})",
            X264_PRESETS.join(", ")
        ))
    }
}

/// Drops one pixel from each odd dimension so the frame suits 4:2:0 subsampling.
pub fn normalize_dimensions(width: u32, height: u32) -> (u32, u32) {
    (width - width % 2, height - height % 2)
}

pub fn normalize_resolution(r: Resolution) -> Resolution {
    normalize_dimensions(r.width, r.height).into()
}

/// Formats a CRF for the command line, dropping trailing zeros.
pub fn format_crf(crf: f64) -> String {
    let s = format!("{crf:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// The encoder argv for `spec`. Scaling maps the full input frame onto the
/// full target frame.
pub fn build_args(input: &Path, spec: &EncodeSpec, output: &Path) -> Vec<OsString> {
    let mut args: Vec<OsString> = vec![
        "-hide_banner".into(),
        "-nostdin".into(),
        "-y".into(),
        "-i".into(),
        input.into(),
    ];
    if let Some(t) = spec.max_seconds {
        args.extend(["-t".into(), format!("{t}").into()]);
    }
    args.extend(["-map".into(), "0:v:0".into()]);
    if spec.audio_policy == AudioPolicy::Copy {
        args.extend(["-map".into(), "0:a?".into()]);
    }
    args.extend([
        "-vf".into(),
        format!("scale={}:{}:flags=bicubic", spec.target.width, spec.target.height).into(),
        "-c:v".into(),
        "libx264".into(),
        "-preset".into(),
        spec.preset.clone().into(),
        "-crf".into(),
        format_crf(spec.crf).into(),
        "-pix_fmt".into(),
        spec.pixel_format.clone().into(),
        "-r".into(),
        spec.frame_rate.to_string().into(),
    ]);
    match spec.audio_policy {
        AudioPolicy::Drop => args.push("-an".into()),
        AudioPolicy::Copy => args.extend(["-c:a".into(), "copy".into()]),
    }
    args.push(output.into());
    args
}

/// Re-encodes `input` into `output` and returns the probe of the result.
///
/// The output is probed and checked against `spec`; a partial or
/// non-conforming output is removed.
pub fn encode(tools: &Toolchain, input: &Path, spec: &EncodeSpec, output: &Path) -> Result<MediaInfo, EncodeError> {
    spec.validate()?;
    probe::probe_media(tools, input)?;
    let failure = |diagnostics: String| EncodeError::EncoderFailure {
        input: input.display().to_string(),
        diagnostics,
    };

    let args = build_args(input, spec, output);
    if let Err(e) = tools::run(&tools.ffmpeg, &args) {
        let _ = std::fs::remove_file(output);
        return Err(failure(e.to_string()));
    }

    let info = probe::probe_media(tools, output).map_err(|e| {
        let _ = std::fs::remove_file(output);
        failure(format!("output unreadable: {e}"))
    })?;
    let mut mismatches = Vec::new();
    if info.resolution() != spec.target {
        mismatches.push(format!("resolution {} != {}", info.resolution(), spec.target));
    }
    if info.codec_name != spec.codec {
        mismatches.push(format!("codec {} != {}", info.codec_name, spec.codec));
    }
    if info.pixel_format != spec.pixel_format {
        mismatches.push(format!("pixel format {} != {}", info.pixel_format, spec.pixel_format));
    }
    if info.frame_rate != spec.frame_rate {
        mismatches.push(format!("frame rate {} != {}", info.frame_rate, spec.frame_rate));
    }
    if !mismatches.is_empty() {
        let _ = std::fs::remove_file(output);
        return Err(failure(format!(
            "output violates the encode contract: {}",
            mismatches.join("; ")
        )));
    }
    Ok(info)
}
