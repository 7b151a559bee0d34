//! Media metadata extraction through the external prober (ffprobe JSON output).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media::{FrameRate, Resolution};
use crate::tools::{self, ToolError, Toolchain};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("no video stream in {0}")]
    NoVideoStream(PathBuf),
    #[error("prober failed on {path}: {diagnostics}")]
    ProberFailure { path: PathBuf, diagnostics: String },
}

impl ProbeError {
    fn prober(path: &Path, diagnostics: impl ToString) -> Self {
        Self::ProberFailure {
            path: path.to_path_buf(),
            diagnostics: diagnostics.to_string(),
        }
    }
}

/// Facts about the first video stream of a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaInfo {
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub frame_rate: FrameRate,
    pub codec_name: String,
    pub pixel_format: String,
    /// Seconds.
    pub duration: f64,
    /// Bits per second, when the container reports it for the video stream.
    pub stream_bitrate: Option<f64>,
    pub file_size: u64,
    /// Declared average rate differs from the base rate.
    pub variable_frame_rate: bool,
    pub has_audio: bool,
}

impl MediaInfo {
    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.width, self.height)
    }
}

#[derive(Debug, Deserialize)]
struct ProbeDoc {
    #[serde(default)]
    streams: Vec<ProbeStream>,
    #[serde(default)]
    format: Option<ProbeFormat>,
}

#[derive(Debug, Deserialize)]
struct ProbeStream {
    codec_type: Option<String>,
    codec_name: Option<String>,
    width: Option<u32>,
    height: Option<u32>,
    pix_fmt: Option<String>,
    avg_frame_rate: Option<String>,
    r_frame_rate: Option<String>,
    duration: Option<String>,
    bit_rate: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ProbeFormat {
    duration: Option<String>,
}

fn positive(value: Option<&str>) -> Option<f64> {
    value
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite() && *v > 0.0)
}

/// Builds a [`MediaInfo`] from ffprobe's `-show_streams -show_format` JSON.
pub fn parse_probe_json(path: &Path, json: &[u8], file_size: u64) -> Result<MediaInfo, ProbeError> {
    let doc: ProbeDoc = serde_json::from_slice(json)
        .map_err(|e| ProbeError::prober(path, format!("unparseable prober output: {e}")))?;

    let has_audio = doc.streams.iter().any(|s| s.codec_type.as_deref() == Some("audio"));
    let video = doc
        .streams
        .iter()
        .find(|s| s.codec_type.as_deref() == Some("video"))
        .ok_or_else(|| ProbeError::NoVideoStream(path.to_path_buf()))?;

    let (width, height) = match (video.width, video.height) {
        (Some(w), Some(h)) if w > 0 && h > 0 => (w, h),
        _ => return Err(ProbeError::prober(path, "video stream has no dimensions")),
    };

    let avg = video
        .avg_frame_rate
        .as_deref()
        .and_then(|r| r.parse::<FrameRate>().ok());
    let base = video.r_frame_rate.as_deref().and_then(|r| r.parse::<FrameRate>().ok());
    let frame_rate = avg
        .or(base)
        .ok_or_else(|| ProbeError::prober(path, "video stream has no frame rate"))?;
    let variable_frame_rate = matches!((avg, base), (Some(a), Some(b)) if a != b);
    if variable_frame_rate {
        log::warn!(
            "{}: average frame rate {} differs from base rate {}; treating the average as authoritative",
            path.display(),
            frame_rate,
            base.unwrap()
        );
    }

    let duration = positive(video.duration.as_deref())
        .or_else(|| positive(doc.format.as_ref().and_then(|f| f.duration.as_deref())))
        .ok_or_else(|| ProbeError::prober(path, "no positive duration reported"))?;

    if file_size == 0 {
        return Err(ProbeError::prober(path, "file is empty"));
    }

    Ok(MediaInfo {
        path: path.to_path_buf(),
        width,
        height,
        frame_rate,
        codec_name: video.codec_name.clone().unwrap_or_default(),
        pixel_format: video.pix_fmt.clone().unwrap_or_default(),
        duration,
        stream_bitrate: positive(video.bit_rate.as_deref()),
        file_size,
        variable_frame_rate,
        has_audio,
    })
}

/// Probes `path` and returns facts about its first video stream.
pub fn probe_media(tools: &Toolchain, path: &Path) -> Result<MediaInfo, ProbeError> {
    let meta = std::fs::metadata(path).map_err(|_| ProbeError::FileNotFound(path.to_path_buf()))?;
    if !meta.is_file() {
        return Err(ProbeError::FileNotFound(path.to_path_buf()));
    }
    let args: Vec<OsString> = vec![
        "-v".into(),
        "error".into(),
        "-print_format".into(),
        "json".into(),
        "-show_streams".into(),
        "-show_format".into(),
        path.into(),
    ];
    let out = tools::run(&tools.ffprobe, &args).map_err(|e| match e {
        ToolError::Failed { stderr, status, .. } => ProbeError::prober(path, format!("exit {status}: {stderr}")),
        other => ProbeError::prober(path, other),
    })?;
    parse_probe_json(path, &out.stdout, meta.len())
}
