//! The bitrate function used on both sides of the CRF inequality.
//!
//! Only the video stream counts. The prober-reported stream bitrate is
//! preferred; otherwise the video packet sizes are summed and divided by the
//! stream duration. Shared videos and trial encodes go through the same path.

use std::ffi::OsString;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probe::MediaInfo;
use crate::tools::{self, Toolchain};

#[derive(Debug, Error)]
pub enum BitrateError {
    #[error("{0}: duration is missing or not positive")]
    MissingDuration(String),
    #[error("{path}: no reported bitrate and packet scan failed: {reason}")]
    PacketScanFailure { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitrateMethod {
    ReportedStreamBitrate,
    VideoBytesOverDuration,
}

/// Video-stream bitrate in bits per second, with the path that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitrateMeasurement {
    pub value: f64,
    pub method: BitrateMethod,
}

/// Measures `info` with the prober in packet-listing mode as the fallback.
pub fn measure_bitrate(tools: &Toolchain, info: &MediaInfo) -> Result<BitrateMeasurement, BitrateError> {
    measure_bitrate_with(info, || video_packet_bytes(tools, info))
}

/// Core of [`measure_bitrate`] with the packet-size source injected.
/// `packet_bytes` is only consulted when no stream bitrate is reported.
pub fn measure_bitrate_with<F>(info: &MediaInfo, packet_bytes: F) -> Result<BitrateMeasurement, BitrateError>
where
    F: FnOnce() -> Result<u64, String>,
{
    let path = info.path.display().to_string();
    if !(info.duration.is_finite() && info.duration > 0.0) {
        return Err(BitrateError::MissingDuration(path));
    }
    if let Some(value) = info.stream_bitrate.filter(|b| *b > 0.0) {
        return Ok(BitrateMeasurement {
            value,
            method: BitrateMethod::ReportedStreamBitrate,
        });
    }
    let bytes = packet_bytes().map_err(|reason| BitrateError::PacketScanFailure {
        path: path.clone(),
        reason,
    })?;
    if bytes == 0 {
        return Err(BitrateError::PacketScanFailure {
            path,
            reason: "video stream has no packets".into(),
        });
    }
    Ok(BitrateMeasurement {
        value: bytes as f64 * 8.0 / info.duration,
        method: BitrateMethod::VideoBytesOverDuration,
    })
}

/// Sum of the first video stream's packet sizes, in bytes.
pub fn video_packet_bytes(tools: &Toolchain, info: &MediaInfo) -> Result<u64, String> {
    let args: Vec<OsString> = vec![
        "-v".into(),
        "error".into(),
        "-select_streams".into(),
        "v:0".into(),
        "-show_entries".into(),
        "packet=size".into(),
        "-of".into(),
        "csv=p=0".into(),
        info.path.clone().into(),
    ];
    let out = tools::run(&tools.ffprobe, &args).map_err(|e| e.to_string())?;
    sum_packet_sizes(&String::from_utf8_lossy(&out.stdout))
}

fn sum_packet_sizes(listing: &str) -> Result<u64, String> {
    listing
        .lines()
        .map(|l| l.trim().trim_end_matches(','))
        .filter(|l| !l.is_empty())
        .try_fold(0u64, |acc, l| {
            l.parse::<u64>()
                .map(|n| acc + n)
                .map_err(|_| format!("unexpected packet line `{l}`"))
        })
}
