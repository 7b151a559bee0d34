//! Fixture clips synthesized with the encoder's built-in test sources.
#![allow(dead_code)]

pub mod gen;
pub mod oracle;

use std::path::{Path, PathBuf};
use std::process::Command;

use snvse::Toolchain;

/// Toolchain from the environment; panics with a clear message when unusable.
pub fn tools() -> Toolchain {
    let tools = Toolchain::from_env();
    if let Err(e) = tools.verify() {
        panic!("these tests need ffmpeg and ffprobe on PATH (or SNVSE_FFMPEG / SNVSE_FFPROBE): {e}");
    }
    tools
}

/// Content generators whose first half encodes at about the same rate as the whole.
/// `{size}` and `{rate}` are substituted.
pub const SOURCES: &[&str] = &[
    "testsrc2=size={size}:rate={rate},noise=alls=10:allf=t",
    "smptehdbars=size={size}:rate={rate},noise=alls=25:allf=t",
    "testsrc=size={size}:rate={rate},noise=alls=8:allf=t",
    "rgbtestsrc=size={size}:rate={rate},noise=alls=30:allf=t",
    "yuvtestsrc=size={size}:rate={rate},noise=alls=20:allf=t",
    "testsrc2=size={size}:rate={rate},noise=alls=40:allf=t",
    "smptebars=size={size}:rate={rate},noise=alls=12:allf=t",
    "color=c=0x406080:size={size}:rate={rate},noise=alls=18:allf=t",
    "sierpinski=size={size}:rate={rate}:seed=1,noise=alls=6:allf=t",
    "testsrc2=size={size}:rate={rate},hue=H=2*PI*t/10,noise=alls=14:allf=t",
];

#[derive(Debug, Clone, Copy)]
pub struct ClipParams<'a> {
    pub source: &'a str,
    pub width: u32,
    pub height: u32,
    /// Frames per second as `num/den`.
    pub rate: &'a str,
    pub seconds: f64,
    /// CRF of the (near-lossless) source encode.
    pub crf: u32,
}

impl Default for ClipParams<'_> {
    fn default() -> Self {
        Self {
            source: SOURCES[0],
            width: 320,
            height: 240,
            rate: "15",
            seconds: 2.0,
            crf: 12,
        }
    }
}

fn ffmpeg(tools: &Toolchain, args: &[&str]) {
    let status = Command::new(&tools.ffmpeg)
        .args(["-v", "error", "-y", "-nostdin"])
        .args(args)
        .status()
        .expect("spawn ffmpeg");
    assert!(status.success(), "ffmpeg {args:?} failed");
}

/// Writes an H.264/yuv420p clip synthesized from `p` to `path`.
pub fn make_clip(tools: &Toolchain, path: &Path, p: ClipParams<'_>) -> PathBuf {
    let graph = p
        .source
        .replace("{size}", &format!("{}x{}", p.width, p.height))
        .replace("{rate}", p.rate);
    let secs = p.seconds.to_string();
    let crf = p.crf.to_string();
    ffmpeg(
        tools,
        &[
            "-f",
            "lavfi",
            "-i",
            &graph,
            "-t",
            &secs,
            "-c:v",
            "libx264",
            "-preset",
            "ultrafast",
            "-crf",
            &crf,
            "-pix_fmt",
            "yuv420p",
            path.to_str().unwrap(),
        ],
    );
    path.to_path_buf()
}

/// A mostly black, static clip: close to the minimum possible bitrate.
pub fn make_black_clip(tools: &Toolchain, path: &Path, width: u32, height: u32, seconds: f64) -> PathBuf {
    let graph = format!("color=c=black:size={width}x{height}:rate=15");
    let secs = seconds.to_string();
    ffmpeg(
        tools,
        &[
            "-f",
            "lavfi",
            "-i",
            &graph,
            "-t",
            &secs,
            "-c:v",
            "libx264",
            "-preset",
            "medium",
            "-crf",
            "50",
            "-pix_fmt",
            "yuv420p",
            path.to_str().unwrap(),
        ],
    );
    path.to_path_buf()
}

pub fn make_audio_only(tools: &Toolchain, path: &Path) -> PathBuf {
    ffmpeg(
        tools,
        &[
            "-f",
            "lavfi",
            "-i",
            "sine=frequency=440:duration=1",
            "-c:a",
            "aac",
            path.to_str().unwrap(),
        ],
    );
    path.to_path_buf()
}

/// Clip with both a video and an audio track.
pub fn make_clip_with_audio(tools: &Toolchain, path: &Path) -> PathBuf {
    ffmpeg(
        tools,
        &[
            "-f",
            "lavfi",
            "-i",
            "testsrc2=size=320x240:rate=15",
            "-f",
            "lavfi",
            "-i",
            "sine=frequency=440",
            "-t",
            "2",
            "-c:v",
            "libx264",
            "-preset",
            "ultrafast",
            "-crf",
            "20",
            "-c:a",
            "aac",
            "-shortest",
            path.to_str().unwrap(),
        ],
    );
    path.to_path_buf()
}

/// Stream-copies `input` twice in a row into `output` (container from its extension).
pub fn concat_with_itself(tools: &Toolchain, input: &Path, output: &Path) -> PathBuf {
    let list = output.with_extension("txt");
    let line = format!("file '{}'\n", input.display());
    std::fs::write(&list, line.repeat(2)).unwrap();
    ffmpeg(
        tools,
        &[
            "-f",
            "concat",
            "-safe",
            "0",
            "-i",
            list.to_str().unwrap(),
            "-c",
            "copy",
            output.to_str().unwrap(),
        ],
    );
    output.to_path_buf()
}

/// Two-pass average-bitrate encode of `input` at `bitrate_kbps`.
pub fn make_abr_clip(tools: &Toolchain, input: &Path, output: &Path, bitrate_kbps: u32) -> PathBuf {
    let b = format!("{bitrate_kbps}k");
    let log = output.with_extension("passlog");
    let log = log.to_str().unwrap();
    for pass in ["1", "2"] {
        let target = if pass == "1" {
            "/dev/null"
        } else {
            output.to_str().unwrap()
        };
        let mut args = vec![
            "-i",
            input.to_str().unwrap(),
            "-c:v",
            "libx264",
            "-preset",
            "fast",
            "-b:v",
            &b,
            "-pass",
            pass,
            "-passlogfile",
            log,
            "-pix_fmt",
            "yuv420p",
            "-an",
        ];
        if pass == "1" {
            args.extend(["-f", "mp4"]);
        }
        args.push(target);
        ffmpeg(tools, &args);
    }
    output.to_path_buf()
}

/// Writes a file that no demuxer recognizes.
pub fn make_corrupt(path: &Path) -> PathBuf {
    std::fs::write(path, b"this is not a video").unwrap();
    path.to_path_buf()
}

/// 54 CRF estimates for one output resolution, drawn once from a rounded
/// normal (mean 32, sd 3.5) and frozen here.
pub const FROZEN_CRF_HATS: [u32; 54] = [
    30, 32, 31, 33, 28, 37, 29, 29, 36, 38, 31, 31, 31, 31, 32, 28, 38, 31, 33, 33, 34, 27, 31, 38, 33, 35, 34, 33, 34,
    34, 29, 34, 32, 33, 30, 26, 25, 32, 30, 35, 32, 28, 28, 26, 35, 26, 33, 30, 31, 35, 36, 31, 32, 28,
];

/// Profile holding `crf_hats` as estimates for `rho_out` (inputs all 1920x1080).
pub fn profile_with(
    platform: &str,
    rho_out: snvse::Resolution,
    crf_hats: &[u32],
) -> snvse::profile_db::PlatformProfile {
    let mut p = snvse::profile_db::PlatformProfile::new(
        platform,
        chrono::NaiveDate::from_ymd_opt(2024, 6, 1).unwrap(),
        "medium",
    );
    p.entries = crf_hats
        .iter()
        .enumerate()
        .map(|(i, &c)| snvse::profile_db::ProfileEntry {
            rho_in: snvse::Resolution::new(1920, 1080),
            rho_out,
            crf_hat: c,
            saturated: false,
            pair_id: format!("{i:03}"),
            target_bitrate: 1.0e6,
        })
        .collect();
    p
}

/// Range width per subset size averaged over bootstrap runs with seeds `0..runs`.
pub fn mean_range_widths(entries: &[snvse::profile_db::ProfileEntry], n_max: usize, runs: u64) -> Vec<f64> {
    let mut acc = vec![0.0; n_max];
    for seed in 0..runs {
        let report = snvse::analysis::bootstrap_stability(entries, 1..=n_max, 1000, seed).unwrap();
        for (a, row) in acc.iter_mut().zip(&report.rows) {
            *a += row.range_width() / runs as f64;
        }
    }
    acc
}

/// Steps where the curve rose, as (n_prime, rise).
pub fn inversions(widths: &[f64]) -> Vec<(usize, f64)> {
    widths
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0])
        .map(|(i, w)| (i + 2, w[1] - w[0]))
        .collect()
}
