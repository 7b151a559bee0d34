//! Location and invocation of the external media tools.
//!
//! Every subprocess goes through [`run`], which logs the exact argv, captures
//! both output streams and honours the process-wide cancellation flag set by
//! the CLI's interrupt handler.

use std::ffi::{OsStr, OsString};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::Duration;

use thiserror::Error;

/// Environment variable overriding the encoder binary.
pub const FFMPEG_ENV: &str = "SNVSE_FFMPEG";
/// Environment variable overriding the prober binary.
pub const FFPROBE_ENV: &str = "SNVSE_FFPROBE";

static CANCELLED: AtomicBool = AtomicBool::new(false);

/// Request termination of all in-flight and future subprocesses.
pub fn cancel() {
    CANCELLED.store(true, Ordering::SeqCst);
}

pub fn is_cancelled() -> bool {
    CANCELLED.load(Ordering::SeqCst)
}

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("failed to launch `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("`{program}` exited with {status}: {stderr}")]
    Failed {
        program: String,
        status: ExitStatus,
        stderr: String,
    },
    #[error("`{program}` was interrupted")]
    Interrupted { program: String },
    #[error("`{program}` is not usable: {reason}")]
    Unavailable { program: String, reason: String },
}

/// Captured result of a successful subprocess.
#[derive(Debug, Clone)]
pub struct ToolOutput {
    pub stdout: Vec<u8>,
    pub stderr: String,
}

/// Paths of the encoder and prober binaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Toolchain {
    pub ffmpeg: PathBuf,
    pub ffprobe: PathBuf,
}

impl Default for Toolchain {
    fn default() -> Self {
        Self::from_env()
    }
}

impl Toolchain {
    pub fn new(ffmpeg: impl Into<PathBuf>, ffprobe: impl Into<PathBuf>) -> Self {
        Self {
            ffmpeg: ffmpeg.into(),
            ffprobe: ffprobe.into(),
        }
    }

    /// Binaries from `SNVSE_FFMPEG` / `SNVSE_FFPROBE`, falling back to `PATH` lookup.
    pub fn from_env() -> Self {
        let pick = |var: &str, default: &str| {
            std::env::var_os(var)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(default))
        };
        Self::new(pick(FFMPEG_ENV, "ffmpeg"), pick(FFPROBE_ENV, "ffprobe"))
    }

    /// Runs `-version` on both binaries so a misconfiguration surfaces before any work starts.
    pub fn verify(&self) -> Result<(), ToolError> {
        for bin in [&self.ffmpeg, &self.ffprobe] {
            let out = Command::new(bin)
                .arg("-version")
                .stdin(Stdio::null())
                .output()
                .map_err(|e| ToolError::Unavailable {
                    program: bin.display().to_string(),
                    reason: e.to_string(),
                })?;
            if !out.status.success() {
                return Err(ToolError::Unavailable {
                    program: bin.display().to_string(),
                    reason: format!("`-version` exited with {}", out.status),
                });
            }
        }
        Ok(())
    }
}

/// Renders an argv the way it would be typed in a shell, for logs.
pub fn render_command(program: &Path, args: &[OsString]) -> String {
    let mut parts = vec![quote(program.as_os_str())];
    parts.extend(args.iter().map(|a| quote(a)));
    parts.join(" ")
}

fn quote(arg: &OsStr) -> String {
    let s = arg.to_string_lossy();
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_./:=,+@%".contains(c)) {
        s.into_owned()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

/// Runs `program` with `args`, logging the argv verbatim at info level.
///
/// A nonzero exit yields [`ToolError::Failed`] carrying the tail of stderr.
/// If [`cancel`] is called while the child runs, the child is killed.
pub fn run(program: &Path, args: &[OsString]) -> Result<ToolOutput, ToolError> {
    let name = program.display().to_string();
    log::info!("exec: {}", render_command(program, args));
    if is_cancelled() {
        return Err(ToolError::Interrupted { program: name });
    }

    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| ToolError::Spawn {
            program: name.clone(),
            source,
        })?;

    let mut stdout_pipe = child.stdout.take().expect("stdout is piped");
    let mut stderr_pipe = child.stderr.take().expect("stderr is piped");
    let stdout_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout_pipe.read_to_end(&mut buf);
        buf
    });
    let stderr_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr_pipe.read_to_end(&mut buf);
        buf
    });

    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => {
                if is_cancelled() {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(ToolError::Interrupted { program: name });
                }
                thread::sleep(Duration::from_millis(20));
            }
            Err(source) => return Err(ToolError::Spawn { program: name, source }),
        }
    };

    let stdout = stdout_reader.join().unwrap_or_default();
    let stderr = String::from_utf8_lossy(&stderr_reader.join().unwrap_or_default()).into_owned();
    if !status.success() {
        return Err(ToolError::Failed {
            program: name,
            status,
            stderr: tail(&stderr, 2000),
        });
    }
    Ok(ToolOutput { stdout, stderr })
}

fn tail(s: &str, max: usize) -> String {
    let s = s.trim();
    if s.len() <= max {
        return s.to_string();
    }
    let mut start = s.len() - max;
    while !s.is_char_boundary(start) {
        start += 1;
    }
    format!("...{}", &s[start..])
}
