//! The `snvse` command line.
//!
//! Exit codes: 0 success (per-item failures are summarized, not fatal),
//! 1 operational failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis;
use crate::encoder::{self, AudioPolicy, EncodeSpec, DEFAULT_PRESET};
use crate::estimator::{self, EstimateOptions, EstimationResult, SearchStrategy, VideoPair};
use crate::media::Resolution;
use crate::planner::{self, EmulateOptions, InputFailure, PlanOptions};
use crate::pool;
use crate::probe;
use crate::profile_db::{self, PlatformProfile, ProfileEntry};
use crate::tools::{self, Toolchain, FFMPEG_ENV, FFPROBE_ENV};

/// Output resolutions with fewer estimates than this get a stability warning.
pub const MIN_STABLE_SAMPLES: usize = 30;

const FLAG_SUMMARY: &str = "\
Per-subcommand flags (see `snvse <command> --help`):
  estimate           --originals --shared --manifest --pairing --platform --out --results
                     --trial-seconds --strategy --crf-min --crf-max --keep-trials
  emulate            --profile --out --include-saturated --audio INPUTS...
  analyze-stability  --profile --resolution --iterations --seed --out --n-min --n-max
                     --include-saturated --width-threshold
  db show            PROFILE
  db merge           A B --out
  mock-platform      --inputs --out --resolution --crf --audio
  fidelity           --manifest --shared --out

Environment: SNVSE_FFMPEG, SNVSE_FFPROBE override --ffmpeg-bin / --ffprobe-bin defaults.";

#[derive(Debug, Parser)]
#[command(name = "snvse", version, about = "Estimate and emulate social network video re-encoding", after_help = FLAG_SUMMARY)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl LogLevel {
    fn filter(self) -> log::LevelFilter {
        match self {
            Self::Error => log::LevelFilter::Error,
            Self::Warn => log::LevelFilter::Warn,
            Self::Info => log::LevelFilter::Info,
            Self::Debug => log::LevelFilter::Debug,
        }
    }
}

fn default_workers() -> u32 {
    std::thread::available_parallelism()
        .map(|n| n.get() as u32)
        .unwrap_or(1)
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Encoder binary
    #[arg(long, global = true, env = FFMPEG_ENV, default_value = "ffmpeg")]
    pub ffmpeg_bin: PathBuf,
    /// Prober binary
    #[arg(long, global = true, env = FFPROBE_ENV, default_value = "ffprobe")]
    pub ffprobe_bin: PathBuf,
    /// x264 preset; must match the profile's preset when emulating
    #[arg(long, global = true, default_value = DEFAULT_PRESET)]
    pub preset: String,
    /// Concurrent encodes
    #[arg(long, global = true, default_value_t = default_workers(), value_parser = clap::value_parser!(u32).range(1..))]
    pub workers: u32,
    /// Directory for trial encodes [default: system temp]
    #[arg(long, global = true)]
    pub scratch_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "info")]
    pub log_level: LogLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pairing {
    /// Same file stem in the originals and shared directories
    Stem,
    /// Explicit CSV with columns original,shared[,pair_id]
    Manifest,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a platform profile from (original, shared) video pairs
    Estimate(EstimateArgs),
    /// Re-encode videos as the profiled platform would
    Emulate(EmulateArgs),
    /// Bootstrap the CRF mean over subset sizes for one output resolution
    AnalyzeStability(StabilityArgs),
    /// Inspect or combine profiles
    Db {
        #[command(subcommand)]
        command: DbCommand,
    },
    /// Encode a corpus with fixed hidden parameters (synthetic "shared" videos)
    MockPlatform(MockArgs),
    /// Compare emulated outputs against real shared videos
    Fidelity(FidelityArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Directory of original (pre-upload) videos
    #[arg(long)]
    pub originals: Option<PathBuf>,
    /// Directory of shared (downloaded) videos
    #[arg(long)]
    pub shared: Option<PathBuf>,
    /// CSV manifest of pairs (implies --pairing manifest)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub pairing: Option<Pairing>,
    /// Platform name stored in the profile
    #[arg(long)]
    pub platform: String,
    /// Profile JSON to write
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every estimation result, including trial logs, as JSON
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Trial-encode only the first K seconds of each original
    #[arg(long, value_name = "K")]
    pub trial_seconds: Option<f64>,
    #[arg(long, default_value = "linear", value_parser = parse_strategy)]
    pub strategy: SearchStrategy,
    #[arg(long, default_value_t = estimator::DEFAULT_CRF_MIN)]
    pub crf_min: u32,
    #[arg(long, default_value_t = estimator::DEFAULT_CRF_MAX)]
    pub crf_max: u32,
    /// Keep trial encodes in the scratch directory
    #[arg(long)]
    pub keep_trials: bool,
}

fn parse_strategy(s: &str) -> Result<SearchStrategy, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct EmulateArgs {
    #[arg(long)]
    pub profile: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Average saturated estimates too
    #[arg(long)]
    pub include_saturated: bool,
    #[arg(long, default_value = "drop")]
    pub audio: AudioPolicy,
    /// Input videos (directories are expanded, non-recursively)
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub profile: PathBuf,
    /// Output resolution to analyse, WxH
    #[arg(long)]
    pub resolution: Resolution,
    #[arg(long, default_value_t = analysis::DEFAULT_ITERATIONS)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV report to write
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub n_min: usize,
    /// Largest subset size [default: min(50, population)]
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub include_saturated: bool,
    /// Report the smallest subset size whose CRF range is at most this wide
    #[arg(long)]
    pub width_threshold: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum DbCommand {
    /// Print a profile as a per-resolution table
    Show { profile: PathBuf },
    /// Merge two captures of the same platform
    Merge {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct MockArgs {
    /// Directory of source videos
    #[arg(long)]
    pub inputs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Hidden output resolution, WxH (even)
    #[arg(long)]
    pub resolution: Resolution,
    /// Hidden CRF
    #[arg(long)]
    pub crf: f64,
    #[arg(long, default_value = "drop")]
    pub audio: AudioPolicy,
}

#[derive(Debug, Args)]
pub struct FidelityArgs {
    /// Manifest written by `emulate`
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of shared videos, matched to each emulated input by file stem
    #[arg(long)]
    pub shared: PathBuf,
    /// Output path stem; writes STEM.json and STEM.csv
    #[arg(long)]
    pub out: PathBuf,
}

/// Resolved global settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tools: Toolchain,
    pub preset: String,
    pub workers: usize,
    pub scratch_dir: PathBuf,
    pub log_level: LogLevel,
}

impl RunConfig {
    pub fn from_args(g: &GlobalArgs) -> Result<Self, CliError> {
        encoder::validate_preset(&g.preset).map_err(CliError::Usage)?;
        Ok(Self {
            tools: Toolchain::new(&g.ffmpeg_bin, &g.ffprobe_bin),
            preset: g.preset.clone(),
            workers: g.workers as usize,
            scratch_dir: g.scratch_dir.clone().unwrap_or_else(std::env::temp_dir),
            log_level: g.log_level,
        })
    }

    fn require_tools(&self) -> anyhow::Result<()> {
        self.tools
            .verify()
            .context("media tools unavailable (set --ffmpeg-bin/--ffprobe-bin or SNVSE_FFMPEG/SNVSE_FFPROBE)")
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        Self::Failure(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Failure(_) => 1,
        }
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::Failure(err) => eprintln!("error: {err:#}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn init_logging(level: LogLevel) {
    let _ = env_logger::Builder::new()
        .filter_level(level.filter())
        .format_timestamp_millis()
        .try_init();
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    init_logging(cli.global.log_level);
    let config = RunConfig::from_args(&cli.global)?;
    let result = match cli.command {
        Command::Estimate(args) => cmd_estimate(&args, &config),
        Command::Emulate(args) => cmd_emulate(&args, &config),
        Command::AnalyzeStability(args) => cmd_analyze_stability(&args),
        Command::Db { command } => match command {
            DbCommand::Show { profile } => cmd_db_show(&profile),
            DbCommand::Merge { a, b, out } => cmd_db_merge(&a, &b, &out),
        },
        Command::MockPlatform(args) => cmd_mock_platform(&args, &config),
        Command::Fidelity(args) => cmd_fidelity(&args, &config),
    };
    if tools::is_cancelled() {
        return Err(CliError::Failure(anyhow!("interrupted")));
    }
    result
}

fn resolve_pairs(args: &EstimateArgs) -> Result<Vec<VideoPair>, CliError> {
    let pairing = match (args.pairing, &args.manifest) {
        (Some(p), _) => p,
        (None, Some(_)) => Pairing::Manifest,
        (None, None) => Pairing::Stem,
    };
    let pairs = match pairing {
        Pairing::Manifest => {
            let manifest = args
                .manifest
                .as_ref()
                .ok_or_else(|| CliError::Usage("--pairing manifest requires --manifest".into()))?;
            estimator::pair_by_manifest(manifest).map_err(|e| CliError::Failure(anyhow!(e)))?
        }
        Pairing::Stem => {
            let (Some(originals), Some(shared)) = (&args.originals, &args.shared) else {
                return Err(CliError::Usage("stem pairing requires --originals and --shared".into()));
            };
            let (pairs, unmatched) = estimator::pair_by_stem(originals, shared)
                .with_context(|| format!("listing {} / {}", originals.display(), shared.display()))?;
            for path in unmatched {
                log::warn!("no counterpart for {}", path.display());
            }
            pairs
        }
    };
    if pairs.is_empty() {
        return Err(CliError::Failure(anyhow!("no pairs found")));
    }
    Ok(pairs)
}

pub fn cmd_estimate(args: &EstimateArgs, config: &RunConfig) -> Result<(), CliError> {
    let (lo, hi) = profile_db::CRF_HAT_RANGE;
    if args.crf_min >= args.crf_max || args.crf_min < lo || args.crf_max > hi {
        return Err(CliError::Usage(format!(
            "CRF range [{}, {}] must be increasing and within [{lo}, {hi}]",
            args.crf_min, args.crf_max
        )));
    }
    if let Some(t) = args.trial_seconds {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::Usage("--trial-seconds must be positive".into()));
        }
    }
    let pairs = resolve_pairs(args)?;
    config.require_tools()?;

    let opts = EstimateOptions {
        c_min: args.crf_min,
        c_max: args.crf_max,
        strategy: args.strategy,
        preset: config.preset.clone(),
        trial_seconds: args.trial_seconds,
        scratch_dir: config.scratch_dir.clone(),
        keep_trials: args.keep_trials,
    };
    log::info!("estimating {} pairs with {} workers", pairs.len(), config.workers);
    let outcomes =
        estimator::estimate_batch(&config.tools, &pairs, config.workers, &opts).context("estimation failed")?;

    let results: Vec<&EstimationResult> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let mut profile = PlatformProfile::new(&args.platform, chrono::Local::now().date_naive(), &config.preset);
    profile.entries = results.iter().map(|r| ProfileEntry::from(*r)).collect();
    profile_db::save_profile(&profile, &args.out).context("saving profile")?;
    if let Some(path) = &args.results {
        let mut text = serde_json::to_string_pretty(&results).expect("results serialize");
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }

    println!(
        "profile {} written with {} entries",
        args.out.display(),
        profile.entries.len()
    );
    for (resolution, count) in profile.counts_by_output() {
        println!("  {resolution}: {count} entries");
        if count < MIN_STABLE_SAMPLES {
            eprintln!(
                "warning: < {MIN_STABLE_SAMPLES} samples for {resolution} (have {count}); the CRF estimate may be unstable"
            );
        }
    }
    let failures: Vec<_> = outcomes.iter().filter_map(|o| o.as_ref().err()).collect();
    if !failures.is_empty() {
        println!("{} of {} pairs failed:", failures.len(), outcomes.len());
        for f in failures {
            println!("  {}: {}", f.pair_id, f.error);
        }
    }
    Ok(())
}

fn expand_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(input)
                .with_context(|| format!("listing {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

fn print_failures(failures: &[&InputFailure], total: usize) {
    if !failures.is_empty() {
        println!("{} of {} inputs failed:", failures.len(), total);
        for f in failures {
            println!("  {}: {}", f.input.display(), f.error);
        }
    }
}

pub fn cmd_emulate(args: &EmulateArgs, config: &RunConfig) -> Result<(), CliError> {
    let profile = profile_db::load_profile(&args.profile).context("loading profile")?;
    if profile.preset != config.preset {
        return Err(CliError::Failure(anyhow!(
            "profile preset `{}` differs from configured preset `{}`; CRF values are only meaningful under the preset they were estimated with",
            profile.preset,
            config.preset
        )));
    }
    let inputs = expand_inputs(&args.inputs)?;
    config.require_tools()?;
    let opts = EmulateOptions {
        plan: PlanOptions {
            include_saturated: args.include_saturated,
            audio_policy: args.audio,
        },
        configured_preset: Some(config.preset.clone()),
    };
    let batch = planner::emulate_batch(&config.tools, &inputs, &profile, &args.out, config.workers, &opts)
        .context("emulation failed")?;
    for e in batch.outcomes.iter().filter_map(|o| o.as_ref().ok()) {
        println!(
            "{} -> {} ({} crf {} support {}{})",
            e.plan.input.display(),
            e.output.display(),
            e.plan.rho_star,
            encoder::format_crf(e.plan.crf_star),
            e.plan.support_count,
            if e.plan.matched_exactly { "" } else { ", nearest" }
        );
    }
    println!("{} outputs, manifest {}", batch.succeeded(), batch.manifest.display());
    let failures: Vec<&InputFailure> = batch.failures().collect();
    print_failures(&failures, batch.outcomes.len());
    Ok(())
}

pub fn cmd_analyze_stability(args: &StabilityArgs) -> Result<(), CliError> {
    let profile = profile_db::load_profile(&args.profile).context("loading profile")?;
    let population: Vec<&ProfileEntry> = profile
        .entries
        .iter()
        .filter(|e| e.rho_out == args.resolution && (args.include_saturated || !e.saturated))
        .collect();
    if population.is_empty() {
        let available: Vec<String> = profile.counts_by_output().keys().map(|r| r.to_string()).collect();
        return Err(CliError::Failure(anyhow!(
            "no usable entries for output resolution {} (available: {})",
            args.resolution,
            if available.is_empty() {
                "none".to_string()
            } else {
                available.join(", ")
            }
        )));
    }
    let entries: Vec<ProfileEntry> = population.into_iter().cloned().collect();
    let n_max = args.n_max.unwrap_or_else(|| entries.len().min(50));
    let report = analysis::bootstrap_stability(&entries, args.n_min..=n_max, args.iterations, args.seed)
        .context("bootstrap failed")?;
    let file = std::fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    report
        .write_csv(file)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "{} estimates at {}, {} iterations, seed {} -> {}",
        report.population,
        report.resolution,
        report.iterations,
        report.seed,
        args.out.display()
    );
    if let Some(threshold) = args.width_threshold {
        let rec = analysis::recommend_sample_size(&report, threshold);
        if rec.achieved {
            println!("recommended sample size: {} (CRF range <= {threshold})", rec.n_prime);
        } else {
            println!(
                "CRF range never falls to {threshold}; largest subset size tried: {}",
                rec.n_prime
            );
        }
    }
    Ok(())
}

/// Human-readable rendering of a profile.
pub fn render_profile(profile: &PlatformProfile) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "platform {}  captured {}  preset {}  ({})\n",
        profile.platform_name, profile.captured_at, profile.preset, profile.tool_version
    ));
    s.push_str(&format!(
        "{:<12} {:<12} {:>7} {:>9} {:>9}\n",
        "rho_in", "rho_out", "entries", "saturated", "mean_crf"
    ));
    for row in profile_db::mapping_table(profile) {
        s.push_str(&format!(
            "{:<12} {:<12} {:>7} {:>9} {:>9.2}\n",
            row.rho_in.to_string(),
            row.rho_out.to_string(),
            row.count,
            row.saturated,
            row.mean_crf
        ));
    }
    s.push_str(&format!("{} entries total\n", profile.entries.len()));
    s
}

pub fn cmd_db_show(path: &Path) -> Result<(), CliError> {
    let profile = profile_db::load_profile(path).context("loading profile")?;
    print!("{}", render_profile(&profile));
    let _ = std::io::stdout().flush();
    Ok(())
}

pub fn cmd_db_merge(a: &Path, b: &Path, out: &Path) -> Result<(), CliError> {
    let pa = profile_db::load_profile(a).context("loading first profile")?;
    let pb = profile_db::load_profile(b).context("loading second profile")?;
    let merged = profile_db::merge_profiles(&pa, &pb).context("merge failed")?;
    profile_db::save_profile(&merged, out).context("saving merged profile")?;
    println!("{} entries -> {}", merged.entries.len(), out.display());
    Ok(())
}

/// Encodes every file in `inputs` at the hidden parameters, keeping each
/// input's frame rate. Outputs are `<stem>.mp4` in `out_dir`.
pub fn mock_platform(
    tools: &Toolchain,
    inputs: &[PathBuf],
    out_dir: &Path,
    spec_template: &EncodeSpec,
    workers: usize,
) -> Vec<Result<PathBuf, InputFailure>> {
    pool::bounded_map(inputs, workers, |input| {
        let fail = |error: String| {
            log::error!("{}: {error}", input.display());
            InputFailure {
                input: input.clone(),
                error,
            }
        };
        let info = probe::probe_media(tools, input).map_err(|e| fail(e.to_string()))?;
        let mut spec = spec_template.clone();
        spec.frame_rate = info.frame_rate;
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let output = out_dir.join(format!("{stem}.mp4"));
        encoder::encode(tools, input, &spec, &output).map_err(|e| fail(e.to_string()))?;
        Ok(output)
    })
}

pub fn cmd_mock_platform(args: &MockArgs, config: &RunConfig) -> Result<(), CliError> {
    let placeholder_rate = crate::media::FrameRate::integer(30).expect("positive");
    let mut spec = EncodeSpec::h264(args.resolution, args.crf, placeholder_rate, config.preset.clone());
    spec.audio_policy = args.audio;
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let inputs = expand_inputs(std::slice::from_ref(&args.inputs))?;
    if inputs.is_empty() {
        return Err(CliError::Failure(anyhow!("no inputs in {}", args.inputs.display())));
    }
    config.require_tools()?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let outcomes = mock_platform(&config.tools, &inputs, &args.out, &spec, config.workers);
    let ok = outcomes.iter().filter(|o| o.is_ok()).count();
    println!(
        "{ok} of {} inputs shared at {} crf {}",
        outcomes.len(),
        args.resolution,
        encoder::format_crf(args.crf)
    );
    let failures: Vec<&InputFailure> = outcomes.iter().filter_map(|o| o.as_ref().err()).collect();
    print_failures(&failures, outcomes.len());
    if ok == 0 {
        return Err(CliError::Failure(anyhow!("every input failed")));
    }
    Ok(())
}

pub fn cmd_fidelity(args: &FidelityArgs, config: &RunConfig) -> Result<(), CliError> {
    let text =
        std::fs::read_to_string(&args.manifest).with_context(|| format!("reading {}", args.manifest.display()))?;
    let records: Vec<planner::ManifestRecord> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.manifest.display()))?;
    let (shared_by_stem, _) = estimator::pair_by_stem(&args.shared, &args.shared)
        .with_context(|| format!("listing {}", args.shared.display()))?;
    let mut emulated = Vec::new();
    let mut shared = Vec::new();
    for r in &records {
        let stem = r
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match shared_by_stem.iter().find(|p| p.pair_id == stem) {
            Some(p) => {
                emulated.push(r.output.clone());
                shared.push(p.shared.clone());
            }
            None => log::warn!("no shared counterpart for {}", r.input.display()),
        }
    }
    config.require_tools()?;
    let report = analysis::fidelity_report(&config.tools, &emulated, &shared).context("fidelity report failed")?;
    let (json, csv) = report.save(&args.out).context("writing report")?;
    println!(
        "{} pairs: resolution equality {:.3}, codec match {:.3}, pixel format match {:.3}, median relative bitrate diff {:.3}",
        report.pairs.len(),
        report.resolution_equality_rate,
        report.codec_match_rate,
        report.pixel_format_match_rate,
        report.median_relative_bitrate_diff
    );
    println!("wrote {} and {}", json.display(), csv.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_map_to_exit_code_two() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Failure(anyhow!("x")).exit_code(), 1);
    }

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from([
            "snvse",
            "analyze-stability",
            "--profile",
            "p.json",
            "--resolution",
            "1280x720",
            "--out",
            "r.csv",
            "--workers",
            "3",
            "--preset",
            "slow",
        ])
        .unwrap();
        assert_eq!(cli.global.workers, 3);
        assert_eq!(cli.global.preset, "slow");
        match cli.command {
            Command::AnalyzeStability(a) => {
                assert_eq!(a.resolution, Resolution::new(1280, 720));
                assert_eq!(a.iterations, 1000);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(Cli::try_parse_from([
            "snvse",
            "emulate",
            "--profile",
            "p",
            "--out",
            "o",
            "--workers",
            "0",
            "x"
        ])
        .is_err());
    }

    #[test]
    fn odd_hidden_resolution_is_a_usage_error() {
        let cli = Cli::try_parse_from([
            "snvse",
            "mock-platform",
            "--inputs",
            "/nonexistent",
            "--out",
            "/nonexistent/out",
            "--resolution",
            "641x360",
            "--crf",
            "33",
        ])
        .unwrap();
        let err = run(cli).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
