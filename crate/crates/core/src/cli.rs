//! `aeroforge` command line.
//!
//! Exit codes: 0 success, 1 validation or metric error (including bad
//! usage), 2 I/O error, 3 placement exhausted.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ConfigError, GeneratorConfig, Scenario};
use crate::dataset::{
    augment_dataset, dataset_stats, generate_dataset, manifest_dir, split_dataset,
    validate_manifest, AugmentationSpec, DatasetError, DatasetManifest, GenerateOptions, Split,
    MANIFEST_FILE,
};
use crate::eval::{evaluate, export_curves, EvalError, PredictionSet, Task, DEFAULT_WORST_K};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PLACEMENT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "aeroforge",
    version,
    about = "Synthetic aerial imagery datasets and evaluation"
)]
pub struct Cli {
    /// Worker threads for generation (0 = all cores). Never changes output bytes.
    #[arg(long, global = true, env = "AEROFORGE_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Suppress informational output.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Fire,
    Counting,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Fire => Scenario::FireClassification,
            ScenarioArg::Counting => Scenario::HouseCounting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Classify,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    External,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
            SplitArg::External => Split::External,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset directory (images/, optional density/, manifest.jsonl).
    Generate(GenerateArgs),
    /// Check a manifest and the files it references; exit 1 on any violation.
    Validate(ManifestArgs),
    /// Class balance, count histogram, splits and lineage of a manifest.
    Stats(ManifestArgs),
    /// Stratified train/val split of a manifest.
    Split(SplitArgs),
    /// Add label-preserving flipped/rotated copies of the train rows.
    Augment(AugmentArgs),
    /// Score a predictions CSV against a manifest.
    Evaluate(EvaluateArgs),
    /// Plot a training log (epoch,train,val) as SVG plus normalized CSV.
    Plot(PlotArgs),
    /// Export a manifest as CSV.
    Export(ExportArgs),
    /// Print the default generator config for a scenario.
    Defaults(DefaultsArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator config (JSON). Defaults to the built-in config of --scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in config to use when --config is absent.
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioArg>,
    /// Number of images.
    #[arg(long)]
    pub count: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed, overriding the config's.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exactly ⌊n/2⌋ fire and ⌊n/2⌋ forest images.
    #[arg(long)]
    pub balanced: bool,
    /// Also write a count-density map per image.
    #[arg(long)]
    pub density: bool,
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    /// Manifest file (manifest.jsonl) or the directory containing it.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fraction of the train/val pool assigned to val.
    #[arg(long)]
    pub val: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write here instead of rewriting the manifest in place (same directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated subset of hflip, vflip, rot90, rot180, rot270.
    #[arg(long)]
    pub ops: String,
    /// Images per train parent, the parent included.
    #[arg(long, default_value_t = 2)]
    pub multiplier: u32,
    /// Write here instead of rewriting the manifest in place (same directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// CSV with header `image_id,prediction`.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// Only score rows of this split.
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    /// Also report metrics of rounded count predictions.
    #[arg(long)]
    pub round: bool,
    /// Number of worst offenders listed.
    #[arg(long, default_value_t = DEFAULT_WORST_K)]
    pub worst: usize,
    /// Include every per-image residual in JSON output.
    #[arg(long)]
    pub residuals: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Training log CSV with header `epoch,train,val`.
    #[arg(long)]
    pub log: PathBuf,
    /// SVG output; the normalized CSV goes next to it with a .csv extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// CSV output file (standard output if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DefaultsArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    /// Already reported; carries only the exit code.
    #[error("")]
    Reported(i32),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Dataset(e) => match e {
                DatasetError::Io { .. } | DatasetError::Image { .. } => EXIT_IO,
                DatasetError::Render { .. } => EXIT_IO,
                DatasetError::Placement { .. } => EXIT_PLACEMENT,
                DatasetError::Config(c) => config_code(c),
                _ => EXIT_INVALID,
            },
            CliError::Eval(EvalError::Io { .. }) => EXIT_IO,
            CliError::Eval(_) => EXIT_INVALID,
            CliError::Config(c) => config_code(c),
            CliError::Io { .. } => EXIT_IO,
            CliError::Usage(_) => EXIT_INVALID,
            CliError::Reported(code) => *code,
        }
    }
}

fn config_code(e: &ConfigError) -> i32 {
    match e {
        ConfigError::Io { .. } => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

/// Runs the CLI with process stdout/stderr and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = if informational {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return if informational { EXIT_OK } else { EXIT_INVALID };
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if !matches!(e, CliError::Reported(_)) {
                let _ = writeln!(err, "error: {e}");
                if let CliError::Dataset(DatasetError::Placement { seed, .. }) = &e {
                    let _ = writeln!(err, "failing seed: {seed}");
                }
            }
            e.exit_code()
        }
    }
}

fn resolve_manifest(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

/// Target for a rewritten manifest: in place, or `out` in the same directory
/// so that relative image paths stay valid.
fn rewrite_target(manifest: &Path, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let Some(out) = out else {
        return Ok(manifest.to_path_buf());
    };
    let same_dir = |a: &Path, b: &Path| {
        let canon = |p: PathBuf| p.canonicalize().unwrap_or(p);
        canon(manifest_dir(a)) == canon(manifest_dir(b))
    };
    if !same_dir(manifest, out) {
        return Err(CliError::Usage(format!(
            "--out {} must be in the same directory as {}",
            out.display(),
            manifest.display()
        )));
    }
    Ok(out.to_path_buf())
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => {
            let config = match (&a.config, a.scenario) {
                (Some(path), _) => GeneratorConfig::load(path)?,
                (None, Some(s)) => GeneratorConfig::default_for(s.into()),
                (None, None) => {
                    return Err(CliError::Usage(
                        "generate needs --config or --scenario".into(),
                    ))
                }
            };
            let opts = GenerateOptions {
                n_images: a.count,
                master_seed: a.seed,
                balanced: a.balanced,
                density: a.density,
                threads: cli.threads,
            };
            let m = generate_dataset(&config, &opts, &a.out)?;
            if !cli.quiet {
                write_out(
                    out,
                    &format!(
                        "wrote {} images to {} (config {})\n",
                        m.rows.len(),
                        a.out.display(),
                        m.header.config_hash.as_deref().unwrap_or("?")
                    ),
                )?;
            }
        }
        Command::Validate(a) => {
            let path = resolve_manifest(&a.manifest);
            let report = validate_manifest(&path)?;
            if !cli.quiet || !report.is_clean() {
                let text = match a.format {
                    Format::Text => format!("{report}\n"),
                    Format::Json => format!("{}\n", to_json(&report)),
                };
                write_out(out, &text)?;
            }
            if !report.is_clean() {
                return Err(CliError::Reported(EXIT_INVALID));
            }
        }
        Command::Stats(a) => {
            let m = DatasetManifest::load(&resolve_manifest(&a.manifest))?;
            let stats = dataset_stats(&m);
            let text = match a.format {
                Format::Text => format!("{stats}\n"),
                Format::Json => format!("{}\n", to_json(&stats)),
            };
            write_out(out, &text)?;
        }
        Command::Split(a) => {
            let path = resolve_manifest(&a.manifest);
            let target = rewrite_target(&path, a.out.as_deref())?;
            let m = DatasetManifest::load(&path)?;
            let split = split_dataset(&m, a.val, a.seed)?;
            split.save(&target)?;
            if !cli.quiet {
                let count = |s: Split| split.rows.iter().filter(|r| r.split == s).count();
                write_out(
                    out,
                    &format!(
                        "train {} / val {} -> {}\n",
                        count(Split::Train),
                        count(Split::Val),
                        target.display()
                    ),
                )?;
            }
        }
        Command::Augment(a) => {
            let path = resolve_manifest(&a.manifest);
            let target = rewrite_target(&path, a.out.as_deref())?;
            let spec = AugmentationSpec::parse(&a.ops, a.multiplier)?;
            let m = DatasetManifest::load(&path)?;
            let augmented = augment_dataset(&m, &path, &spec)?;
            augmented.save(&target)?;
            if !cli.quiet {
                write_out(
                    out,
                    &format!(
                        "added {} augmented images -> {}\n",
                        augmented.rows.len() - m.rows.len(),
                        target.display()
                    ),
                )?;
            }
        }
        Command::Evaluate(a) => {
            let m = DatasetManifest::load(&resolve_manifest(&a.manifest))?;
            let preds = PredictionSet::load(&a.predictions)?;
            let task = match a.task {
                TaskArg::Classify => Task::Classify,
                TaskArg::Count => Task::Count,
            };
            let mut report = evaluate(task, &preds, &m, a.split.map(Into::into), a.worst, a.round)?;
            if !a.residuals {
                report.residuals.clear();
            }
            let text = match a.format {
                Format::Text => report.to_string(),
                Format::Json => format!("{}\n", to_json(&report)),
            };
            write_out(out, &text)?;
        }
        Command::Plot(a) => {
            let e = export_curves(&a.log, &a.out)?;
            if !cli.quiet {
                write_out(
                    out,
                    &format!(
                        "epochs {}..{} -> {} and {}\n",
                        e.epochs.0,
                        e.epochs.1,
                        e.svg_path.display(),
                        e.csv_path.display()
                    ),
                )?;
            }
        }
        Command::Export(a) => {
            let m = DatasetManifest::load(&resolve_manifest(&a.manifest))?;
            let mut buf = Vec::new();
            m.write_csv(&mut buf)
                .map_err(|e| CliError::Usage(format!("csv export failed: {e}")))?;
            match &a.out {
                Some(p) => std::fs::write(p, &buf).map_err(|source| CliError::Io {
                    path: p.clone(),
                    source,
                })?,
                None => write_out(out, &String::from_utf8_lossy(&buf))?,
            }
        }
        Command::Defaults(a) => {
            let c = GeneratorConfig::default_for(a.scenario.into());
            write_out(out, &format!("{}\n", c.to_json_pretty()))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run_with(
            std::iter::once("aeroforge").chain(args.iter().copied()),
            &mut o,
            &mut e,
        );
        (
            code,
            String::from_utf8(o).unwrap(),
            String::from_utf8(e).unwrap(),
        )
    }

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(run_capture(&["--help"]).0, 0);
        let (code, out, _) = run_capture(&["--version"]);
        assert_eq!(code, 0);
        assert!(out.contains(env!("CARGO_PKG_VERSION")));
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        let (code, _, err) = run_capture(&["stats", "--manifest", "x", "--bogus"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("--bogus"));
    }

    #[test]
    fn every_subcommand_documents_its_flags() {
        use clap::CommandFactory;
        let cmd = Cli::command();
        for sub in cmd.get_subcommands() {
            assert!(sub.get_about().is_some(), "{}", sub.get_name());
            for arg in sub.get_arguments() {
                if arg.get_id() == "format" || arg.is_global_set() {
                    continue;
                }
                assert!(
                    arg.get_help().is_some() || arg.get_long().is_some(),
                    "{}",
                    arg.get_id()
                );
            }
        }
        cmd.debug_assert();
    }

    #[test]
    fn defaults_round_trip_through_the_config_parser() {
        for s in ["fire", "counting"] {
            let (code, out, _) = run_capture(&["defaults", "--scenario", s]);
            assert_eq!(code, 0);
            GeneratorConfig::from_json(&out).unwrap();
        }
    }

    #[test]
    fn missing_manifest_is_an_io_error() {
        assert_eq!(
            run_capture(&["stats", "--manifest", "/nonexistent/m.jsonl"]).0,
            EXIT_IO
        );
    }
}
