//! The `aud` command line: one subcommand per pipeline stage.
//!
//! ```text
//! aud prior-fit  --manifest src.tsv --labels src.phn --out prior.audp
//! aud train      --manifest tgt.tsv --out model.audm [--prior prior.audp]
//! aud decode     --model model.audm --manifest tgt.tsv --align-out units.ali
//! aud eval-units --align units.ali --ref-phones tgt.phn --report units.tsv
//! aud segment    --align units.ali --out words.seg
//! aud eval-words --seg words.seg --align units.ali --ref-words tgt.wrd --report words.tsv
//! ```
//!
//! Exit status is 0 on success, 2 for argument and configuration errors and
//! 1 for data or inference errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

use aud_core::AudError;

mod commands;
pub mod output;

#[derive(Debug, Parser)]
#[command(name = "aud", version, about = "Acoustic unit discovery and word segmentation")]
pub struct Cli {
    /// Suppress progress messages on standard error.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a phone-loop model by variational Bayes.
    Train(TrainArgs),
    /// Fit an informative prior on a labeled corpus.
    PriorFit(PriorFitArgs),
    /// Decode unit alignments (and optionally lattices).
    Decode(DecodeArgs),
    /// Score unit alignments against reference phones.
    EvalUnits(EvalUnitsArgs),
    /// Segment decoded unit sequences into words.
    Segment(SegmentArgs),
    /// Score word segmentations against reference words.
    EvalWords(EvalWordsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::PriorFit(_) => "prior-fit",
            Command::Decode(_) => "decode",
            Command::EvalUnits(_) => "eval-units",
            Command::Segment(_) => "segment",
            Command::EvalWords(_) => "eval-words",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// Subtract the per-utterance mean of every coefficient.
    #[arg(long)]
    pub mean_norm: bool,
    /// Append delta and delta-delta coefficients.
    #[arg(long)]
    pub deltas: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ScheduleArgs {
    /// Maximum number of training epochs.
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Relative ELBO change below which training stops.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for utterance-parallel steps (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Informative prior from `prior-fit`.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Number of acoustic units (truncation level).
    #[arg(long = "K", default_value_t = 50)]
    pub k: usize,
    /// Gaussians per HMM state.
    #[arg(long = "M", default_value_t = 2)]
    pub m: usize,
    /// Concentration of the unit weights.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// ELBO log (default: `<out>.elbo.tsv`).
    #[arg(long)]
    pub elbo_log: Option<PathBuf>,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct PriorFitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Time-aligned phone labels of the manifest's utterances.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Units of the target model; fails early if fewer than the phones found.
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long = "M", default_value_t = 2)]
    pub m: usize,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub align_out: PathBuf,
    #[arg(long)]
    pub lattice_out: Option<PathBuf>,
    /// Lattice pruning beam in nats.
    #[arg(long, default_value_t = 10.0)]
    pub beam: f64,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalUnitsArgs {
    #[arg(long)]
    pub align: PathBuf,
    #[arg(long)]
    pub ref_phones: PathBuf,
    /// Boundary matching tolerance in milliseconds.
    #[arg(long, default_value_t = 10.0)]
    pub tol_ms: f64,
    #[arg(long)]
    pub report: PathBuf,
    /// Append per-utterance scores to the report.
    #[arg(long)]
    pub per_utt: bool,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub align: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 10)]
    pub max_word_len: usize,
    /// Pitman-Yor discount of both levels.
    #[arg(long, default_value_t = 0.5)]
    pub d: f64,
    /// Pitman-Yor strength of both levels.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Stop probability of the word spelling model.
    #[arg(long, default_value_t = 0.5)]
    pub pstop: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Temper word probabilities, cooling from temperature 10 to 1.
    #[arg(long)]
    pub anneal: bool,
}

#[derive(Debug, Args)]
pub struct EvalWordsArgs {
    #[arg(long)]
    pub seg: PathBuf,
    #[arg(long)]
    pub align: PathBuf,
    #[arg(long)]
    pub ref_words: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    pub tol_ms: f64,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub per_utt: bool,
}

/// Why a run failed, which fixes the exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Run(AudError),
}

impl From<AudError> for Failure {
    fn from(e: AudError) -> Self {
        match e {
            AudError::Config(m) => Failure::Usage(m),
            other => Failure::Run(other),
        }
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Run(_) => 1,
        }
    }
}

pub(crate) fn require_file(flag: &str, p: &Path) -> Result<(), Failure> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{flag}: {} is not a readable file", p.display())))
    }
}

pub(crate) fn require_out_dir(flag: &str, p: &Path) -> Result<(), Failure> {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() && !d.is_dir() => {
            Err(Failure::Usage(format!("--{flag}: directory {} does not exist", d.display())))
        }
        _ => Ok(()),
    }
}

/// Parse `argv` (program name first), run the subcommand and return the
/// exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::dispatch(&cli, &argv) {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Usage(m) => {
                    eprintln!("error: {m}\n");
                    let mut cmd = Cli::command();
                    let name = cli.command.name();
                    match cmd.find_subcommand_mut(name) {
                        Some(sub) => eprintln!("{}", sub.render_usage()),
                        None => eprintln!("{}", cmd.render_usage()),
                    }
                }
                Failure::Run(e) => eprintln!("error: {e}"),
            }
            f.exit_code()
        }
    }
}
