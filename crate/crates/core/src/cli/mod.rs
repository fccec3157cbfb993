//! The `midinet` command line: preprocess, train, generate, stats.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | any other failure, including usage errors and diverged training |
//! | 2 | an input file or directory could not be read or decoded |
//! | 3 | preprocessing accepted no files (the report is still written) |
//! | 4 | model variant and data disagree (chords missing or unexpected) |
//! | 5 | a chord token could not be parsed |

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{ConfigError, ConfigFile, KNOWN_KEYS};

use crate::dataset::{
    chord_to_vec, make_training_triples, preprocess_song, primer_bar, raw_roll, split_at_barlines, transpose_augment,
    BarGroup, BarRoll, Chord, ChordVec, Dataset,
};
use crate::midi::{parse_midi, quantize, write_midi, GridNote, STEPS_PER_BAR};
use crate::models::{ModelConfig, MonoMode};
use crate::sampler::{generate_sequence, GenerationRequest};
use crate::stats::RollStats;
use crate::trainer::{load_checkpoint, train, TrainConfig, TrainOutputs};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Failure = 1,
    Unreadable = 2,
    NothingAccepted = 3,
    Mismatch = 4,
    BadChord = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    fn new(code: ExitCode, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(ExitCode::Failure, e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "midinet",
    version,
    about = "Bar-by-bar melody generation with a convolutional GAN"
)]
pub struct Cli {
    /// Line-oriented `key = value` settings file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log more to stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Turn a directory of MIDI files into a training dataset.
    Preprocess(PreprocessArgs),
    /// Train a model variant on a dataset.
    Train(TrainArgs),
    /// Render bars from a checkpoint to a MIDI file.
    Generate(GenerateArgs),
    /// Pitch statistics of a dataset or a MIDI file.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// 1 melody only, 2 melody and chords, 3 like 2 with all layers conditioned.
    #[arg(long)]
    pub variant: Option<u8>,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint path; metrics go to `<out>.metrics.tsv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<u64>,
    #[arg(long)]
    pub lr: Option<f32>,
    #[arg(long)]
    pub label_smooth: Option<f32>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// `straight-through` or `sampling-only`.
    #[arg(long)]
    pub mono: Option<MonoArg>,
    /// Also show the previous bar to the discriminator.
    #[arg(long)]
    pub d_sees_prev: Option<bool>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub bars: Option<usize>,
    /// MIDI file whose first melody bar opens the output.
    #[arg(long)]
    pub primer: Option<PathBuf>,
    /// Comma-separated chords such as `C,Am,F,G`, repeated to cover all bars.
    #[arg(long)]
    pub chords: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub bpm: Option<f32>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Dataset file or MIDI file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonoArg(pub MonoMode);

impl std::str::FromStr for MonoArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "straight-through" | "straight_through" => Ok(MonoArg(MonoMode::StraightThrough)),
            "sampling-only" | "sampling_only" => Ok(MonoArg(MonoMode::SamplingOnly)),
            _ => Err(format!("unknown mono mode {s:?}")),
        }
    }
}

/// Parse `args` (program name first), run the subcommand and return the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::Failure as i32 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("midinet: {}", e.message);
            e.code as i32
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| unreadable(p, e))?;
            ConfigFile::parse(&text)?
        }
        None => ConfigFile::default(),
    };
    match &cli.command {
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Train(a) => cmd_train(a, &file),
        Command::Generate(a) => cmd_generate(a, &file),
        Command::Stats(a) => cmd_stats(a),
    }
}

fn unreadable(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new(ExitCode::Unreadable, format!("{}: {e}", path.display()))
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::new(ExitCode::Failure, e.to_string())
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| failure(format!("{}: {e}", path.display())))
}

fn emit_report(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_output(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn is_midi(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
}

/// Outcome of one file in the preprocessing report.
struct FileOutcome {
    name: String,
    groups: usize,
    chords: bool,
    reason: Option<String>,
}

pub fn cmd_preprocess(args: &PreprocessArgs) -> Result<()> {
    std::fs::read_dir(&args.input).map_err(|e| unreadable(&args.input, e))?;
    let mut paths = Vec::new();
    for entry in walkdir::WalkDir::new(&args.input).sort_by_file_name() {
        let entry = entry.map_err(|e| unreadable(&args.input, e))?;
        if entry.file_type().is_file() && is_midi(entry.path()) {
            paths.push(entry.into_path());
        }
    }

    let mut outcomes = Vec::with_capacity(paths.len());
    let mut songs = Vec::new();
    for path in &paths {
        let name = path.strip_prefix(&args.input).unwrap_or(path).display().to_string();
        let result = std::fs::read(path)
            .map_err(|e| e.to_string())
            .and_then(|b| parse_midi(&b).map_err(|e| e.to_string()))
            .and_then(|s| preprocess_song(&s).map_err(|e| e.to_string()));
        match result {
            Ok(song) => {
                for why in &song.skipped {
                    log::info!("{name}: {why}");
                }
                outcomes.push(FileOutcome {
                    name,
                    groups: song.groups.len(),
                    chords: song.has_chords,
                    reason: None,
                });
                songs.push(song);
            }
            Err(reason) => {
                log::warn!("skipping {name}: {reason}");
                outcomes.push(FileOutcome {
                    name,
                    groups: 0,
                    chords: false,
                    reason: Some(reason),
                });
            }
        }
    }

    let keep_chords = !songs.is_empty() && songs.iter().all(|s| s.has_chords);
    let groups: Vec<BarGroup> = songs
        .into_iter()
        .flat_map(|s| s.groups)
        .map(|g| BarGroup {
            chords: if keep_chords { g.chords } else { None },
            ..g
        })
        .collect();
    let augmented = transpose_augment(&groups);
    let triples: Vec<_> = augmented.iter().flat_map(make_training_triples).collect();

    let accepted = outcomes.iter().filter(|o| o.reason.is_none()).count();
    let report = preprocess_report(&args.input, &outcomes, groups.len(), triples.len(), keep_chords);
    emit_report(args.report.as_deref(), &report)?;
    if accepted == 0 {
        return Err(CliError::new(
            ExitCode::NothingAccepted,
            format!(
                "no usable MIDI files among {} found in {}",
                paths.len(),
                args.input.display()
            ),
        ));
    }
    let dataset = Dataset::new(triples).map_err(failure)?;
    write_output(&args.out, &dataset.to_bytes())?;
    log::info!("wrote {} triples to {}", dataset.len(), args.out.display());
    Ok(())
}

fn preprocess_report(dir: &Path, outcomes: &[FileOutcome], groups: usize, triples: usize, chords: bool) -> String {
    let accepted = outcomes.iter().filter(|o| o.reason.is_none()).count();
    let mut s = String::new();
    let _ = writeln!(s, "preprocessing {}", dir.display());
    let _ = writeln!(s, "files found: {}", outcomes.len());
    let _ = writeln!(s, "files accepted: {accepted}");
    let _ = writeln!(s, "files skipped: {}", outcomes.len() - accepted);
    if outcomes.is_empty() {
        let _ = writeln!(s, "no .mid or .midi files were found");
    } else if accepted == 0 {
        let _ = writeln!(s, "every file was rejected; see reasons below");
    }
    for o in outcomes {
        if let Some(r) = &o.reason {
            let _ = writeln!(s, "  skipped {}: {r}", o.name);
        }
    }
    let _ = writeln!(s, "8-bar groups: {groups}");
    let _ = writeln!(s, "training triples after 12-key augmentation: {triples}");
    let _ = writeln!(s, "chords kept: {}", if chords { "yes" } else { "no" });
    let _ = writeln!(s);
    let _ = writeln!(s, "[summary]\nkey\tvalue");
    let _ = writeln!(s, "files\t{}", outcomes.len());
    let _ = writeln!(s, "accepted\t{accepted}");
    let _ = writeln!(s, "groups\t{groups}");
    let _ = writeln!(s, "triples\t{triples}");
    let _ = writeln!(s, "chords\t{}", u8::from(chords));
    let _ = writeln!(s, "[files]\nfile\tstatus\tgroups\tchords\treason");
    for o in outcomes {
        let status = if o.reason.is_some() { "skipped" } else { "accepted" };
        let reason = o.reason.as_deref().unwrap_or("").replace(['\t', '\n'], " ");
        let _ = writeln!(
            s,
            "{}\t{status}\t{}\t{}\t{reason}",
            o.name,
            o.groups,
            u8::from(o.chords)
        );
    }
    s
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| unreadable(path, e))?;
    Dataset::from_bytes(&bytes).map_err(|e| unreadable(path, e))
}

/// Path of the metrics log written next to checkpoint `ckpt`.
pub fn metrics_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".metrics.tsv");
    PathBuf::from(s)
}

pub fn cmd_train(args: &TrainArgs, file: &ConfigFile) -> Result<()> {
    let variant: u8 = file.resolve(args.variant, "variant", 1)?;
    let mut model = ModelConfig::for_id(variant).map_err(failure)?;
    model.mono = file.resolve(args.mono, "mono", MonoArg(MonoMode::default()))?.0;
    model.d_sees_prev = file.resolve(args.d_sees_prev, "d_sees_prev", false)?;

    let mut config = TrainConfig::new(model);
    config.epochs = file.resolve(args.epochs, "epochs", config.epochs)?;
    config.seed = file.resolve(args.seed, "seed", config.seed)?;
    config.batch_size = file.resolve(args.batch_size, "batch_size", config.batch_size)?;
    config.max_iterations = file.resolve_opt(args.max_iterations, "max_iterations")?;
    config.adam.lr = file.resolve(args.lr, "lr", config.adam.lr)?;
    config.label_smooth = file.resolve(args.label_smooth, "label_smooth", config.label_smooth)?;
    config.checkpoint_every = file.resolve_opt(args.checkpoint_every, "checkpoint_every")?;
    config.validate().map_err(failure)?;

    let dataset = read_dataset(&args.dataset)?;
    if model.variant.use_chord && !dataset.has_chords {
        return Err(CliError::new(
            ExitCode::Mismatch,
            format!("variant {variant} needs chords but {} has none", args.dataset.display()),
        ));
    }
    let outputs = TrainOutputs {
        checkpoint: Some(args.out.clone()),
        metrics: Some(metrics_path(&args.out)),
    };
    log::info!("training variant {variant} on {} triples", dataset.len());
    let (ckpt, log) = train(&dataset.triples, config, &outputs).map_err(failure)?;
    if let Some(last) = log.rows.last() {
        log::info!(
            "finished after {} iterations: d_loss {:.4}, g_adv {:.4}",
            ckpt.iteration,
            last.d_loss,
            last.g_adv
        );
    }
    Ok(())
}

/// Parse a comma-separated chord list, naming the first bad token.
pub fn parse_chord_spec(spec: &str) -> Result<Vec<ChordVec>> {
    spec.split(',')
        .map(|tok| {
            Chord::parse(tok)
                .map(chord_to_vec)
                .map_err(|_| CliError::new(ExitCode::BadChord, format!("bad chord token {:?}", tok.trim())))
        })
        .collect()
}

pub fn cmd_generate(args: &GenerateArgs, file: &ConfigFile) -> Result<()> {
    let n_bars: usize = file.resolve(args.bars, "bars", 8)?;
    let seed: u64 = file.resolve(args.seed, "seed", 0)?;
    let bpm: f32 = file.resolve(args.bpm, "bpm", 120.0)?;
    let chords = args.chords.as_deref().map(parse_chord_spec).transpose()?;
    if n_bars == 0 {
        return Err(failure("--bars must be at least 1"));
    }

    let ckpt = load_checkpoint(&args.ckpt).map_err(|e| unreadable(&args.ckpt, e))?;
    let nets = ckpt.networks;
    let variant = nets.config.variant;
    let chords = match (chords, variant.use_chord) {
        (Some(_), false) => {
            return Err(CliError::new(
                ExitCode::Mismatch,
                format!("variant {} does not take chords", variant.id),
            ))
        }
        (None, true) => {
            return Err(CliError::new(
                ExitCode::Mismatch,
                format!("variant {} needs --chords", variant.id),
            ))
        }
        (Some(c), true) => Some(c.iter().cycle().take(n_bars).copied().collect::<Vec<_>>()),
        (None, false) => None,
    };

    let primer = match &args.primer {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| unreadable(p, e))?;
            let song = parse_midi(&bytes).map_err(|e| unreadable(p, e))?;
            Some(primer_bar(&song).map_err(|e| unreadable(p, e))?)
        }
        None => None,
    };
    let req = GenerationRequest {
        primer,
        chords,
        n_bars,
        seed,
    };
    let generation = generate_sequence(&nets, &req).map_err(failure)?;
    let midi = write_midi(&generation.bars, req.chords.as_deref(), bpm).map_err(failure)?;
    write_output(&args.out, &midi)?;
    log::info!("wrote {n_bars} bars to {}", args.out.display());
    Ok(())
}

/// Bars of a stats input: a dataset's current bars, or the unfilled rolls
/// of a MIDI file's first track.
fn stats_bars(path: &Path) -> Result<Vec<BarRoll>> {
    let bytes = std::fs::read(path).map_err(|e| unreadable(path, e))?;
    if bytes.starts_with(crate::dataset::DATASET_MAGIC) {
        let ds = Dataset::from_bytes(&bytes).map_err(|e| unreadable(path, e))?;
        return Ok(ds.triples.into_iter().map(|t| t.cur).collect());
    }
    let song = parse_midi(&bytes).map_err(|e| unreadable(path, e))?;
    let notes = song
        .tracks
        .first()
        .map(|t| quantize(&t.notes, song.ppq))
        .unwrap_or_default();
    let end = notes.iter().map(GridNote::end).max().unwrap_or(0);
    let n_bars = end.div_ceil(STEPS_PER_BAR) as usize;
    Ok(split_at_barlines(&notes, n_bars).iter().map(|b| raw_roll(b)).collect())
}

pub fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let bars = stats_bars(&args.input)?;
    let report = RollStats::from_bars(&bars).report(&format!("statistics of {}", args.input.display()));
    emit_report(args.out.as_deref(), &report)
}
