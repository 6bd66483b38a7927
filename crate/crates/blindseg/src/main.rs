use std::path::PathBuf;
use std::process::ExitCode;

use blindseg::pipeline::{self, Hypotheses, StageStatus, Workspace};
use blindseg::{PipelineConfig, Result};
use blindseg_core::MatchMode;
use clap::{Parser, Subcommand};

/// Blind phoneme segmentation from prediction-error peaks.
#[derive(Parser, Debug)]
#[command(name = "blindseg", version)]
struct Cli {
    /// TOML configuration file; every setting has a default.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a setting, e.g. `--set model.kind=rnn-cat`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Shorthand for `--set corpus.root=PATH`.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Shorthand for `--set corpus.work_dir=PATH`.
    #[arg(long, global = true)]
    work: Option<PathBuf>,
    /// Shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the effective configuration as TOML.
    Config {
        /// Print the built-in defaults instead.
        #[arg(long)]
        dump: bool,
    },
    /// Generate a synthetic corpus with known boundaries.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract features, fit the codebook and quantize the corpus.
    Prepare,
    /// Train the configured model.
    Train,
    /// Write boundary files for the test split.
    Segment {
        /// Peak threshold (defaults to `segment.delta`).
        #[arg(long)]
        delta: Option<f64>,
        /// Output directory (defaults to `<work>/boundaries`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-utterance error signals.
        #[arg(long)]
        dump_errors: bool,
    },
    /// Score boundary files against the gold annotations.
    Evaluate {
        /// Directory of `<id>.bnd` files (defaults to `<work>/boundaries`).
        #[arg(long, conflicts_with = "periodic")]
        boundaries: Option<PathBuf>,
        /// Score the periodic baseline instead.
        #[arg(long)]
        periodic: bool,
        /// Report cropped and overlapping windows.
        #[arg(long)]
        all_modes: bool,
    },
    /// Score the test split over `segment.deltas`.
    Sweep,
    /// prepare, train, segment and evaluate in one go.
    Run,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut overrides = cli.overrides.clone();
    let quote = |p: &PathBuf| format!("{:?}", p.to_string_lossy());
    if let Some(p) = &cli.corpus {
        overrides.push(format!("corpus.root={}", quote(p)));
    }
    if let Some(p) = &cli.work {
        overrides.push(format!("corpus.work_dir={}", quote(p)));
    }
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    PipelineConfig::load(cli.config.as_deref(), &overrides)
}

fn status(stage: &str, s: StageStatus) {
    match s {
        StageStatus::Computed => eprintln!("{stage}: done"),
        StageStatus::UpToDate => eprintln!("{stage}: up to date"),
    }
}

fn evaluate(config: &PipelineConfig, hyps: Hypotheses, all_modes: bool) -> Result<()> {
    let modes = if all_modes { vec![MatchMode::Cropped, MatchMode::Overlapping] } else { vec![config.eval.mode] };
    let name = match hyps {
        Hypotheses::Periodic => "periodic".to_string(),
        Hypotheses::Directory(_) => config.model.kind.name().to_string(),
    };
    let rows = pipeline::evaluate(config, &hyps, &modes)?;
    let (csv, _) = pipeline::write_report(config, &name, &rows)?;
    print!("{}", blindseg::formats::format_report_table(&rows));
    eprintln!("evaluate: wrote {}", csv.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli)?;
    let ws = Workspace::new(&config.corpus.work_dir);
    match cli.command {
        Command::Config { dump } => {
            let shown = if dump { PipelineConfig::default() } else { config };
            print!("{}", shown.to_toml());
        }
        Command::Synth { out } => {
            let m = pipeline::synth(&config, &out)?;
            eprintln!("synth: {} train / {} test utterances in {}", m.train.len(), m.test.len(), out.display());
        }
        Command::Prepare => status("prepare", pipeline::prepare(&config)?.0),
        Command::Train => status("train", pipeline::train(&config)?),
        Command::Segment { delta, out, dump_errors } => {
            config.segment.dump_errors |= dump_errors;
            let out = out.unwrap_or_else(|| ws.boundaries_dir());
            let s = pipeline::segment(&config, delta.unwrap_or(config.segment.delta), &out)?;
            eprintln!("segment: {} boundaries over {} utterances in {}", s.boundaries, s.utterances, out.display());
        }
        Command::Evaluate { boundaries, periodic, all_modes } => {
            let hyps = if periodic {
                Hypotheses::Periodic
            } else {
                Hypotheses::Directory(boundaries.unwrap_or_else(|| ws.boundaries_dir()))
            };
            evaluate(&config, hyps, all_modes)?;
        }
        Command::Sweep => {
            let points = pipeline::sweep(&config)?;
            print!("{}", blindseg::formats::format_sweep_csv(&points));
        }
        Command::Run => {
            status("prepare", pipeline::prepare(&config)?.0);
            status("train", pipeline::train(&config)?);
            let s = pipeline::segment(&config, config.segment.delta, &ws.boundaries_dir())?;
            eprintln!("segment: {} boundaries over {} utterances", s.boundaries, s.utterances);
            evaluate(&config, Hypotheses::Directory(ws.boundaries_dir()), false)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
