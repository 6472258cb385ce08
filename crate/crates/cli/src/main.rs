use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use census_core::experiment::{
    emit_csv, load_records, preset, run_batch_full, summarize, write_csv, ExperimentRecord, ScenarioConfig, PRESETS,
};

/// Network size estimation experiments on simulated master/slave networks.
#[derive(Parser)]
#[command(name = "census", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write its records as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Record CSV destination; defaults to the config's `out`, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print per-run event traces to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Run a named preset grid, writing `<preset>.csv` and
    /// `<preset>_summary.csv`.
    Sweep {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Summarize a record CSV per scenario and protocol.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn warn_failures(records: &[ExperimentRecord]) {
    let failed = records.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} runs failed", records.len());
    }
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>, trace: bool) -> Result<()> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
        cfg.validate()?;
    }
    let batch = run_batch_full(&cfg, trace)?;
    if trace {
        let mut err = std::io::stderr().lock();
        for (rec, lines) in batch.records.iter().zip(&batch.traces) {
            writeln!(err, "# seed {}", rec.seed)?;
            for l in lines {
                writeln!(err, "{l}")?;
            }
        }
    }
    match out.or_else(|| cfg.out.clone()) {
        Some(path) => emit_csv(&batch.records, &path)?,
        None => write_csv(std::io::stdout().lock(), &batch.records).context("writing to stdout")?,
    }
    if let Some(path) = &cfg.round_metrics {
        emit_csv(&batch.rounds, path)?;
    }
    warn_failures(&batch.records);
    Ok(())
}

fn sweep(name: &str, out_dir: &Path) -> Result<()> {
    let Some(configs) = preset(name) else {
        bail!("unknown preset `{name}` (known: {})", PRESETS.join(", "));
    };
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut records = Vec::new();
    for cfg in &configs {
        eprintln!("{} {} ({} runs)", cfg.name, cfg.protocol, cfg.repetitions);
        records.extend(run_batch_full(cfg, false)?.records);
    }
    emit_csv(&records, &out_dir.join(format!("{name}.csv")))?;
    let summary = summarize(&records)?;
    emit_csv(&summary, &out_dir.join(format!("{name}_summary.csv")))?;
    for s in &summary {
        println!(
            "{:<22} {:<16} mean_abs_rel_error {} bias {} mean_rounds_or_hops {}",
            s.scenario,
            s.protocol,
            fmt_opt(s.mean_abs_rel_error),
            fmt_opt(s.bias),
            fmt_opt(s.mean_rounds_or_hops)
        );
    }
    warn_failures(&records);
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn summarize_file(input: &Path, out: &Path) -> Result<()> {
    let records = load_records(input)?;
    let summary = summarize(&records).with_context(|| format!("{}", input.display()))?;
    emit_csv(&summary, out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out, trace } => run(&config, seed, out, trace),
        Command::Sweep { preset, out_dir } => sweep(&preset, &out_dir),
        Command::Summarize { input, out } => summarize_file(&input, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
