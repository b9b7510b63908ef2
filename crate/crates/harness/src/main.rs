use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use soup_harness::config::{ExperimentConfig, ExperimentKind};
use soup_harness::experiments::run_experiment;
use soup_harness::report::{emit_report, Format, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Command {
    Charfn,
    Clt,
    WindingCov,
    Holonomy,
    Spitzer,
    Oracle,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Charfn => ExperimentKind::Charfn,
            Command::Clt => ExperimentKind::Clt,
            Command::WindingCov => ExperimentKind::WindingCov,
            Command::Holonomy => ExperimentKind::Holonomy,
            Command::Spitzer => ExperimentKind::Spitzer,
            Command::Oracle => ExperimentKind::Oracle,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

/// Loop-soup verification experiments.
///
/// Exit status: 0 when every gate passes, 1 when a gate fails, 2 on
/// configuration or I/O errors.
#[derive(Debug, Parser)]
#[command(name = "soup", version)]
struct Cli {
    /// Experiment to run; must match the config's `kind`.
    #[arg(value_enum)]
    experiment: Command,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; falls back to the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for replicas; does not affect results.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output formats; all three by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Vec<FormatArg>,
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("soup: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return fail(format!("cannot read {}: {e}", cli.config.display())),
    };
    let cfg = match ExperimentConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return fail(format!("{}: {e}", cli.config.display())),
    };
    if cfg.kind != cli.experiment.kind() {
        return fail(format!("{}: kind: config is `{}` but `{}` was requested", cli.config.display(), cfg.kind, cli.experiment.kind()));
    }
    let Some(seed) = cli.seed.or(cfg.seed) else {
        return fail("no seed: pass --seed or set `seed` in the config");
    };
    let report = match run_experiment(&cfg, seed, cli.workers) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let formats: Vec<Format> = if cli.format.is_empty() {
        vec![Format::Json, Format::Csv, Format::Svg]
    } else {
        cli.format
            .iter()
            .map(|f| match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
                FormatArg::Svg => Format::Svg,
            })
            .collect()
    };
    if let Err(e) = emit_report(&report, &cli.out, &formats) {
        return fail(e);
    }
    let count = |s: Status| report.gates.iter().filter(|g| g.status == s).count();
    for g in report.failed_gates() {
        eprintln!(
            "FAIL {}: observed {:e}, target {:e}, tolerance {:e} ({})",
            g.name, g.observed, g.target, g.tolerance, g.source
        );
    }
    println!(
        "{}: {} passed, {} failed, {} skipped -> {}",
        report.experiment,
        count(Status::Pass),
        count(Status::Fail),
        count(Status::Skipped),
        cli.out.display()
    );
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
