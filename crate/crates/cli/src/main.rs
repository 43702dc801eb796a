//! `kpp`: run lattice Fisher-KPP experiments from a TOML config and write
//! CSV tables, SVG charts and a manifest into an output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use lattice_kpp::config::Config;
use lattice_kpp::output::{ArtifactWriter, RunManifest};
use lattice_kpp::FamilyParams;

#[derive(Parser, Debug)]
#[command(name = "kpp", version, about = "Traveling waves of lattice Fisher-KPP equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config; a homogeneous logistic field if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out/<command>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the data-parallel loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Multiply every convergence tolerance by this factor.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Check the standing hypotheses on the coefficient field.
    Audit,
    /// Integrate front-like or random initial data.
    Simulate,
    /// Pullback construction of the positive entire solution u+.
    Entire,
    /// Principal Floquet exponents of the tilted linearization.
    Floquet,
    /// Spreading speed c* and its minimizing tilt.
    Speed,
    /// Periodic traveling wave by monotone iteration.
    WavePeriodic,
    /// Transition wave in a time-only medium.
    WaveTimehet,
    /// Part-metric contraction and comparison on random pairs.
    Partmetric,
    /// Convergence of perturbed front data to the wave.
    Stability,
    /// Gap between the upper and lower wave limits.
    Uniqueness,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Audit => "audit",
            Command::Simulate => "simulate",
            Command::Entire => "entire",
            Command::Floquet => "floquet",
            Command::Speed => "speed",
            Command::WavePeriodic => "wave-periodic",
            Command::WaveTimehet => "wave-timehet",
            Command::Partmetric => "partmetric",
            Command::Stability => "stability",
            Command::Uniqueness => "uniqueness",
        }
    }
}

const EXIT_DIAGNOSTIC: u8 = 2;
const EXIT_USAGE: u8 = 64;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_DIAGNOSTIC),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn threads(requested: Option<usize>) -> lattice_kpp::Result<usize> {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = requested {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| lattice_kpp::Error::Parameter(format!("thread pool: {e}")))?;
        }
        Ok(rayon::current_num_threads())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = requested;
        Ok(1)
    }
}

fn run(cli: &Cli) -> lattice_kpp::Result<bool> {
    let start = Instant::now();
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::from_field(FamilyParams::Homogeneous { d: 1.0, r: 1.0, a: 1.0 }),
    };
    if !(cli.tol_scale > 0.0) {
        return Err(lattice_kpp::Error::Parameter("--tol-scale must be positive".into()));
    }
    cfg.scale_tolerances(cli.tol_scale);
    let threads = threads(cli.threads)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out").join(cli.command.name()));
    let mut writer = ArtifactWriter::new(&out)?;
    let report = commands::dispatch(cli.command, &cfg, &mut writer)?;
    let passed = report.passed;
    let manifest = RunManifest {
        command: cli.command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.to_json(),
        seed: cfg.seed,
        parameters: report.parameters,
        tolerances: report.tolerances,
        diagnostics: report.diagnostics,
        status: if passed { "pass" } else { "fail" }.into(),
        parallel: lattice_kpp::par::is_parallel(),
        threads,
        artifacts: Vec::new(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let path = writer.finish(manifest)?;
    println!("{}: {} ({})", cli.command.name(), if passed { "pass" } else { "fail" }, path.display());
    Ok(passed)
}
