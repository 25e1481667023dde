//! `cfisac`: scenario generation, single evaluations and the three sweeps.
//!
//! Exits with status 2 when any design hit a numerical failure or ran out of
//! iterations; the output is still written.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use cfisac_core::channel::{generate, GeneratorConfig, Setup};
use cfisac_harness::config::ExperimentConfig;
use cfisac_harness::output::{write_records, write_table};
use cfisac_harness::run::run_realization;
use cfisac_harness::sweep::{sweep_power_ratio, sweep_streams_ues, sweep_target_distance, SweepTable};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cfisac", version, about = "Cell-free ISAC beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one realization and print its geometry and channels as JSON.
    GenScenario(Common),
    /// Run every configured design on one realization and print the records as JSON.
    Eval(Common),
    /// Sweep the communication share `ρ` of the separate designs.
    SweepRho(Common),
    /// Bin realizations by target-to-UE distance.
    SweepDistance(Common),
    /// Sweep the number of UEs and of sensing streams.
    SweepStreams(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum SetupArg {
    Line,
    Square,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; missing fields take the command's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// First seed (single seed for `gen-scenario` and `eval`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Replaces the generator with the defaults of this setup.
    #[arg(long, value_enum)]
    setup: Option<SetupArg>,
    #[arg(long)]
    ues: Option<usize>,
    /// Record wall-clock times (makes the output machine dependent).
    #[arg(long)]
    timing: bool,
    /// Output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-realization CSV, sweeps only.
    #[arg(long)]
    records: Option<PathBuf>,
}

impl Common {
    fn config(&self, preset: ExperimentConfig) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => preset,
        };
        if let Some(s) = self.setup {
            c.generator = GeneratorConfig::for_setup(match s {
                SetupArg::Line => Setup::Line,
                SetupArg::Square => Setup::Square,
            });
        }
        if let Some(u) = self.ues {
            c.generator.n_ues = u;
        }
        if let Some(s) = self.seed {
            c.seed_base = s;
        }
        if let Some(r) = self.realizations {
            c.realizations = r;
        }
        c.timing |= self.timing;
        if let Err(e) = c.validate() {
            bail!("invalid config: {e}");
        }
        Ok(c)
    }

    fn sink(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn complex_list(v: &[cfisac_conic::CVec]) -> serde_json::Value {
    v.iter().map(|h| h.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).collect()
}

fn sweep(name: &str, args: &Common, config: &ExperimentConfig, table: SweepTable) -> anyhow::Result<bool> {
    let mut out = args.sink()?;
    write_table(&mut out, name, config, &table)?;
    out.flush()?;
    if let Some(p) = &args.records {
        let mut f = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
        write_records(&mut f, name, config, &table)?;
        f.flush()?;
    }
    Ok(table.has_numerical_failure())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match &cli.command {
        Command::GenScenario(a) => {
            let c = a.config(ExperimentConfig::default())?;
            let mut gen = c.generator.clone();
            gen.seed = c.seed_base;
            let (sc, ch) = generate(&gen)?;
            let doc = json!({
                "seed": gen.seed,
                "scenario": sc,
                "target_ue_distance_m": sc.target_ue_distance(),
                "comm_channels": complex_list(&ch.comm_channels),
                "tx_steering": complex_list(&ch.tx_steering),
                "rx_steering": complex_list(&ch.rx_steering),
            });
            let mut out = a.sink()?;
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
            Ok(false)
        }
        Command::Eval(a) => {
            let c = a.config(ExperimentConfig::default())?;
            let r = run_realization(&c, c.seed_base)?;
            let mut out = a.sink()?;
            serde_json::to_writer_pretty(&mut out, &r)?;
            writeln!(out)?;
            Ok(r.has_numerical_failure())
        }
        Command::SweepRho(a) => {
            let c = a.config(ExperimentConfig::power_ratio())?;
            sweep("sweep-rho", a, &c, sweep_power_ratio(&c)?)
        }
        Command::SweepDistance(a) => {
            let c = a.config(ExperimentConfig::target_distance())?;
            sweep("sweep-distance", a, &c, sweep_target_distance(&c)?)
        }
        Command::SweepStreams(a) => {
            let c = a.config(ExperimentConfig::streams_ues())?;
            sweep("sweep-streams", a, &c, sweep_streams_ues(&c)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("cfisac: at least one design hit a numerical failure");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("cfisac: {e:#}");
            ExitCode::FAILURE
        }
    }
}
