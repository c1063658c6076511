use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use twoway::analysis::{analyze, noe};
use twoway::config::{load_config_file, load_config_with_overrides};
use twoway::montecarlo::{simulate_parallel, SimOptions};
use twoway::sweep::{
    compare_report, fig3, fig4, fig5, read_csv, run_sweep, write_csv, Mode, SweepSpec, SweepVariable, DEFAULT_SEED,
    DEFAULT_TRIALS,
};
use twoway::{BlockingProfile, Error, Scheme, SystemConfig, SystemModel};

#[derive(Parser)]
#[command(name = "twoway", version, about = "Two-way molecular relay channel: analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML configuration; the reference parameters when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set release.zeta_r=2e-16`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SystemConfig> {
        let cfg = match &self.config {
            Some(path) => load_config_file(path, &self.overrides)
                .with_context(|| format!("loading {}", path.display()))?,
            None => {
                // leave timing out so that it follows memory overrides
                let mut doc = SystemConfig::reference(BlockingProfile::Low).to_document();
                doc.timing = None;
                load_config_with_overrides(&toml::to_string(&doc)?, &self.overrides)?
            }
        };
        Ok(cfg)
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Simulated super slots.
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads.
    #[arg(long, short = 'j', default_value_t = default_workers())]
    workers: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Pnc,
    Snc,
    Both,
}

impl SchemeArg {
    fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeArg::Pnc => vec![Scheme::Pnc],
            SchemeArg::Snc => vec![Scheme::Snc],
            SchemeArg::Both => Scheme::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Fig3,
    Fig4,
    Fig5,
}

#[derive(Subcommand)]
enum Command {
    /// Analytical error probabilities.
    Analyze {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value = "both")]
        scheme: SchemeArg,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo estimate of the error probabilities.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "both")]
        scheme: SchemeArg,
        /// Force every fed-back decision to be correct.
        #[arg(long)]
        genie: bool,
        /// Write the first `--trace-limit` slots as JSON lines.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        trace_limit: usize,
        #[arg(long)]
        json: bool,
    },
    /// Sweep one parameter and write CSV.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        run: RunArgs,
        /// zeta, xavg or memory.
        #[arg(long)]
        variable: SweepVariable,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "pnc,snc")]
        schemes: Vec<Scheme>,
        /// Blocking profiles; `custom` keeps the config's own rates.
        #[arg(long, value_delimiter = ',', default_value = "custom")]
        blocking: Vec<BlockingProfile>,
        #[arg(long, value_delimiter = ',', default_value = "analysis,simulation")]
        modes: Vec<Mode>,
        /// Output CSV; stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run a figure preset and write CSV.
    Preset {
        #[arg(value_enum)]
        name: Preset,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compare analysis and simulation rows of a sweep CSV.
    Compare {
        input: PathBuf,
        /// Largest acceptable |z| between analysis and simulation.
        #[arg(long, default_value_t = 3.0)]
        z_limit: f64,
        #[arg(long)]
        json: bool,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Analyze { config, scheme, json } => {
            let model = SystemModel::new(config.load()?)?;
            let mut results = Vec::new();
            for s in scheme.schemes() {
                let breakdown = analyze(&model, s)?;
                let approx = noe(&model, s).ok();
                results.push(serde_json::json!({ "scheme": s, "breakdown": breakdown, "noe": approx }));
                if !json {
                    println!("{s}: pe1 = {:.6e}  pe2 = {:.6e}  avg = {:.6e}", breakdown.pe[0], breakdown.pe[1], breakdown.avg_bep);
                    if let Some(n) = approx {
                        println!("{s} (no error propagation): pe1 = {:.6e}  pe2 = {:.6e}", n[0], n[1]);
                    }
                }
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&results)?);
            }
            Ok(true)
        }
        Command::Simulate {
            config,
            run,
            scheme,
            genie,
            trace_out,
            trace_limit,
            json,
        } => {
            let model = SystemModel::new(config.load()?)?;
            let mut opts = SimOptions::new(run.trials, run.seed);
            opts.genie = genie;
            opts.trace_limit = if trace_out.is_some() { trace_limit } else { 0 };
            let mut traces = match &trace_out {
                Some(p) => Some(BufWriter::new(File::create(p)?)),
                None => None,
            };
            let mut reports = Vec::new();
            for s in scheme.schemes() {
                let report = match simulate_parallel(&model, s, &opts, run.workers) {
                    Err(Error::Simulation { reason, trace }) => {
                        eprintln!("{}", serde_json::to_string(&trace)?);
                        bail!("{s}: invariant violated at super slot {}: {reason}", trace.k);
                    }
                    other => other?,
                };
                if let Some(w) = traces.as_mut() {
                    report.write_traces(&mut *w)?;
                }
                if !json {
                    println!(
                        "{s}: pe1 = {:.6e} ± {:.1e}  pe2 = {:.6e} ± {:.1e}  avg = {:.6e}  ({} slots)",
                        report.pe[0], report.stderr[0], report.pe[1], report.stderr[1], report.avg_bep, report.trials
                    );
                }
                reports.push(report);
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&reports)?);
            }
            Ok(true)
        }
        Command::Sweep {
            config,
            run,
            variable,
            grid,
            schemes,
            blocking,
            modes,
            output: out,
        } => {
            let spec = SweepSpec {
                variable,
                grid,
                schemes,
                blockings: blocking,
                modes,
                trials: run.trials,
                seed: run.seed,
            };
            let rows = run_sweep(&spec, &config.load()?, run.workers)?;
            write_csv(&rows, output(&out)?)?;
            Ok(true)
        }
        Command::Preset { name, run, output: out } => {
            let (spec, cfg) = match name {
                Preset::Fig3 => fig3(run.trials, run.seed),
                Preset::Fig4 => fig4(run.trials, run.seed)?,
                Preset::Fig5 => fig5(run.trials, run.seed),
            };
            let rows = run_sweep(&spec, &cfg, run.workers)?;
            write_csv(&rows, output(&out)?)?;
            Ok(true)
        }
        Command::Compare { input, z_limit, json } => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let report = compare_report(&read_csv(file)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.table());
            }
            Ok(report.passes(z_limit))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("comparison failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
