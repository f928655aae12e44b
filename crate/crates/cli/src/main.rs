use std::path::PathBuf;
use std::process::ExitCode;

use also_cli::bench;
use also_cli::config::{BackendSpec, ExperimentConfig, OptimizerSpec, Overrides};
use also_cli::error::{CliError, Result};
use also_cli::experiment::{run_experiment, sweep_table, write_run, RunOutput};
use also_cli::output;
use also_cli::presets;
use clap::{Args, Parser, Subcommand};

/// Shadow-based training of layered variational circuits.
#[derive(Parser)]
#[command(name = "also", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every backend on every instance; write traces, curves and a summary.
    Run(ExperimentArgs),
    /// Run, then report the copies needed to reach each objective level.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Objective levels, comma separated.
        #[arg(long, value_delimiter = ',')]
        objectives: Vec<f64>,
    },
    /// Time single shadow evaluations at d = ⌊log₂ n⌋.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "8,10,12,14,16,18,20,22,24,26,28,30")]
        n: Vec<usize>,
        /// Fixed depth instead of ⌊log₂ n⌋.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        shadows: u64,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bench.csv")]
        output: PathBuf,
    },
    /// Create or inspect shadow files.
    Shadows {
        #[command(subcommand)]
        command: ShadowsCommand,
    },
    /// Print a preset's TOML.
    Presets { name: Option<String> },
}

#[derive(Subcommand)]
enum ShadowsCommand {
    /// Sample T shadows of one instance of an experiment.
    Sample {
        #[command(flatten)]
        source: ConfigSource,
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long)]
        shadows: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write a JSON export.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print header, basis frequencies and leading records.
    Inspect {
        file: PathBuf,
        #[arg(long, default_value_t = 5)]
        records: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigSource {
    /// Experiment TOML file.
    config: Option<PathBuf>,
    /// Built-in preset (sp8, sp30, ae8, ae30).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Override the instance seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigSource {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => presets::load(name)?,
            (None, None) => return Err(CliError::Config("give a config file or --preset".into())),
        };
        if let Some(s) = self.seed {
            cfg.apply(&Overrides {
                seed: Some(s),
                ..Overrides::default()
            })?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    source: ConfigSource,
    /// Replace the backend list (repeatable): exact, shots:K, shadow:T.
    #[arg(long = "backend")]
    backends: Vec<String>,
    /// spsa:R=..,s=.. or powell[:cap=..,tol=..,line_tol=..].
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    log_every: Option<u64>,
}

impl ExperimentArgs {
    fn config(&self, objectives: Vec<f64>) -> Result<ExperimentConfig> {
        let mut cfg = self.source.load()?;
        let backends = self
            .backends
            .iter()
            .map(|b| b.parse::<BackendSpec>().map_err(|e| CliError::Config(format!("--backend: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let optimizer = self
            .optimizer
            .as_deref()
            .map(|o| o.parse::<OptimizerSpec>().map_err(|e| CliError::Config(format!("--optimizer: {e}"))))
            .transpose()?;
        cfg.apply(&Overrides {
            backends,
            optimizer,
            instances: self.instances,
            seed: None,
            output: self.output.clone(),
            log_every: self.log_every,
            objectives,
        })?;
        Ok(cfg)
    }
}

fn configure_workers() -> Result<()> {
    if let Ok(v) = std::env::var("ALSO_WORKERS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("ALSO_WORKERS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }
    Ok(())
}

fn report(out: &RunOutput) -> Result<()> {
    for b in &out.summary.backends {
        let a = &b.aggregate;
        let infid = a
            .best_infidelity
            .map(|s| format!("  best infidelity {:.4} ± {:.4}", s.mean, s.std))
            .unwrap_or_default();
        let copies = if b.copies_infinite {
            "infinite".to_string()
        } else {
            format!("{:.0}", a.copies.mean)
        };
        println!(
            "{:<16} best cost {:.4} ± {:.4}{infid}  copies {copies}",
            b.backend.to_string(),
            a.best_exact_cost.mean,
            a.best_exact_cost.std
        );
    }
    let aborted = out.aborted();
    if !aborted.is_empty() {
        let which: Vec<String> = aborted.iter().map(|r| format!("{} #{}", r.backend, r.index)).collect();
        return Err(CliError::Numerical(format!("aborted runs: {}", which.join(", "))));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    configure_workers()?;
    match cli.command {
        Command::Run(args) => {
            let cfg = args.config(Vec::new())?;
            let out = run_experiment(&cfg)?;
            write_run(&out, &cfg.output)?;
            println!("wrote {}", cfg.output.display());
            report(&out)
        }
        Command::Sweep { exp, objectives } => {
            let cfg = exp.config(objectives)?;
            if cfg.objectives.is_empty() {
                return Err(CliError::Config("sweep needs objectives (config or --objectives)".into()));
            }
            let out = run_experiment(&cfg)?;
            write_run(&out, &cfg.output)?;
            let rows = sweep_table(&out, cfg.sweep_metric(), &cfg.objectives);
            let path = cfg.output.join("sweep.csv");
            output::write_sweep(&path, &rows)?;
            for r in &rows {
                let copies = match (r.copies_infinite, r.mean_copies) {
                    (_, None) => "not reached".to_string(),
                    (true, Some(_)) => "infinite".to_string(),
                    (false, Some(c)) => format!("{c:.0}"),
                };
                println!("{:<16} {:?} ≤ {:<8} {}/{}  {copies}", r.backend, r.metric, r.objective, r.reached, r.instances);
            }
            println!("wrote {}", path.display());
            report(&out)
        }
        Command::Bench {
            n,
            depth,
            shadows,
            repeats,
            seed,
            output: path,
        } => {
            let rows = bench::bench_eval_time(&n, depth, shadows, repeats, seed)?;
            output::write_bench(&path, &rows)?;
            for r in &rows {
                println!("n = {:>3}  d = {}  {:.6} s", r.n, r.d, r.seconds);
            }
            if let Some(b) = bench::power_law_exponent(&rows) {
                println!("power-law exponent {b:.2}");
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Shadows { command } => match command {
            ShadowsCommand::Sample {
                source,
                index,
                shadows,
                out,
                json,
            } => {
                let cfg = source.load()?;
                let t = match format!("shadow:{shadows}").parse::<BackendSpec>() {
                    Ok(BackendSpec::Shadow(t)) => t,
                    Ok(_) => unreachable!("shadow prefix"),
                    Err(e) => return Err(CliError::Config(format!("--shadows: {e}"))),
                };
                let set = bench::shadows_sample(&cfg, index, t, &out, json.as_deref())?;
                println!("wrote {} ({} records of {} qubits)", out.display(), set.len(), set.n());
                Ok(())
            }
            ShadowsCommand::Inspect { file, records, json } => {
                let set = bench::shadows_load(&file)?;
                print!("{}", bench::describe(&set, records));
                if let Some(j) = json {
                    output::write_json(&j, &also::shadow::ShadowSetJson::from(&set))?;
                }
                Ok(())
            }
        },
        Command::Presets { name } => {
            match name {
                Some(n) => print!(
                    "{}",
                    presets::source(&n).ok_or_else(|| CliError::Config(format!("unknown preset {n:?}")))?
                ),
                None => {
                    for n in presets::NAMES {
                        println!("{n}");
                    }
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
