use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swarmupdate::config::{ConfigError, ExperimentConfig, Overrides};
use swarmupdate::{files, report, results, sweep};
use swarmupdate_core::model::{
    apply_patch, generate_patch, simulate_update, synthetic_squeezenet_profile, PatchKind, DEFAULT_PACKET_SIZE,
};
use swarmupdate_core::{RunOutcome, Scenario};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "swarmupdate", version, about = "Simulate model updates across a UAV swarm")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its metrics as CSV.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Repetition index; the run uses seed + rep.
        #[arg(long, default_value_t = 0)]
        rep: u32,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a grid of scenarios and write per-run and mean CSVs.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long, default_value = "results.csv")]
        output: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Summarize a results CSV into tables and charts.
    Report {
        results: PathBuf,
        #[arg(short, long, default_value = "report")]
        output: PathBuf,
    },
    /// Create, apply and inspect model patches.
    #[command(subcommand)]
    Patch(PatchCommand),
    /// Write the synthetic SqueezeNet-sized model and an updated version.
    Model {
        #[arg(short, long)]
        output: PathBuf,
        /// Also write an update with this many leading modules frozen.
        #[arg(long, requires = "updated")]
        frozen: Option<usize>,
        #[arg(long)]
        updated: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum PatchCommand {
    Gen {
        old: PathBuf,
        new: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    Apply {
        base: PathBuf,
        patch: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    Info {
        patch: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PACKET_SIZE)]
        packet_size: u64,
    },
}

enum Failure {
    Config(String),
    NotConverged(String),
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn other(e: impl std::fmt::Display) -> Failure {
    Failure::Other(e.to_string())
}

fn load_config(path: Option<&Path>, overrides: Overrides) -> Result<ExperimentConfig, Failure> {
    let mut config = ExperimentConfig::load_or_default(path)?;
    config.apply(overrides);
    Ok(config)
}

fn run(config: Option<PathBuf>, rep: u32, overrides: Overrides) -> Result<(), Failure> {
    let cell = load_config(config.as_deref(), overrides)?.single()?;
    let mut scenario = Scenario::new(&cell, rep).map_err(other)?;
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| scenario.run()));
    let outcome = match outcome {
        Ok(result) => result.map_err(other)?,
        Err(_) => {
            let place = scenario
                .running()
                .map_or_else(String::new, |(step, agent)| format!(" at step {step} in agent {agent}"));
            return Err(Failure::Other(format!("simulation panicked{place}")));
        }
    };
    let record = scenario.record();
    results::write_rows(io::stdout().lock(), std::slice::from_ref(&record)).map_err(other)?;
    match outcome {
        RunOutcome::Converged => Ok(()),
        outcome => Err(Failure::NotConverged(format!(
            "no convergence ({outcome:?}) after {} steps",
            record.convergence_steps
        ))),
    }
}

fn write_csv(path: &Path, write: impl FnOnce(BufWriter<File>) -> csv::Result<()>) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| other(format!("{}: {e}", path.display())))?;
    write(BufWriter::new(file)).map_err(other)
}

fn sweep(config: Option<PathBuf>, output: PathBuf, overrides: Overrides) -> Result<(), Failure> {
    let cells = load_config(config.as_deref(), overrides)?.cells()?;
    let rows = sweep::run_sweep(&cells, |done| {
        let c = done.config;
        eprintln!(
            "[{}/{}] {} size {} f {} packets {}: {}/{} converged",
            done.index + 1,
            done.cells,
            c.strategy,
            c.swarm_size,
            c.failure_rate,
            c.patch_packets,
            done.converged,
            c.repetitions
        );
    })
    .map_err(other)?;
    write_csv(&output, |w| results::write_rows(w, &rows))?;
    let means_path = results::mean_path(&output);
    write_csv(&means_path, |w| results::write_means(w, &results::cell_means(&rows)))?;
    let failed = rows.iter().filter(|r| !r.converged).count();
    eprintln!(
        "wrote {} rows to {} and means to {}",
        rows.len(),
        output.display(),
        means_path.display()
    );
    if failed > 0 {
        eprintln!("warning: {failed} runs did not converge");
    }
    Ok(())
}

fn report(results_path: PathBuf, output: PathBuf) -> Result<(), Failure> {
    let file = File::open(&results_path).map_err(|e| other(format!("{}: {e}", results_path.display())))?;
    let rows = results::read_rows(file).map_err(|e| Failure::Config(format!("{}: {e}", results_path.display())))?;
    let means = results::cell_means(&rows);
    let built = report::build_report(&means);
    report::write_report(&output, &built).map_err(other)?;
    let mut out = io::stdout().lock();
    let _ = write!(out, "{}\n{}", built.summary, report::checks_table(&built.checks));
    Ok(())
}

fn patch(command: PatchCommand) -> Result<(), Failure> {
    match command {
        PatchCommand::Gen { old, new, output } => {
            let old = files::load_model(&old).map_err(other)?;
            let new = files::load_model(&new).map_err(other)?;
            let patch = generate_patch(&old, &new).map_err(other)?;
            let bytes = files::save_patch(&output, &patch).map_err(other)?;
            println!("{} entries, {bytes} bytes", patch.entries.len());
        }
        PatchCommand::Apply { base, patch, output } => {
            let base = files::load_model(&base).map_err(other)?;
            let patch = files::load_patch(&patch).map_err(other)?;
            let model = apply_patch(&base, &patch).map_err(other)?;
            files::save_model(&output, &model).map_err(other)?;
            println!("{}", model.digest());
        }
        PatchCommand::Info { patch, packet_size } => {
            if packet_size == 0 {
                return Err(Failure::Config("--packet-size must be positive".into()));
            }
            let patch = files::load_patch(&patch).map_err(other)?;
            println!("base    {}", patch.base_model_hash);
            println!("target  {}", patch.target_model_hash);
            println!("payload {} bytes", patch.payload_bytes());
            println!("packets {} of {packet_size} bytes", patch.packet_count(packet_size));
            println!("{:<5} {:<40} {:<16} {:>12}", "kind", "name", "shape", "bytes");
            for e in &patch.entries {
                let kind = match e.kind {
                    PatchKind::Delta => "delta",
                    PatchKind::Full => "full",
                };
                println!(
                    "{kind:<5} {:<40} {:<16} {:>12}",
                    e.name,
                    format!("{:?}", e.shape),
                    e.data.len() * 4
                );
            }
        }
    }
    Ok(())
}

fn model(output: PathBuf, frozen: Option<usize>, updated: Option<PathBuf>, seed: u64) -> Result<(), Failure> {
    let (base, spec) = synthetic_squeezenet_profile();
    let bytes = files::save_model(&output, &base).map_err(other)?;
    println!("{}: {bytes} bytes", output.display());
    if let (Some(frozen), Some(updated)) = (frozen, updated) {
        let new = simulate_update(&base, &spec.with_frozen(frozen), seed).map_err(|e| Failure::Config(e.to_string()))?;
        let bytes = files::save_model(&updated, &new).map_err(other)?;
        println!("{}: {bytes} bytes", updated.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, rep, overrides } => run(config, rep, overrides),
        Command::Sweep {
            config,
            output,
            overrides,
        } => sweep(config, output, overrides),
        Command::Report { results, output } => report(results, output),
        Command::Patch(command) => patch(command),
        Command::Model {
            output,
            frozen,
            updated,
            seed,
        } => model(output, frozen, updated, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
