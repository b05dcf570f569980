use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acmo::harness::{registries, run_sweep, summary_json, write_outputs, write_sweep_outputs};
use acmo::{run_experiment, BoundReport, ExperimentConfig, HarnessError, Mode, OptimizerSpec};
use anyhow::Context;
use clap::{Parser, Subcommand};

const EXIT_VIOLATED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

const THEORY_SUITE: &[&str] = &[
    "lemma_a1",
    "corollary_a1",
    "lemma_a3",
    "constructed_sequence",
    "theorem_bound",
    "auxiliary_optimality",
];
const PRACTICAL_SUITE: &[&str] = &["lemma_a1", "auxiliary_optimality"];

/// Seeded optimizer experiments with invariant checks.
#[derive(Parser)]
#[command(name = "acmo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trials, write CSV/JSON when `output.dir` is set, print the summary.
    Run { config: PathBuf },
    /// Run the diagnostics only and print the bound reports.
    Verify { config: PathBuf },
    /// Run every (optimizer, alpha0) point of the `sweep` section.
    Sweep { config: PathBuf },
    /// Print registered problem, optimizer and check names.
    List,
}

fn load(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_json(&text)?.with_env_seed()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<HarnessError>() {
        Some(HarnessError::Diverged { .. }) => EXIT_DIVERGED,
        Some(HarnessError::Optim(acmo::optim::OptimError::Diverged { .. })) => EXIT_DIVERGED,
        _ => EXIT_CONFIG,
    }
}

fn print_reports(reports: &[BoundReport]) {
    for r in reports {
        let status = if r.violated { "VIOLATED" } else { "ok" };
        println!(
            "{:<24} {:<8} worst_slack={:.6e} steps={}",
            r.name, status, r.worst_slack, r.n_steps
        );
    }
}

fn verdict(violated: bool) -> u8 {
    if violated {
        EXIT_VIOLATED
    } else {
        0
    }
}

fn run(path: &Path) -> anyhow::Result<u8> {
    let cfg = load(path)?;
    let result = run_experiment(&cfg)?;
    if let Some(dir) = &cfg.output.dir {
        let files = write_outputs(&result, dir)?;
        eprintln!("wrote {} files to {}", files.len(), dir.display());
    }
    println!("{}", serde_json::to_string_pretty(&summary_json(&result))?);
    Ok(verdict(result.any_violated()))
}

fn verify(path: &Path) -> anyhow::Result<u8> {
    let mut cfg = load(path)?;
    if cfg.checks.is_empty() {
        if cfg.optimizer != OptimizerSpec::Acmo {
            return Err(HarnessError::Config("verify without `checks` needs optimizer acmo".into()).into());
        }
        let suite = match cfg.schedule.mode {
            Mode::Theory => THEORY_SUITE,
            Mode::Practical => PRACTICAL_SUITE,
        };
        cfg.checks = suite.iter().map(|s| s.to_string()).collect();
    }
    let result = run_experiment(&cfg)?;
    let reports = result.merged_reports();
    print_reports(&reports);
    Ok(verdict(result.any_violated()))
}

fn sweep(path: &Path) -> anyhow::Result<u8> {
    let cfg = load(path)?;
    if cfg.sweep.is_none() {
        return Err(HarnessError::Config("config has no `sweep` section".into()).into());
    }
    let points = run_sweep(&cfg)?;
    let mut violated = false;
    for p in &points {
        let (mean, std) = p.result.final_loss_stats();
        println!("{:<32} final_loss={mean:.10e} std={std:.3e}", p.label);
        violated |= p.result.any_violated();
    }
    if let Some(dir) = &cfg.output.dir {
        let files = write_sweep_outputs(&points, &cfg.hash(), dir)
            .with_context(|| format!("writing sweep outputs to {}", dir.display()))?;
        eprintln!("wrote {} files to {}", files.len(), dir.display());
    }
    Ok(verdict(violated))
}

fn list() -> u8 {
    for (group, names) in registries() {
        println!("{group}:");
        for n in names {
            println!("  {n}");
        }
    }
    0
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config } => run(config),
        Command::Verify { config } => verify(config),
        Command::Sweep { config } => sweep(config),
        Command::List => Ok(list()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
