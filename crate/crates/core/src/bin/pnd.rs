use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pnd_core::harness::{execute, Command, Config};

/// Graph-to-MLP distillation experiments.
///
/// Any config key can be overridden with `--section.key=value`, e.g.
/// `pnd distill --config cora.conf --distill.variant=pnd_fix`.
#[derive(Parser)]
#[command(name = "pnd", version)]
struct Cli {
    /// Config file of `key = value` lines with `[section]` headers.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (`run.out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run a single seed instead of `run.seeds`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (`run.threads`).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Train the GraphSAGE teacher and write checkpoints plus P^t tables.
    TrainTeacher,
    /// Distill students with one variant over all seeds.
    Distill,
    /// Distill over the cross product of sweep.gamma and sweep.iterations.
    Sweep,
    /// Far-node accuracy of students on the Chains graphs.
    ChainsCasestudy,
    /// Per-epoch Dirichlet energy of GLNN and InvKD students.
    EnergyTrace,
    /// Check the correction threshold against one-step propagation.
    TheoryCheck,
    /// Write a Chains dataset directory.
    GenChains,
    /// Write a regular graph with controlled homophily.
    GenSynthetic,
    /// Write splits.json for a dataset.
    MakeSplits,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::TrainTeacher => Command::TrainTeacher,
            Cmd::Distill => Command::Distill,
            Cmd::Sweep => Command::Sweep,
            Cmd::ChainsCasestudy => Command::ChainsCasestudy,
            Cmd::EnergyTrace => Command::EnergyTrace,
            Cmd::TheoryCheck => Command::TheoryCheck,
            Cmd::GenChains => Command::GenChains,
            Cmd::GenSynthetic => Command::GenSynthetic,
            Cmd::MakeSplits => Command::MakeSplits,
        }
    }
}

/// Pulls `--section.key=value` overrides out of argv; clap sees the rest.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        match a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            Some((k, v)) if k.contains('.') => overrides.push((k.to_string(), v.to_string())),
            _ => rest.push(a),
        }
    }
    (rest, overrides)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = Cli::parse_from(args);

    let mut cfg = match &cli.config {
        Some(p) => match Config::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        },
        None => Config::default(),
    };
    for (k, v) in overrides {
        cfg.set(k, v);
    }
    if let Some(o) = &cli.out {
        cfg.set("run.out", o.display().to_string());
    }
    if let Some(s) = cli.seed {
        cfg.set("run.seeds", s.to_string());
    }
    if let Some(t) = cli.threads {
        cfg.set("run.threads", t.to_string());
    }

    match execute(cli.command.into(), &cfg) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
