//! The subcommands behind the `pnd` binary. Each returns the report it
//! wrote so that tests can inspect results without re-reading files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Config;
use super::experiment::{
    parse_student, parse_teacher, prepare_seed, resolve_dataset_dir, run_student, student_seed_metrics,
    teacher_seed_metrics, write_student_metrics, ExperimentConfig, LoadedData, RunSettings, KNOWN_KEYS,
    DEFAULT_GAMMA, DEFAULT_ITERATIONS,
};
use super::report::{write_json, write_text, write_timing, InputHasher, RunReport, SeedMetrics, Stat};
use crate::datasets::{
    gen_chains, gen_regular_homophily, load_dataset, make_splits, save_dataset, to_json, ChainsConfig, RegularConfig,
    SplitConfig,
};
use crate::distill::{make_target, train_student, DistillVariant, StudentInputs, VariantKind};
use crate::error::{Error, Result};
use crate::graph::normalized_adjacency;
use crate::nn::train::accuracy;
use crate::rng::RngStream;
use crate::teacher::{train_teacher, write_probs_tsv};
use crate::theory::{theory_sweep, TheoryGrid, TheoryRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    TrainTeacher,
    Distill,
    Sweep,
    ChainsCasestudy,
    EnergyTrace,
    TheoryCheck,
    GenChains,
    GenSynthetic,
    MakeSplits,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::TrainTeacher,
        Command::Distill,
        Command::Sweep,
        Command::ChainsCasestudy,
        Command::EnergyTrace,
        Command::TheoryCheck,
        Command::GenChains,
        Command::GenSynthetic,
        Command::MakeSplits,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::TrainTeacher => "train-teacher",
            Command::Distill => "distill",
            Command::Sweep => "sweep",
            Command::ChainsCasestudy => "chains-casestudy",
            Command::EnergyTrace => "energy-trace",
            Command::TheoryCheck => "theory-check",
            Command::GenChains => "gen-chains",
            Command::GenSynthetic => "gen-synthetic",
            Command::MakeSplits => "make-splits",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::config(format!("unknown command {s:?}")))
    }
}

/// Runs `command` and returns the path of its main output.
pub fn execute(command: Command, cfg: &Config) -> Result<PathBuf> {
    cfg.check_known(KNOWN_KEYS)?;
    let started = Instant::now();
    let (path, timed) = match command {
        Command::TrainTeacher => {
            let exp = ExperimentConfig::from_config(cfg)?;
            (cmd_train_teacher(&exp)?.1, true)
        }
        Command::Distill => {
            let exp = ExperimentConfig::from_config(cfg)?;
            (cmd_distill(&exp)?.1, true)
        }
        Command::Sweep => {
            let exp = ExperimentConfig::from_config(cfg)?;
            let grid = SweepGrid::from_config(cfg)?;
            (cmd_sweep(&exp, &grid)?.path, true)
        }
        Command::EnergyTrace => {
            let exp = ExperimentConfig::from_config(cfg)?;
            let epochs = cfg.or("energy.epochs", 200)?;
            let gamma = cfg.or("energy.gamma", cfg.or("distill.gamma", DEFAULT_GAMMA)?)?;
            (cmd_energy_trace(&exp, epochs, gamma)?.1, true)
        }
        Command::ChainsCasestudy => (cmd_chains_casestudy(cfg)?.1, true),
        Command::TheoryCheck => (cmd_theory_check(cfg)?.1, true),
        Command::GenChains => (cmd_gen_chains(cfg)?, false),
        Command::GenSynthetic => (cmd_gen_synthetic(cfg)?, false),
        Command::MakeSplits => (cmd_make_splits(cfg)?, false),
    };
    if timed {
        if let Some(dir) = path.parent() {
            write_timing(&dir.join("timing.json"), started.elapsed().as_secs_f64())?;
        }
    }
    Ok(path)
}

/// Trains (or retrains) the teacher for every seed and writes checkpoints,
/// `P^t` tables and an accuracy report under `<out>/<dataset>/teacher/`.
pub fn cmd_train_teacher(exp: &ExperimentConfig) -> Result<(RunReport, PathBuf)> {
    let data = LoadedData::load(exp)?;
    let seeds: Vec<SeedMetrics> = exp.run.pool()?.install(|| {
        exp.seeds
            .par_iter()
            .map(|&seed| {
                let sd = prepare_seed(exp, &data, seed, true)?;
                let m = sd
                    .teacher_metrics
                    .as_ref()
                    .ok_or_else(|| Error::Numeric("teacher was not trained".into()))?;
                Ok(teacher_seed_metrics(seed, m))
            })
            .collect::<Result<_>>()
    })?;
    let mut echo = exp.echo();
    strip_student_keys(&mut echo);
    let report = RunReport::new(
        "train-teacher",
        &data.dataset.name,
        exp.mode.name(),
        "teacher",
        exp.input_hash(&data)?,
        echo,
        seeds,
    );
    let path = data.dir(exp).join("teacher").join("report.json");
    report.write(&path)?;
    Ok((report, path))
}

fn strip_student_keys(echo: &mut serde_json::Value) {
    if let Some(m) = echo.as_object_mut() {
        for k in ["variant", "variant_label", "student", "search"] {
            m.remove(k);
        }
    }
}

/// Distills one student per seed with the configured variant.
pub fn cmd_distill(exp: &ExperimentConfig) -> Result<(RunReport, PathBuf)> {
    let data = LoadedData::load(exp)?;
    let base = data.dir(exp).join(&exp.variant_label);
    let seeds: Vec<SeedMetrics> = exp.run.pool()?.install(|| {
        exp.seeds
            .par_iter()
            .map(|&seed| {
                let sd = prepare_seed(exp, &data, seed, false)?;
                let st = run_student(exp, &data, &sd, &exp.variant, &exp.student)?;
                write_student_metrics(&base.join(seed.to_string()), seed, &st)?;
                log::info!(
                    "{} {} seed {seed}: val {:.4}",
                    data.segment,
                    exp.variant_label,
                    st.metrics.val_acc
                );
                Ok(student_seed_metrics(seed, &st))
            })
            .collect::<Result<_>>()
    })?;
    let report = RunReport::new(
        "distill",
        &data.dataset.name,
        exp.mode.name(),
        &exp.variant_label,
        exp.input_hash(&data)?,
        exp.echo(),
        seeds,
    );
    let path = base.join("report.json");
    report.write(&path)?;
    Ok((report, path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub gamma: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl SweepGrid {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let gamma = cfg
            .list::<f64>("sweep.gamma")?
            .unwrap_or_else(|| vec![cfg.or("distill.gamma", DEFAULT_GAMMA).unwrap_or(DEFAULT_GAMMA)]);
        let iterations = cfg
            .list::<usize>("sweep.iterations")?
            .unwrap_or_else(|| vec![cfg.or("distill.iterations", DEFAULT_ITERATIONS).unwrap_or(DEFAULT_ITERATIONS)]);
        if gamma.is_empty() || iterations.is_empty() {
            return Err(Error::config("sweep grids must be non-empty"));
        }
        Ok(Self { gamma, iterations })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub gamma: f64,
    pub iterations: usize,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub cells: Vec<SweepCell>,
    /// The pivot table (rows T, columns γ).
    pub path: PathBuf,
}

impl SweepOutcome {
    pub fn cell(&self, gamma: f64, iterations: usize) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.gamma == gamma && c.iterations == iterations)
    }
}

/// Cross product of γ and T for one propagating variant. Teachers are
/// prepared once per seed and shared by every cell.
pub fn cmd_sweep(exp: &ExperimentConfig, grid: &SweepGrid) -> Result<SweepOutcome> {
    if exp.variant.kind == VariantKind::Glnn {
        return Err(Error::config("sweep needs a variant that uses gamma"));
    }
    let data = LoadedData::load(exp)?;
    let base = data.dir(exp).join(&exp.variant_label);
    let pool = exp.run.pool()?;
    let prepared = pool.install(|| {
        exp.seeds
            .par_iter()
            .map(|&seed| prepare_seed(exp, &data, seed, false))
            .collect::<Result<Vec<_>>>()
    })?;
    let coords: Vec<(usize, f64)> = grid
        .iterations
        .iter()
        .flat_map(|&t| grid.gamma.iter().map(move |&g| (t, g)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..coords.len())
        .flat_map(|c| (0..prepared.len()).map(move |s| (c, s)))
        .collect();
    let results: Vec<SeedMetrics> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, s)| {
                let (t, g) = coords[c];
                let sd = &prepared[s];
                let variant = DistillVariant {
                    gamma: Some(g),
                    iterations: Some(t),
                    ..exp.variant
                };
                let st = run_student(exp, &data, sd, &variant, &exp.student)?;
                write_student_metrics(&cell_dir(&base, g, t).join(sd.seed.to_string()), sd.seed, &st)?;
                Ok(student_seed_metrics(sd.seed, &st))
            })
            .collect::<Result<_>>()
    })?;
    let hash = exp.input_hash(&data)?;
    let mut cells = Vec::with_capacity(coords.len());
    for (c, &(t, g)) in coords.iter().enumerate() {
        let seeds = results[c * prepared.len()..(c + 1) * prepared.len()].to_vec();
        let mut echo = exp.echo();
        if let Some(v) = echo.get_mut("variant").and_then(|v| v.as_object_mut()) {
            v.insert("gamma".into(), g.into());
            v.insert("iterations".into(), t.into());
        }
        let report = RunReport::new("sweep", &data.dataset.name, exp.mode.name(), &exp.variant_label, hash.clone(), echo, seeds);
        report.write(&cell_dir(&base, g, t).join("report.json"))?;
        cells.push(SweepCell {
            gamma: g,
            iterations: t,
            report,
        });
    }

    let mut pivot = String::from("T");
    for g in &grid.gamma {
        let _ = write!(pivot, "\tgamma={g}");
    }
    pivot.push('\n');
    let mut long = String::from("gamma\tT\tmean\tstd\tn\n");
    for &t in &grid.iterations {
        let _ = write!(pivot, "{t}");
        for &g in &grid.gamma {
            let stat = cells
                .iter()
                .find(|c| c.gamma == g && c.iterations == t)
                .and_then(|c| c.report.primary());
            match stat {
                Some(s) => {
                    let _ = write!(pivot, "\t{}", s.mean);
                    let _ = writeln!(long, "{g}\t{t}\t{}\t{}\t{}", s.mean, s.std, s.n);
                }
                None => pivot.push_str("\tNA"),
            }
        }
        pivot.push('\n');
    }
    let path = base.join("sweep.tsv");
    write_text(&path, &pivot)?;
    write_text(&base.join("sweep_long.tsv"), &long)?;
    Ok(SweepOutcome { cells, path })
}

fn cell_dir(base: &std::path::Path, gamma: f64, t: usize) -> PathBuf {
    base.join(format!("gamma={gamma}")).join(format!("T={t}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySeed {
    pub seed: u64,
    pub glnn_initial: f64,
    pub invkd_initial: f64,
    pub glnn_final: f64,
    pub invkd_final: f64,
    /// Final InvKD energy strictly below final GLNN energy.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub dataset: String,
    pub mode: String,
    pub input_hash: String,
    pub config: serde_json::Value,
    pub epochs: usize,
    pub gamma: f64,
    pub seeds: Vec<EnergySeed>,
    pub passes: usize,
}

/// Per-epoch Dirichlet energy of GLNN and InvKD students trained from the
/// same initialization for a fixed number of epochs.
pub fn cmd_energy_trace(exp: &ExperimentConfig, epochs: usize, gamma: f64) -> Result<(EnergyReport, PathBuf)> {
    if epochs == 0 {
        return Err(Error::config("energy.epochs must be at least 1"));
    }
    let data = LoadedData::load(exp)?;
    let base = data.dir(exp).join("energy");
    let student = crate::distill::StudentConfig {
        max_epochs: epochs,
        early_stopping: false,
        ..exp.student.clone()
    };
    let glnn = DistillVariant {
        alpha: exp.variant.alpha,
        ..DistillVariant::glnn()
    };
    let invkd = DistillVariant::new(VariantKind::InvKd, Some(gamma), None, exp.variant.alpha)?;
    let seeds: Vec<EnergySeed> = exp.run.pool()?.install(|| {
        exp.seeds
            .par_iter()
            .map(|&seed| {
                let sd = prepare_seed(exp, &data, seed, false)?;
                let a = run_student(exp, &data, &sd, &glnn, &student)?;
                let b = run_student(exp, &data, &sd, &invkd, &student)?;
                let mut tsv = String::from("epoch\tglnn\tinvkd\n");
                for (ea, eb) in a.metrics.epochs.iter().zip(&b.metrics.epochs) {
                    let _ = writeln!(tsv, "{}\t{}\t{}", ea.epoch, ea.energy, eb.energy);
                }
                write_text(&base.join(seed.to_string()).join("energy.tsv"), &tsv)?;
                let first = |m: &crate::distill::TrainedStudent| m.metrics.epochs.first().map_or(0.0, |e| e.energy);
                let last = |m: &crate::distill::TrainedStudent| m.metrics.epochs.last().map_or(0.0, |e| e.energy);
                Ok(EnergySeed {
                    seed,
                    glnn_initial: first(&a),
                    invkd_initial: first(&b),
                    glnn_final: last(&a),
                    invkd_final: last(&b),
                    pass: last(&b) < last(&a),
                })
            })
            .collect::<Result<_>>()
    })?;
    let report = EnergyReport {
        dataset: data.dataset.name.clone(),
        mode: exp.mode.name().into(),
        input_hash: exp.input_hash(&data)?,
        config: exp.echo(),
        epochs,
        gamma,
        passes: seeds.iter().filter(|s| s.pass).count(),
        seeds,
    };
    let path = base.join("report.json");
    write_json(&path, &report)?;
    Ok((report, path))
}

/// Chains settings used by both `gen-chains` and the case study. Noise is
/// on by default here so that an MLP can tell far nodes apart.
pub fn chains_config(cfg: &Config) -> Result<ChainsConfig> {
    Ok(ChainsConfig {
        num_chains: cfg.or("chains.num_chains", 30)?,
        length: cfg.or("chains.length", 8)?,
        num_classes: cfg.or("chains.classes", 2)?,
        noise: cfg.or("chains.noise", 0.1)?,
        noise_dim: cfg.or("chains.noise_dim", 16)?,
    })
}

pub const CHAINS_TARGETS: [&str; 4] = ["pt", "ppr", "pnd", "pnd_fix"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainsSeed {
    pub seed: u64,
    pub teacher_far_acc: f64,
    /// Far-node accuracy of the argmax of each target matrix.
    pub target_far_acc: BTreeMap<String, f64>,
    /// Far-node accuracy of the student distilled from each target.
    pub student_far_acc: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainsReport {
    pub input_hash: String,
    pub config: serde_json::Value,
    pub seeds: Vec<ChainsSeed>,
    pub teacher_far_acc: Stat,
    pub student_far_acc: BTreeMap<String, Stat>,
    /// Mean far-node gain of the pinned-propagation student over raw `P^t`.
    pub fix_minus_raw: f64,
}

/// Teacher and four students on the Chains graphs; far nodes are those more
/// than two hops from their chain's base.
pub fn cmd_chains_casestudy(cfg: &Config) -> Result<(ChainsReport, PathBuf)> {
    let run = RunSettings::from_config(cfg)?;
    let chains = chains_config(cfg)?;
    let teacher = parse_teacher(cfg)?;
    // The student has to memorize per-node targets here, so regularization
    // is off unless asked for.
    let mut scfg = cfg.clone();
    for key in ["student.dropout", "student.weight_decay"] {
        if !scfg.contains(key) {
            scfg.set(key, "0");
        }
    }
    let student = parse_student(&scfg)?;
    let gamma = cfg.or("chains.gamma", DEFAULT_GAMMA)?;
    let iterations = cfg.or("chains.iterations", DEFAULT_ITERATIONS)?;
    let data_seed: Option<u64> = cfg.parsed("chains.data_seed")?;
    let alpha = cfg.or("distill.alpha", 0.0)?;
    let variants = [
        DistillVariant { alpha, ..DistillVariant::glnn() },
        DistillVariant::new(VariantKind::Ppr, Some(gamma), None, alpha)?,
        DistillVariant::new(VariantKind::Pnd, Some(gamma), Some(iterations), alpha)?,
        DistillVariant::new(VariantKind::PndFix, Some(gamma), Some(iterations), alpha)?,
    ];
    let echo = serde_json::json!({
        "chains": chains,
        "teacher": teacher,
        "student": student,
        "gamma": gamma,
        "iterations": iterations,
        "alpha": alpha,
        "data_seed": data_seed,
        "seeds": run.seeds,
    });
    let base = run.out.join("chains");
    let seeds: Vec<ChainsSeed> = run.pool()?.install(|| {
        run.seeds
            .par_iter()
            .map(|&seed| {
                let data = gen_chains(&chains, data_seed.unwrap_or(seed))?;
                let ds = &data.dataset;
                let split = &data.split;
                let far = &data.far_nodes;
                let mut rng = RngStream::new(seed);
                let t = train_teacher(&ds.graph, &ds.features, &ds.labels, ds.num_classes, split, &teacher, &mut rng)?;
                let adjacency = normalized_adjacency(&ds.graph);
                let dir = base.join(seed.to_string());
                let targets = dir.join("targets");
                std::fs::create_dir_all(&targets).map_err(|e| Error::io(&targets, e))?;
                let mut target_far_acc = BTreeMap::new();
                let mut student_far_acc = BTreeMap::new();
                for (name, variant) in CHAINS_TARGETS.iter().zip(&variants) {
                    let target = make_target(variant, &t.probs, &adjacency, &split.train)?;
                    write_probs_tsv(&target, targets.join(format!("{name}.tsv")))?;
                    target_far_acc.insert(name.to_string(), accuracy(target.matrix(), &ds.labels, far)?);
                    let inputs = StudentInputs {
                        features: &ds.features,
                        labels: &ds.labels,
                        num_classes: ds.num_classes,
                        target: &target,
                        adjacency: &adjacency,
                        split,
                    };
                    let st = train_student(&inputs, &student, variant, &RngStream::new(seed))?;
                    write_student_metrics(&dir.join(name), seed, &st)?;
                    student_far_acc.insert(name.to_string(), st.metrics.test_obs_acc.unwrap_or(0.0));
                }
                Ok(ChainsSeed {
                    seed,
                    teacher_far_acc: accuracy(t.probs.matrix(), &ds.labels, far)?,
                    target_far_acc,
                    student_far_acc,
                })
            })
            .collect::<Result<_>>()
    })?;
    let stat = |f: &dyn Fn(&ChainsSeed) -> f64| {
        Stat::of(&seeds.iter().map(f).collect::<Vec<_>>()).expect("seeds are non-empty")
    };
    let mut student_far_acc = BTreeMap::new();
    for name in CHAINS_TARGETS {
        student_far_acc.insert(name.to_string(), stat(&|s: &ChainsSeed| s.student_far_acc[name]));
    }
    let fix_minus_raw = student_far_acc["pnd_fix"].mean - student_far_acc["pt"].mean;
    let mut hasher = InputHasher::default();
    hasher.add("config", to_json(&echo)?.as_bytes());
    let report = ChainsReport {
        input_hash: hasher.finish(),
        config: echo,
        teacher_far_acc: stat(&|s: &ChainsSeed| s.teacher_far_acc),
        student_far_acc,
        fix_minus_raw,
        seeds,
    };
    let path = base.join("report.json");
    write_json(&path, &report)?;
    Ok((report, path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub input_hash: String,
    pub grid: TheoryGrid,
    pub seed: u64,
    pub tuples: usize,
    /// Tuples whose exact gap |β − β'| exceeds the decision margin.
    pub decisive: usize,
    pub decisive_agree: usize,
    /// Largest |q_min − q*| over tuples with at least five classes.
    pub max_threshold_gap: f64,
}

pub const THEORY_MARGIN: f64 = 1e-3;

pub fn theory_grid(cfg: &Config) -> Result<TheoryGrid> {
    let d = TheoryGrid::default();
    let epsilon = match cfg.get("theory.epsilon") {
        None => d.epsilon,
        Some(v) => v
            .split(',')
            .map(|t| {
                let t = t.trim();
                let (a, b) = t.split_once('/').unwrap_or((t, "1"));
                match (a.trim().parse::<usize>(), b.trim().parse::<usize>()) {
                    (Ok(a), Ok(b)) => Ok((a, b)),
                    _ => Err(Error::config(format!("theory.epsilon entries must look like a/b, got {t:?}"))),
                }
            })
            .collect::<Result<_>>()?,
    };
    Ok(TheoryGrid {
        classes: cfg.list("theory.classes")?.unwrap_or(d.classes),
        same_units: cfg.list("theory.same_units")?.unwrap_or(d.same_units),
        p: cfg.list("theory.p")?.unwrap_or(d.p),
        gamma: cfg.list("theory.gamma")?.unwrap_or(d.gamma),
        epsilon,
        probe_offset: cfg.or("theory.probe_offset", d.probe_offset)?,
    })
}

/// Exact threshold versus one-step propagation on regular graphs; writes
/// every probe to `theory.tsv`.
pub fn cmd_theory_check(cfg: &Config) -> Result<(TheoryReport, PathBuf)> {
    let run = RunSettings::from_config(cfg)?;
    let grid = theory_grid(cfg)?;
    let seed = run.seeds[0];
    let rows: Vec<TheoryRow> = run.pool()?.install(|| theory_sweep(&grid, seed))?;
    let mut tsv = String::from(
        "h\tp\tnum_classes\tgamma\tepsilon\tq_min_approx\tq_star_exact\tq_star_empirical\tagree\tq\tdegree\tmargin\n",
    );
    for r in &rows {
        let _ = writeln!(
            tsv,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.h,
            r.p,
            r.num_classes,
            r.gamma,
            r.epsilon,
            r.q_min_approx,
            r.q_star_exact,
            r.q_star_empirical,
            r.agree,
            r.q,
            r.degree,
            r.margin
        );
    }
    let base = run.out.join("theory");
    write_text(&base.join("theory.tsv"), &tsv)?;
    let decisive: Vec<&TheoryRow> = rows.iter().filter(|r| r.margin > THEORY_MARGIN).collect();
    let max_threshold_gap = rows
        .iter()
        .filter(|r| r.num_classes >= 5)
        .map(|r| (r.q_min_approx - r.q_star_exact).abs())
        .fold(0.0, f64::max);
    let mut hasher = InputHasher::default();
    hasher.add("grid", to_json(&grid)?.as_bytes());
    hasher.add("seed", &seed.to_le_bytes());
    let report = TheoryReport {
        input_hash: hasher.finish(),
        seed,
        tuples: rows.len(),
        decisive: decisive.len(),
        decisive_agree: decisive.iter().filter(|r| r.agree).count(),
        max_threshold_gap,
        grid,
    };
    let path = base.join("report.json");
    write_json(&path, &report)?;
    Ok((report, path))
}

/// Output directory for generators: `--out` when given, else `data/<name>`.
fn generator_out(cfg: &Config, name: &str) -> PathBuf {
    cfg.path("run.out").unwrap_or_else(|| PathBuf::from("data").join(name))
}

pub fn cmd_gen_chains(cfg: &Config) -> Result<PathBuf> {
    let run = RunSettings::from_config(cfg)?;
    let chains = chains_config(cfg)?;
    let seed = cfg.parsed("chains.data_seed")?.unwrap_or(run.seeds[0]);
    let data = gen_chains(&chains, seed)?;
    let dir = generator_out(cfg, "chains");
    save_dataset(&data.dataset, &dir, Some(&data.split))?;
    Ok(dir)
}

pub fn cmd_gen_synthetic(cfg: &Config) -> Result<PathBuf> {
    let run = RunSettings::from_config(cfg)?;
    let rc = RegularConfig {
        degree: cfg.or("synthetic.degree", 10)?,
        homophily: cfg.or("synthetic.homophily", 0.8)?,
        num_classes: cfg.or("synthetic.classes", 5)?,
        nodes_per_class: cfg.or("synthetic.nodes_per_class", 50)?,
        feature_noise: cfg.or("synthetic.feature_noise", 1.0)?,
    };
    let ds = gen_regular_homophily(&rc, run.seeds[0])?;
    let dir = generator_out(cfg, "regular");
    save_dataset(&ds, &dir, None)?;
    Ok(dir)
}

/// Writes `splits.json` for a dataset, by default into the dataset itself so
/// that later runs use the fixed split.
pub fn cmd_make_splits(cfg: &Config) -> Result<PathBuf> {
    let run = RunSettings::from_config(cfg)?;
    let raw = cfg
        .path("dataset.path")
        .ok_or_else(|| Error::config("dataset.path is required"))?;
    let dir = resolve_dataset_dir(&raw)?;
    let ds = load_dataset(&dir)?;
    let d = SplitConfig::default();
    let sc = SplitConfig {
        per_class_train: cfg.or("dataset.per_class_train", d.per_class_train)?,
        per_class_val: cfg.or("dataset.per_class_val", d.per_class_val)?,
        inductive: cfg.get("dataset.mode") == Some("inductive"),
        inductive_frac: cfg.or("dataset.inductive_frac", d.inductive_frac)?,
        allow_fallback: true,
    };
    let seed = cfg.parsed("dataset.split_seed")?.unwrap_or(run.seeds[0]);
    let split = make_splits(&ds.labels, ds.num_classes, seed, &sc)?;
    let path = cfg.path("run.out").unwrap_or(dir).join("splits.json");
    write_text(&path, &to_json(&split)?)?;
    Ok(path)
}
