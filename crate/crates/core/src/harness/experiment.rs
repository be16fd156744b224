//! Resolved experiment settings and the per-seed pipeline shared by the
//! dataset-driven commands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Config;
use super::report::{hash_dataset_dir, write_jsonl, write_text, InputHasher, SeedMetrics};
use crate::datasets::{load_dataset, load_splits, make_splits, remove_inductive_edges, to_json, Dataset, Split, SplitConfig};
use crate::distill::{grid_search, make_target, train_student, DistillVariant, SearchSpace, StudentConfig, StudentInputs, TrainedStudent, VariantKind};
use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, NormalizedAdjacency, SparseGraph};
use crate::propagation::ProbMatrix;
use crate::rng::RngStream;
use crate::teacher::{describe, read_probs_tsv, save_checkpoint, train_teacher, write_probs_tsv, TeacherConfig, TeacherMetrics};

/// Every key any command reads.
pub const KNOWN_KEYS: &[&str] = &[
    "run.seeds",
    "run.out",
    "run.threads",
    "dataset.path",
    "dataset.mode",
    "dataset.split_seed",
    "dataset.per_class_train",
    "dataset.per_class_val",
    "dataset.inductive_frac",
    "teacher.hidden",
    "teacher.layers",
    "teacher.lr",
    "teacher.weight_decay",
    "teacher.dropout",
    "teacher.max_epochs",
    "teacher.patience",
    "teacher.fan_out",
    "teacher.batch_size",
    "teacher.auto",
    "student.hidden",
    "student.layers",
    "student.lr",
    "student.weight_decay",
    "student.dropout",
    "student.max_epochs",
    "student.patience",
    "student.batch_size",
    "student.early_stopping",
    "student.search",
    "student.search_budget",
    "distill.variant",
    "distill.gamma",
    "distill.iterations",
    "distill.alpha",
    "sweep.gamma",
    "sweep.iterations",
    "energy.epochs",
    "energy.gamma",
    "chains.num_chains",
    "chains.length",
    "chains.classes",
    "chains.noise",
    "chains.noise_dim",
    "chains.gamma",
    "chains.iterations",
    "chains.data_seed",
    "synthetic.degree",
    "synthetic.homophily",
    "synthetic.classes",
    "synthetic.nodes_per_class",
    "synthetic.feature_noise",
    "theory.classes",
    "theory.same_units",
    "theory.p",
    "theory.gamma",
    "theory.epsilon",
    "theory.probe_offset",
];

pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Transductive,
    Inductive,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Transductive => "transductive",
            Mode::Inductive => "inductive",
        }
    }
}

/// Settings shared by every command: output directory, seeds, pool size.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    pub threads: Option<usize>,
}

impl RunSettings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let seeds = cfg.list::<u64>("run.seeds")?.unwrap_or_else(|| (0..10).collect());
        if seeds.is_empty() {
            return Err(Error::config("run.seeds is empty"));
        }
        let threads = cfg.parsed::<usize>("run.threads")?;
        if threads == Some(0) {
            return Err(Error::config("run.threads must be at least 1"));
        }
        Ok(Self {
            out: cfg.path("run.out").unwrap_or_else(|| PathBuf::from("results")),
            seeds,
            threads,
        })
    }

    pub fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| Error::config(format!("cannot build worker pool: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub space: SearchSpace,
    pub budget: Option<usize>,
}

/// A fully resolved dataset-driven experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub mode: Mode,
    /// Directory name of the variant: `mlp` for the undistilled baseline.
    pub variant_label: String,
    pub variant: DistillVariant,
    pub seeds: Vec<u64>,
    pub split: SplitConfig,
    /// Fixed split seed; by default each run seed draws its own split.
    pub split_seed: Option<u64>,
    pub teacher: TeacherConfig,
    /// Train missing teachers on demand instead of failing.
    pub teacher_auto: bool,
    pub student: StudentConfig,
    pub search: Option<SearchSpec>,
    #[serde(skip)]
    pub run: RunSettings,
}

/// `path` as given, else relative to `$PND_DATA_DIR`.
pub fn resolve_dataset_dir(path: &Path) -> Result<PathBuf> {
    if path.is_dir() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(root) = std::env::var_os("PND_DATA_DIR") {
            let alt = Path::new(&root).join(path);
            if alt.is_dir() {
                return Ok(alt);
            }
        }
    }
    Err(Error::io(
        path,
        std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
    ))
}

pub fn parse_variant(cfg: &Config) -> Result<(String, DistillVariant)> {
    let name = cfg.get("distill.variant").unwrap_or("glnn");
    let gamma = cfg.or("distill.gamma", DEFAULT_GAMMA)?;
    let iterations = cfg.or("distill.iterations", DEFAULT_ITERATIONS)?;
    let alpha = cfg.or("distill.alpha", 0.0)?;
    if name.eq_ignore_ascii_case("mlp") {
        return Ok(("mlp".into(), DistillVariant::plain_mlp()));
    }
    let kind: VariantKind = name.parse()?;
    let v = DistillVariant {
        kind,
        gamma: (kind != VariantKind::Glnn).then_some(gamma),
        iterations: matches!(kind, VariantKind::Pnd | VariantKind::PndFix).then_some(iterations),
        alpha,
    };
    v.validate()?;
    Ok((kind.name().into(), v))
}

pub fn parse_teacher(cfg: &Config) -> Result<TeacherConfig> {
    let d = TeacherConfig::default();
    let t = TeacherConfig {
        hidden: cfg.or("teacher.hidden", d.hidden)?,
        num_layers: cfg.or("teacher.layers", d.num_layers)?,
        lr: cfg.or("teacher.lr", d.lr)?,
        weight_decay: cfg.or("teacher.weight_decay", d.weight_decay)?,
        dropout: cfg.or("teacher.dropout", d.dropout)?,
        max_epochs: cfg.or("teacher.max_epochs", d.max_epochs)?,
        patience: cfg.or("teacher.patience", d.patience)?,
        fan_out: match cfg.get("teacher.fan_out") {
            None | Some("full" | "none" | "") => None,
            Some(_) => cfg.list::<usize>("teacher.fan_out")?,
        },
        batch_size: cfg.optional_usize("teacher.batch_size", d.batch_size)?,
    };
    t.validate()?;
    Ok(t)
}

pub fn parse_student(cfg: &Config) -> Result<StudentConfig> {
    let d = StudentConfig::default();
    let s = StudentConfig {
        hidden: cfg.or("student.hidden", d.hidden)?,
        num_layers: cfg.or("student.layers", d.num_layers)?,
        lr: cfg.or("student.lr", d.lr)?,
        weight_decay: cfg.or("student.weight_decay", d.weight_decay)?,
        dropout: cfg.or("student.dropout", d.dropout)?,
        max_epochs: cfg.or("student.max_epochs", d.max_epochs)?,
        patience: cfg.or("student.patience", d.patience)?,
        batch_size: cfg.optional_usize("student.batch_size", d.batch_size)?,
        early_stopping: cfg.bool_or("student.early_stopping", d.early_stopping)?,
    };
    s.validate()?;
    Ok(s)
}

impl ExperimentConfig {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_known(KNOWN_KEYS)?;
        let run = RunSettings::from_config(cfg)?;
        let raw = cfg
            .path("dataset.path")
            .ok_or_else(|| Error::config("dataset.path is required"))?;
        let dataset = resolve_dataset_dir(&raw)?;
        let mode = match cfg.get("dataset.mode").unwrap_or("transductive") {
            "transductive" => Mode::Transductive,
            "inductive" => Mode::Inductive,
            other => return Err(Error::config(format!("unknown mode {other:?}"))),
        };
        let ds = SplitConfig::default();
        let split = SplitConfig {
            per_class_train: cfg.or("dataset.per_class_train", ds.per_class_train)?,
            per_class_val: cfg.or("dataset.per_class_val", ds.per_class_val)?,
            inductive: mode == Mode::Inductive,
            inductive_frac: cfg.or("dataset.inductive_frac", ds.inductive_frac)?,
            allow_fallback: true,
        };
        let (variant_label, variant) = parse_variant(cfg)?;
        let search = if cfg.bool_or("student.search", false)? {
            Some(SearchSpec {
                space: SearchSpace::default(),
                budget: cfg.parsed("student.search_budget")?,
            })
        } else {
            None
        };
        Ok(Self {
            dataset,
            mode,
            variant_label,
            variant,
            seeds: run.seeds.clone(),
            split,
            split_seed: cfg.parsed("dataset.split_seed")?,
            teacher: parse_teacher(cfg)?,
            teacher_auto: cfg.bool_or("teacher.auto", true)?,
            student: parse_student(cfg)?,
            search,
            run,
        })
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }

    /// Hash of the dataset files and the effective configuration.
    pub fn input_hash(&self, data: &LoadedData) -> Result<String> {
        let mut h = InputHasher::default();
        h.add("dataset", data.dataset_hash.as_bytes());
        h.add("config", to_json(&self.echo())?.as_bytes());
        Ok(h.finish())
    }
}

/// A dataset plus what every seed needs to derive its split.
pub struct LoadedData {
    pub dataset: Dataset,
    pub dataset_hash: String,
    pub fixed_split: Option<Split>,
    /// Path segment: dataset name, suffixed for inductive runs.
    pub segment: String,
}

impl LoadedData {
    pub fn load(exp: &ExperimentConfig) -> Result<Self> {
        let dataset = load_dataset(&exp.dataset)?;
        let fixed_split = load_splits(&exp.dataset, dataset.num_nodes())?;
        if let Some(s) = &fixed_split {
            if s.is_inductive() != (exp.mode == Mode::Inductive) {
                return Err(Error::config(format!(
                    "{}/splits.json is {} but the run is {}",
                    exp.dataset.display(),
                    if s.is_inductive() { "inductive" } else { "transductive" },
                    exp.mode.name()
                )));
            }
        }
        let segment = match exp.mode {
            Mode::Transductive => dataset.name.clone(),
            Mode::Inductive => format!("{}-inductive", dataset.name),
        };
        Ok(Self {
            dataset_hash: hash_dataset_dir(&exp.dataset)?,
            dataset,
            fixed_split,
            segment,
        })
    }

    pub fn split_for(&self, exp: &ExperimentConfig, seed: u64) -> Result<Split> {
        match &self.fixed_split {
            Some(s) => Ok(s.clone()),
            None => make_splits(
                &self.dataset.labels,
                self.dataset.num_classes,
                exp.split_seed.unwrap_or(seed),
                &exp.split,
            ),
        }
    }

    pub fn dir(&self, exp: &ExperimentConfig) -> PathBuf {
        exp.run.out.join(&self.segment)
    }
}

/// Everything fixed for one seed before any student is trained.
pub struct SeedData {
    pub seed: u64,
    pub split: Split,
    /// The training-time graph (inductive edges removed where applicable).
    pub graph: SparseGraph,
    pub adjacency: NormalizedAdjacency,
    pub teacher_probs: ProbMatrix,
    /// Present when the teacher was trained in this process.
    pub teacher_metrics: Option<TeacherMetrics>,
}

#[derive(Serialize)]
struct TeacherMeta<'a> {
    dataset_hash: &'a str,
    seed: u64,
    mode: Mode,
    split: &'a SplitConfig,
    split_seed: Option<u64>,
    teacher: &'a TeacherConfig,
}

pub fn teacher_dir(exp: &ExperimentConfig, data: &LoadedData, seed: u64) -> PathBuf {
    data.dir(exp).join("teacher").join(seed.to_string())
}

/// Loads cached teacher outputs for `seed`, or trains (and caches) them.
/// Cached artifacts are only reused when their recorded inputs match.
pub fn prepare_seed(exp: &ExperimentConfig, data: &LoadedData, seed: u64, retrain: bool) -> Result<SeedData> {
    let ds = &data.dataset;
    let split = data.split_for(exp, seed)?;
    let graph = match exp.mode {
        Mode::Transductive => ds.graph.clone(),
        Mode::Inductive => remove_inductive_edges(&ds.graph, &split.test_ind),
    };
    let adjacency = normalized_adjacency(&graph);
    let dir = teacher_dir(exp, data, seed);
    let meta = to_json(&TeacherMeta {
        dataset_hash: &data.dataset_hash,
        seed,
        mode: exp.mode,
        split: &exp.split,
        split_seed: exp.split_seed,
        teacher: &exp.teacher,
    })?;
    let meta_path = dir.join("meta.json");
    let cached = fs::read_to_string(&meta_path).is_ok_and(|m| m == meta);
    if cached && !retrain {
        let teacher_probs = read_probs_tsv(dir.join("pt.tsv"))?;
        if teacher_probs.rows() != ds.num_nodes() || teacher_probs.cols() != ds.num_classes {
            return Err(Error::input(format!("{} does not match the dataset shape", dir.display())));
        }
        return Ok(SeedData {
            seed,
            split,
            graph,
            adjacency,
            teacher_probs,
            teacher_metrics: None,
        });
    }
    if !retrain && !exp.teacher_auto {
        return Err(Error::config(format!(
            "teacher artifacts missing or stale in {}; run train-teacher first",
            dir.display()
        )));
    }
    let mut rng = RngStream::new(seed);
    let trained = train_teacher(&graph, &ds.features, &ds.labels, ds.num_classes, &split, &exp.teacher, &mut rng)?;
    log::info!("teacher {} seed {seed}: {}", data.segment, describe(&trained.metrics));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    save_checkpoint(&trained.model, dir.join("checkpoint.bin"))?;
    write_probs_tsv(&trained.probs, dir.join("pt.tsv"))?;
    write_text(&dir.join("split.json"), &to_json(&split)?)?;
    write_jsonl(&dir.join("metrics.jsonl"), &trained.metrics.epochs)?;
    // Written last so an interrupted run is never mistaken for a cache hit.
    write_text(&meta_path, &meta)?;
    Ok(SeedData {
        seed,
        split,
        graph,
        adjacency,
        teacher_probs: trained.probs,
        teacher_metrics: Some(trained.metrics),
    })
}

pub fn teacher_seed_metrics(seed: u64, m: &TeacherMetrics) -> SeedMetrics {
    SeedMetrics {
        seed,
        best_epoch: m.best_epoch,
        val_acc: m.best_val_acc,
        test_obs_acc: m.test_obs_acc,
        test_ind_acc: m.test_ind_acc,
    }
}

/// Distills one student for `seed`, optionally picking hyperparameters by
/// validation accuracy first.
pub fn run_student(
    exp: &ExperimentConfig,
    data: &LoadedData,
    sd: &SeedData,
    variant: &DistillVariant,
    student: &StudentConfig,
) -> Result<TrainedStudent> {
    let ds = &data.dataset;
    let target = make_target(variant, &sd.teacher_probs, &sd.adjacency, &sd.split.train)?;
    let inputs = StudentInputs {
        features: &ds.features,
        labels: &ds.labels,
        num_classes: ds.num_classes,
        target: &target,
        adjacency: &sd.adjacency,
        split: &sd.split,
    };
    let rng = RngStream::new(sd.seed);
    let cfg = match &exp.search {
        Some(s) => {
            let grid = s.space.configs(student, s.budget);
            let (results, best) = grid_search(&inputs, variant, &grid, &rng)?;
            results[best].config.clone()
        }
        None => student.clone(),
    };
    train_student(&inputs, &cfg, variant, &rng)
}

pub fn student_seed_metrics(seed: u64, s: &TrainedStudent) -> SeedMetrics {
    SeedMetrics {
        seed,
        best_epoch: s.metrics.best_epoch,
        val_acc: s.metrics.val_acc,
        test_obs_acc: s.metrics.test_obs_acc,
        test_ind_acc: s.metrics.test_ind_acc,
    }
}

/// Per-epoch records followed by one summary line.
pub fn write_student_metrics(dir: &Path, seed: u64, s: &TrainedStudent) -> Result<()> {
    let mut lines: Vec<serde_json::Value> = s
        .metrics
        .epochs
        .iter()
        .map(|e| serde_json::to_value(e).unwrap_or_default())
        .collect();
    lines.push(serde_json::json!({ "summary": student_seed_metrics(seed, s) }));
    write_jsonl(&dir.join("metrics.jsonl"), &lines)
}
