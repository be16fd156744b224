//! Student MLP training against teacher outputs.
//!
//! Target-side variants (GLNN, P&D, P&D-fix, PPR) only change the KL target.
//! InvKD and the CONV ablation leave the target alone and instead push the
//! student's probabilities through a graph operator before the KL, which
//! couples every node and therefore always trains full-batch.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::Split;
use crate::error::{Error, Result};
use crate::graph::{dirichlet_energy, NormalizedAdjacency};
use crate::matrix::DenseMatrix;
use crate::nn::loss::{ce_loss, kl_loss, log_softmax};
use crate::nn::train::{accuracy, batches, EarlyStopping};
use crate::nn::{adam_step, AdamState, MlpModel};
use crate::propagation::{
    inverse_propagate, normalize_rows, ppr_exact, propagate_pnd, propagate_pnd_fix,
    softmax_in_place, ProbMatrix, PropagationConfig, DEFAULT_FLOOR,
};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Glnn,
    InvKd,
    Pnd,
    PndFix,
    ConvAblation,
    /// Target smoothed by exact personalized PageRank.
    Ppr,
}

impl VariantKind {
    pub fn name(self) -> &'static str {
        match self {
            VariantKind::Glnn => "glnn",
            VariantKind::InvKd => "invkd",
            VariantKind::Pnd => "pnd",
            VariantKind::PndFix => "pnd_fix",
            VariantKind::ConvAblation => "conv",
            VariantKind::Ppr => "ppr",
        }
    }

    fn needs_gamma(self) -> bool {
        self != VariantKind::Glnn
    }

    fn needs_iterations(self) -> bool {
        matches!(self, VariantKind::Pnd | VariantKind::PndFix)
    }

    /// Whether the loss itself applies a graph operator to the student.
    pub fn student_side(self) -> bool {
        matches!(self, VariantKind::InvKd | VariantKind::ConvAblation)
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "glnn" => VariantKind::Glnn,
            "invkd" | "inv_kd" => VariantKind::InvKd,
            "pnd" | "p&d" => VariantKind::Pnd,
            "pnd_fix" | "p&d_fix" => VariantKind::PndFix,
            "conv" | "conv_ablation" => VariantKind::ConvAblation,
            "ppr" => VariantKind::Ppr,
            other => return Err(Error::config(format!("unknown variant {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillVariant {
    pub kind: VariantKind,
    pub gamma: Option<f64>,
    pub iterations: Option<usize>,
    /// Weight of the cross-entropy term on training labels.
    pub alpha: f64,
}

impl DistillVariant {
    pub fn new(kind: VariantKind, gamma: Option<f64>, iterations: Option<usize>, alpha: f64) -> Result<Self> {
        let v = Self {
            kind,
            gamma,
            iterations,
            alpha,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn glnn() -> Self {
        Self {
            kind: VariantKind::Glnn,
            gamma: None,
            iterations: None,
            alpha: 0.0,
        }
    }

    /// Supervised MLP without distillation: GLNN with all weight on CE.
    pub fn plain_mlp() -> Self {
        Self {
            alpha: 1.0,
            ..Self::glnn()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if self.kind.needs_gamma() && self.gamma.is_none() {
            return Err(Error::config(format!("variant {} needs gamma", self.kind)));
        }
        if self.kind.needs_iterations() && self.iterations.is_none() {
            return Err(Error::config(format!("variant {} needs iterations", self.kind)));
        }
        if let Some(g) = self.gamma {
            if !g.is_finite() {
                return Err(Error::config("gamma must be finite"));
            }
        }
        Ok(())
    }

    fn gamma(&self) -> Result<f64> {
        self.gamma
            .ok_or_else(|| Error::config(format!("variant {} needs gamma", self.kind)))
    }

    fn propagation(&self) -> Result<PropagationConfig> {
        let t = self
            .iterations
            .ok_or_else(|| Error::config(format!("variant {} needs iterations", self.kind)))?;
        PropagationConfig::new(self.gamma()?, t)
    }
}

/// KL target for `variant`. Rows of `train_idx` are pinned to the teacher
/// for P&D-fix, after renormalization.
pub fn make_target(
    variant: &DistillVariant,
    pt: &ProbMatrix,
    a: &NormalizedAdjacency,
    train_idx: &[usize],
) -> Result<ProbMatrix> {
    variant.validate()?;
    match variant.kind {
        VariantKind::Glnn | VariantKind::InvKd | VariantKind::ConvAblation => Ok(pt.clone()),
        VariantKind::Pnd => {
            let cfg = variant.propagation()?;
            normalize_rows(&propagate_pnd(pt.matrix(), a, &cfg)?, cfg.floor)
        }
        VariantKind::PndFix => {
            let cfg = variant.propagation()?;
            let prop = propagate_pnd_fix(pt.matrix(), a, &cfg, train_idx)?;
            let mut out = normalize_rows(&prop, cfg.floor)?.into_matrix();
            for &i in train_idx {
                out.row_mut(i).copy_from_slice(pt.row(i));
            }
            Ok(ProbMatrix::from_matrix_unchecked(out))
        }
        VariantKind::Ppr => normalize_rows(&ppr_exact(pt.matrix(), a, variant.gamma()?)?, DEFAULT_FLOOR),
    }
}

/// Inputs shared by every evaluation of [`distill_loss`].
pub struct LossContext<'a> {
    pub variant: &'a DistillVariant,
    pub target: &'a ProbMatrix,
    pub adjacency: &'a NormalizedAdjacency,
    pub labels: &'a [usize],
    /// Rows entering the KL term.
    pub kl_rows: &'a [usize],
    /// Rows entering the cross-entropy term (training nodes).
    pub ce_rows: &'a [usize],
}

/// `α·CE + (1 − α)·distillation` and its gradient w.r.t. the logits.
pub fn distill_loss(ctx: &LossContext<'_>, logits: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    let v = ctx.variant;
    v.validate()?;
    if ctx.kl_rows.is_empty() {
        return Err(Error::input("distillation loss over an empty row set"));
    }
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    if v.alpha > 0.0 && !ctx.ce_rows.is_empty() {
        let (l, mut g) = ce_loss(logits, ctx.labels, ctx.ce_rows)?;
        g.scale(v.alpha);
        grad.add_assign(&g)?;
        loss += v.alpha * l;
    }
    if v.alpha < 1.0 {
        let (l, mut g) = match v.kind {
            VariantKind::InvKd => operator_kl(logits, ctx, Operator::Inverse(v.gamma()?))?,
            VariantKind::ConvAblation => operator_kl(logits, ctx, Operator::Smooth)?,
            _ => kl_loss(logits, ctx.target, ctx.kl_rows)?,
        };
        g.scale(1.0 - v.alpha);
        grad.add_assign(&g)?;
        loss += (1.0 - v.alpha) * l;
    }
    Ok((loss, grad))
}

#[derive(Clone, Copy)]
enum Operator {
    /// `2I − γÃ`
    Inverse(f64),
    /// `Ã`
    Smooth,
}

fn apply_operator(op: Operator, a: &NormalizedAdjacency, m: &DenseMatrix) -> Result<DenseMatrix> {
    match op {
        Operator::Inverse(gamma) => inverse_propagate(m, a, gamma),
        Operator::Smooth => a.apply(m),
    }
}

/// `KL(t ‖ normalize_rows(B·softmax(z)))` over the KL rows. Floored entries
/// of `B·softmax(z)` are treated as constants. `B` is symmetric, so the
/// backward pass reuses the forward operator.
fn operator_kl(logits: &DenseMatrix, ctx: &LossContext<'_>, op: Operator) -> Result<(f64, DenseMatrix)> {
    let a = ctx.adjacency;
    if logits.rows() != a.num_nodes() || logits.shape() != ctx.target.matrix().shape() {
        return Err(Error::input("operator losses need logits for every node"));
    }
    let target = match op {
        Operator::Inverse(_) => normalize_rows(ctx.target.matrix(), DEFAULT_FLOOR)?,
        Operator::Smooth => ctx.target.clone(),
    };
    let mut s = logits.clone();
    for i in 0..s.rows() {
        softmax_in_place(s.row_mut(i));
    }
    let c = apply_operator(op, a, &s)?;
    let n = ctx.kl_rows.len() as f64;
    let mut loss = 0.0;
    let mut gc = DenseMatrix::zeros(c.rows(), c.cols());
    for &i in ctx.kl_rows {
        let crow = c.row(i);
        let sum: f64 = crow.iter().map(|&v| v.max(DEFAULT_FLOOR)).sum();
        let g = gc.row_mut(i);
        for (k, (&t, &ck)) in target.row(i).iter().zip(crow).enumerate() {
            let r = ck.max(DEFAULT_FLOOR) / sum;
            if t > 0.0 {
                loss += t * (t.ln() - r.ln());
            }
            if ck > DEFAULT_FLOOR {
                g[k] = (1.0 - t / r) / sum / n;
            }
        }
    }
    let gs = apply_operator(op, a, &gc)?;
    let mut grad = DenseMatrix::zeros(s.rows(), s.cols());
    for i in 0..s.rows() {
        let (srow, grow) = (s.row(i), gs.row(i));
        let dot: f64 = srow.iter().zip(grow).map(|(a, b)| a * b).sum();
        for (o, (&sv, &gv)) in grad.row_mut(i).iter_mut().zip(srow.iter().zip(grow)) {
            *o = sv * (gv - dot);
        }
    }
    Ok((loss / n, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentConfig {
    pub hidden: usize,
    pub num_layers: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Node minibatch size for target-side variants; `None` is full batch.
    pub batch_size: Option<usize>,
    /// When off, train for exactly `max_epochs` and keep the final model.
    pub early_stopping: bool,
}

impl Default for StudentConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            num_layers: 2,
            lr: 0.01,
            weight_decay: 0.005,
            dropout: 0.6,
            max_epochs: 500,
            patience: 50,
            batch_size: None,
            early_stopping: true,
        }
    }
}

impl StudentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden == 0 {
            return Err(Error::config("student needs at least one layer and a positive width"));
        }
        if self.patience == 0 {
            return Err(Error::config("student patience must be at least 1"));
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::config("student lr must be positive and weight decay non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("student dropout must be in [0, 1)"));
        }
        Ok(())
    }

    fn dims(&self, input: usize, classes: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat_n(self.hidden, self.num_layers - 1));
        dims.push(classes);
        dims
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub val_acc: f64,
    /// Dirichlet energy of the student's class probabilities.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentMetrics {
    pub epochs: Vec<StudentEpoch>,
    pub best_epoch: usize,
    pub val_acc: f64,
    pub test_obs_acc: Option<f64>,
    pub test_ind_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedStudent {
    pub model: MlpModel,
    pub metrics: StudentMetrics,
}

/// Everything a student run needs besides its configuration.
pub struct StudentInputs<'a> {
    pub features: &'a DenseMatrix,
    pub labels: &'a [usize],
    pub num_classes: usize,
    /// KL target from [`make_target`].
    pub target: &'a ProbMatrix,
    /// Operator of the graph visible during training.
    pub adjacency: &'a NormalizedAdjacency,
    pub split: &'a Split,
}

fn energy_of(logits: &DenseMatrix, a: &NormalizedAdjacency) -> Result<f64> {
    let probs = ProbMatrix::softmax(logits);
    dirichlet_energy(probs.matrix(), a)
}

/// Trains a student. The KL term covers every node except the inductive
/// test set; cross-entropy (when `alpha > 0`) covers the training nodes.
/// Epoch 0 in the metrics is the untrained model.
pub fn train_student(
    inputs: &StudentInputs<'_>,
    cfg: &StudentConfig,
    variant: &DistillVariant,
    rng: &RngStream,
) -> Result<TrainedStudent> {
    cfg.validate()?;
    variant.validate()?;
    let x = inputs.features;
    let split = inputs.split;
    let n = x.rows();
    if inputs.labels.len() != n || inputs.target.rows() != n || inputs.adjacency.num_nodes() != n {
        return Err(Error::input("features, labels, target and graph disagree on node count"));
    }
    if split.val.is_empty() {
        return Err(Error::input("student needs validation nodes"));
    }
    let kl_rows = split.observed();
    let mut model = MlpModel::new(&cfg.dims(x.cols(), inputs.num_classes), cfg.dropout, &mut rng.fork(20))?;
    let mut adam = AdamState::for_params(&model.param_slices(), cfg.lr, cfg.weight_decay);
    let mut stopper = EarlyStopping::new(cfg.patience)?;
    let mut train_rng = rng.fork(21);
    let full_ctx = LossContext {
        variant,
        target: inputs.target,
        adjacency: inputs.adjacency,
        labels: inputs.labels,
        kl_rows: &kl_rows,
        ce_rows: &split.train,
    };
    let batch_size = if variant.kind.student_side() { None } else { cfg.batch_size };
    let mut is_train = vec![false; n];
    split.train.iter().for_each(|&i| is_train[i] = true);

    let logits0 = model.predict(x)?;
    let mut epochs = vec![StudentEpoch {
        epoch: 0,
        loss: distill_loss(&full_ctx, &logits0)?.0,
        val_acc: accuracy(&logits0, inputs.labels, &split.val)?,
        energy: energy_of(&logits0, inputs.adjacency)?,
    }];

    for epoch in 1..=cfg.max_epochs {
        let mut epoch_loss = 0.0;
        for rows in batches(&kl_rows, batch_size, &mut train_rng) {
            let loss = if rows.len() == kl_rows.len() {
                let (logits, cache) = model.forward(x, true, &mut train_rng)?;
                let (loss, grad) = distill_loss(&full_ctx, &logits)?;
                let grads = model.backprop(&cache, &grad)?;
                adam_step(&mut model.param_slices_mut(), &grads, &mut adam)?;
                loss * rows.len() as f64
            } else {
                let xb = x.select_rows(&rows)?;
                let tb = ProbMatrix::from_matrix_unchecked(inputs.target.matrix().select_rows(&rows)?);
                let lb: Vec<usize> = rows.iter().map(|&i| inputs.labels[i]).collect();
                let all: Vec<usize> = (0..rows.len()).collect();
                let ce: Vec<usize> = (0..rows.len()).filter(|&j| is_train[rows[j]]).collect();
                let ctx = LossContext {
                    target: &tb,
                    labels: &lb,
                    kl_rows: &all,
                    ce_rows: &ce,
                    ..full_ctx
                };
                let (logits, cache) = model.forward(&xb, true, &mut train_rng)?;
                let (loss, grad) = distill_loss(&ctx, &logits)?;
                let grads = model.backprop(&cache, &grad)?;
                adam_step(&mut model.param_slices_mut(), &grads, &mut adam)?;
                loss * rows.len() as f64
            };
            epoch_loss += loss;
        }
        epoch_loss /= kl_rows.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Numeric(format!("student loss diverged at epoch {epoch}")));
        }
        let logits = model.predict(x)?;
        let val_acc = accuracy(&logits, inputs.labels, &split.val)?;
        epochs.push(StudentEpoch {
            epoch,
            loss: epoch_loss,
            val_acc,
            energy: energy_of(&logits, inputs.adjacency)?,
        });
        if stopper.observe(epoch, val_acc, &model) && cfg.early_stopping {
            break;
        }
    }
    let (best_epoch, model) = if cfg.early_stopping {
        let e = stopper.best_epoch();
        (e, stopper.into_best().unwrap_or(model))
    } else {
        (epochs.len() - 1, model)
    };
    let logits = model.predict(x)?;
    let opt_acc = |idx: &[usize]| -> Result<Option<f64>> {
        if idx.is_empty() {
            Ok(None)
        } else {
            accuracy(&logits, inputs.labels, idx).map(Some)
        }
    };
    let metrics = StudentMetrics {
        val_acc: accuracy(&logits, inputs.labels, &split.val)?,
        test_obs_acc: opt_acc(&split.test_obs)?,
        test_ind_acc: opt_acc(&split.test_ind)?,
        best_epoch,
        epochs,
    };
    Ok(TrainedStudent { model, metrics })
}

/// Accuracy of the eval-mode student on `idx`, ties to the lowest class.
pub fn evaluate(model: &MlpModel, x: &DenseMatrix, labels: &[usize], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::input("evaluate over an empty index set"));
    }
    accuracy(&model.predict(x)?, labels, idx)
}

/// Per-row log-probabilities; handy for inspecting students.
pub fn log_probs(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let ls = log_softmax(out.row(i));
        out.row_mut(i).copy_from_slice(&ls);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lr: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub dropout: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            lr: vec![0.01, 0.005, 0.001],
            weight_decay: vec![0.005, 0.001, 0.0],
            dropout: vec![0.0, 0.2, 0.4, 0.6, 0.8],
        }
    }
}

impl SearchSpace {
    /// Cross product in a fixed order (lr outermost), truncated to `budget`.
    pub fn configs(&self, base: &StudentConfig, budget: Option<usize>) -> Vec<StudentConfig> {
        let mut out = Vec::new();
        for &lr in &self.lr {
            for &wd in &self.weight_decay {
                for &dropout in &self.dropout {
                    out.push(StudentConfig {
                        lr,
                        weight_decay: wd,
                        dropout,
                        ..base.clone()
                    });
                }
            }
        }
        if let Some(b) = budget {
            out.truncate(b);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub config: StudentConfig,
    pub val_acc: f64,
}

/// Trains one student per grid point (in parallel on the current rayon pool)
/// and returns every result plus the index of the best validation accuracy.
/// Ties go to the earliest grid point, so the outcome is independent of
/// scheduling.
pub fn grid_search(
    inputs: &StudentInputs<'_>,
    variant: &DistillVariant,
    grid: &[StudentConfig],
    rng: &RngStream,
) -> Result<(Vec<GridResult>, usize)> {
    if grid.is_empty() {
        return Err(Error::config("empty hyperparameter grid"));
    }
    let results: Vec<GridResult> = grid
        .par_iter()
        .map(|cfg| {
            let run = train_student(inputs, cfg, variant, rng)?;
            Ok(GridResult {
                config: cfg.clone(),
                val_acc: run.metrics.val_acc,
            })
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.val_acc > results[best].val_acc {
            best = i;
        }
    }
    Ok((results, best))
}
