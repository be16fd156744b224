//! GraphSAGE teacher with mean aggregation.
//!
//! Each layer computes `h' = act(h·W_self + mean_nbr(h)·W_nbr + b)` with ReLU
//! between layers and none on the output. The neighbor mean is a weighted
//! sparse operator, so the backward pass is its transpose applied by scatter.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{write_tsv_row, Split};
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::matrix::DenseMatrix;
use crate::nn::mlp::{dropout_in_place, glorot_fill, relu_in_place, HiddenRecord};
use crate::nn::train::{accuracy, batches, EarlyStopping};
use crate::nn::{adam_step, ce_loss, AdamState};
use crate::propagation::ProbMatrix;
use crate::rng::RngStream;

/// Row-weighted neighbor operator. Rows of isolated nodes are empty, which
/// yields a zero neighbor mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregator {
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    weights: Vec<f64>,
}

impl Aggregator {
    /// Exact mean over all neighbors.
    pub fn mean(g: &SparseGraph) -> Self {
        let mut weights = Vec::with_capacity(g.num_entries());
        for i in 0..g.num_nodes() {
            let w = 1.0 / g.degree(i).max(1) as f64;
            weights.extend(std::iter::repeat_n(w, g.degree(i)));
        }
        Self {
            row_ptr: g.row_ptr().to_vec(),
            col_idx: g.col_idx().to_vec(),
            weights,
        }
    }

    /// Mean over `k` sampled neighbors: without replacement when the degree
    /// allows it, otherwise uniformly with replacement.
    pub fn sampled(g: &SparseGraph, k: usize, rng: &mut RngStream) -> Self {
        let n = g.num_nodes();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(n * k);
        row_ptr.push(0);
        for i in 0..n {
            let nbrs = g.neighbors(i);
            if !nbrs.is_empty() && k > 0 {
                if nbrs.len() >= k {
                    col_idx.extend(sample(rng, nbrs.len(), k).iter().map(|j| nbrs[j]));
                } else {
                    col_idx.extend((0..k).map(|_| nbrs[rng.random_range(0..nbrs.len())]));
                }
            }
            row_ptr.push(col_idx.len());
        }
        let weights = vec![1.0 / k.max(1) as f64; col_idx.len()];
        Self {
            row_ptr,
            col_idx,
            weights,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn apply(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        if h.rows() != self.num_nodes() {
            return Err(Error::input("aggregator and matrix row counts differ"));
        }
        let mut out = DenseMatrix::zeros(h.rows(), h.cols());
        for i in 0..self.num_nodes() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let row = out.row_mut(i);
            for e in lo..hi {
                let w = self.weights[e];
                for (o, &x) in row.iter_mut().zip(h.row(self.col_idx[e] as usize)) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }

    /// Transposed product by scattering each row's contribution.
    pub fn apply_t(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        if g.rows() != self.num_nodes() {
            return Err(Error::input("aggregator and matrix row counts differ"));
        }
        let mut out = DenseMatrix::zeros(g.rows(), g.cols());
        for i in 0..self.num_nodes() {
            for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[e] as usize;
                let w = self.weights[e];
                for (o, &x) in out.row_mut(j).iter_mut().zip(g.row(i)) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SageLayer {
    pub w_self: DenseMatrix,
    pub w_nbr: DenseMatrix,
    pub bias: Vec<f64>,
}

impl SageLayer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w_self: DenseMatrix::zeros(input, output),
            w_nbr: DenseMatrix::zeros(input, output),
            bias: vec![0.0; output],
        }
    }

    fn in_dim(&self) -> usize {
        self.w_self.rows()
    }

    fn out_dim(&self) -> usize {
        self.w_self.cols()
    }

    fn forward(&self, h: &DenseMatrix, agg_h: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = h.matmul(&self.w_self)?;
        out.add_assign(&agg_h.matmul(&self.w_nbr)?)?;
        out.add_row_vector(&self.bias)?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SageModel {
    layers: Vec<SageLayer>,
    dropout: f64,
}

/// Activations recorded by [`SageModel::forward`].
#[derive(Debug, Clone)]
pub struct SageCache<'a> {
    input: &'a DenseMatrix,
    /// Neighbor mean of each layer's input.
    agg_inputs: Vec<Cow<'a, DenseMatrix>>,
    aggregators: Vec<Cow<'a, Aggregator>>,
    hidden: Vec<HiddenRecord>,
}

/// Graph-side inputs to a forward pass.
pub struct SageGraph<'a> {
    pub graph: &'a SparseGraph,
    pub mean: Aggregator,
    /// Neighbor mean of the features, reused by full-neighbor passes.
    pub mean_x: DenseMatrix,
    pub fan_out: Option<Vec<usize>>,
}

impl<'a> SageGraph<'a> {
    pub fn new(graph: &'a SparseGraph, x: &DenseMatrix, fan_out: Option<Vec<usize>>) -> Result<Self> {
        let mean = Aggregator::mean(graph);
        let mean_x = mean.apply(x)?;
        Ok(Self {
            graph,
            mean,
            mean_x,
            fan_out,
        })
    }
}

impl SageModel {
    /// Glorot-initialised model with widths `dims` (features first).
    pub fn new(dims: &[usize], dropout: f64, rng: &mut RngStream) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::config("a SAGE model needs positive input and output widths"));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let mut l = SageLayer::zeros(w[0], w[1]);
                glorot_fill(&mut l.w_self, rng);
                glorot_fill(&mut l.w_nbr, rng);
                l
            })
            .collect();
        Self::from_layers(layers, dropout)
    }

    pub fn from_layers(layers: Vec<SageLayer>, dropout: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::config(format!("dropout must be in [0, 1), got {dropout}")));
        }
        if layers.is_empty() {
            return Err(Error::config("a SAGE model needs at least one layer"));
        }
        for l in &layers {
            if l.w_nbr.shape() != l.w_self.shape() || l.bias.len() != l.out_dim() {
                return Err(Error::config("inconsistent SAGE layer shapes"));
            }
        }
        if layers.windows(2).any(|w| w[0].out_dim() != w[1].in_dim()) {
            return Err(Error::config("layer dims do not chain"));
        }
        Ok(Self { layers, dropout })
    }

    pub fn layers(&self) -> &[SageLayer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.w_self.as_slice(), l.w_nbr.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.w_self.as_mut_slice(), l.w_nbr.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    /// Forward pass. Fan-out sampling and dropout only happen in train mode;
    /// evaluation always aggregates over the full neighborhood.
    pub fn forward<'a>(
        &self,
        ctx: &'a SageGraph<'_>,
        x: &'a DenseMatrix,
        train_mode: bool,
        rng: &mut RngStream,
    ) -> Result<(DenseMatrix, SageCache<'a>)> {
        if x.cols() != self.in_dim() || x.rows() != ctx.graph.num_nodes() {
            return Err(Error::input(format!(
                "features {:?} do not fit a {}-node graph and {}-dim model",
                x.shape(),
                ctx.graph.num_nodes(),
                self.in_dim()
            )));
        }
        let sampling = train_mode.then_some(ctx.fan_out.as_ref()).flatten();
        let mut cache = SageCache {
            input: x,
            agg_inputs: Vec::with_capacity(self.layers.len()),
            aggregators: Vec::with_capacity(self.layers.len()),
            hidden: Vec::with_capacity(self.layers.len() - 1),
        };
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let agg: Cow<'a, Aggregator> = match sampling {
                Some(fan) => {
                    let k = fan.get(l).or(fan.last()).copied().unwrap_or(0);
                    Cow::Owned(Aggregator::sampled(ctx.graph, k, rng))
                }
                None => Cow::Borrowed(&ctx.mean),
            };
            let h: &DenseMatrix = if l == 0 { x } else { &cache.hidden[l - 1].out };
            let agg_h: Cow<'a, DenseMatrix> = match (&agg, l) {
                (Cow::Borrowed(_), 0) => Cow::Borrowed(&ctx.mean_x),
                _ => Cow::Owned(agg.apply(h)?),
            };
            let pre = layer.forward(h, &agg_h)?;
            cache.agg_inputs.push(agg_h);
            cache.aggregators.push(agg);
            if l == last {
                return Ok((pre, cache));
            }
            let mut out = pre.clone();
            relu_in_place(&mut out);
            let mask = (train_mode && self.dropout > 0.0)
                .then(|| dropout_in_place(&mut out, self.dropout, rng));
            cache.hidden.push(HiddenRecord { pre, out, mask });
        }
        unreachable!("a SAGE model has at least one layer")
    }

    /// Gradients in the order of [`Self::param_slices`].
    pub fn backprop(&self, cache: &SageCache<'_>, grad_logits: &DenseMatrix) -> Result<Vec<Vec<f64>>> {
        if grad_logits.shape() != (cache.input.rows(), self.out_dim())
            || cache.agg_inputs.len() != self.layers.len()
        {
            return Err(Error::input("gradient or cache shape does not match model"));
        }
        let mut grads = vec![Vec::new(); 3 * self.layers.len()];
        let mut g = grad_logits.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let h = if l == 0 { cache.input } else { &cache.hidden[l - 1].out };
            grads[3 * l] = h.t_matmul(&g)?.into_vec();
            grads[3 * l + 1] = cache.agg_inputs[l].t_matmul(&g)?.into_vec();
            grads[3 * l + 2] = g.column_sums();
            if l == 0 {
                break;
            }
            let mut gh = g.matmul_t(&layer.w_self)?;
            gh.add_assign(&cache.aggregators[l].apply_t(&g.matmul_t(&layer.w_nbr)?)?)?;
            let rec = &cache.hidden[l - 1];
            let gs = gh.as_mut_slice();
            if let Some(mask) = &rec.mask {
                gs.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
            }
            for (v, &p) in gs.iter_mut().zip(rec.pre.as_slice()) {
                if p <= 0.0 {
                    *v = 0.0;
                }
            }
            g = gh;
        }
        Ok(grads)
    }

    pub fn predict(&self, ctx: &SageGraph<'_>, x: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.forward(ctx, x, false, &mut RngStream::new(0))?.0)
    }
}

/// One-shot forward over `g` that builds the aggregation context itself.
pub fn sage_forward(
    model: &SageModel,
    g: &SparseGraph,
    x: &DenseMatrix,
    train_mode: bool,
    fan_out: Option<Vec<usize>>,
    rng: &mut RngStream,
) -> Result<DenseMatrix> {
    let ctx = SageGraph::new(g, x, fan_out)?;
    Ok(model.forward(&ctx, x, train_mode, rng)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub hidden: usize,
    pub num_layers: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Per-layer neighbor sample sizes; `None` aggregates all neighbors.
    pub fan_out: Option<Vec<usize>>,
    /// Training-node minibatch size; `None` is full batch.
    pub batch_size: Option<usize>,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            num_layers: 2,
            lr: 0.01,
            weight_decay: 5e-4,
            dropout: 0.0,
            max_epochs: 500,
            patience: 50,
            fan_out: None,
            batch_size: None,
        }
    }
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::config("teacher patience must be at least 1"));
        }
        if self.num_layers == 0 || self.hidden == 0 {
            return Err(Error::config("teacher needs at least one layer and a positive width"));
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::config("teacher lr must be positive and weight decay non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherMetrics {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub train_acc: f64,
    pub test_obs_acc: Option<f64>,
    pub test_ind_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedTeacher {
    pub model: SageModel,
    /// Softmax of the restored model's logits for every node of the graph.
    pub probs: ProbMatrix,
    pub metrics: TeacherMetrics,
}

/// Supervised training with early stopping on validation accuracy. The
/// returned model is the one from the best validation epoch.
///
/// For inductive splits `g` must already have the inductive edges removed;
/// test_ind accuracy is then measured on that same graph.
pub fn train_teacher(
    g: &SparseGraph,
    x: &DenseMatrix,
    labels: &[usize],
    num_classes: usize,
    split: &Split,
    cfg: &TeacherConfig,
    rng: &mut RngStream,
) -> Result<TrainedTeacher> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::input("teacher needs at least one training node"));
    }
    if split.val.is_empty() {
        return Err(Error::input("teacher needs validation nodes for early stopping"));
    }
    if labels.len() != g.num_nodes() {
        return Err(Error::input("label count does not match graph"));
    }
    let mut dims = vec![x.cols()];
    dims.extend(std::iter::repeat_n(cfg.hidden, cfg.num_layers - 1));
    dims.push(num_classes);
    let mut model = SageModel::new(&dims, cfg.dropout, &mut rng.fork(10))?;
    let ctx = SageGraph::new(g, x, cfg.fan_out.clone())?;
    let mut adam = AdamState::for_params(&model.param_slices(), cfg.lr, cfg.weight_decay);
    let mut stopper = EarlyStopping::new(cfg.patience)?;
    let mut train_rng = rng.fork(11);
    let mut epochs = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let mut epoch_loss = 0.0;
        let groups = batches(&split.train, cfg.batch_size, &mut train_rng);
        for rows in &groups {
            let (logits, cache) = model.forward(&ctx, x, true, &mut train_rng)?;
            let (loss, grad) = ce_loss(&logits, labels, rows)?;
            let grads = model.backprop(&cache, &grad)?;
            adam_step(&mut model.param_slices_mut(), &grads, &mut adam)?;
            epoch_loss += loss * rows.len() as f64;
        }
        epoch_loss /= split.train.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Numeric(format!("teacher loss diverged at epoch {epoch}")));
        }
        let logits = model.predict(&ctx, x)?;
        let val_acc = accuracy(&logits, labels, &split.val)?;
        epochs.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            val_acc,
        });
        if stopper.observe(epoch, val_acc, &model) {
            break;
        }
    }
    let best_epoch = stopper.best_epoch();
    let best_val_acc = stopper.best_score();
    if let Some(best) = stopper.into_best() {
        model = best;
    }
    let logits = model.predict(&ctx, x)?;
    let opt_acc = |idx: &[usize]| -> Result<Option<f64>> {
        if idx.is_empty() {
            Ok(None)
        } else {
            accuracy(&logits, labels, idx).map(Some)
        }
    };
    let metrics = TeacherMetrics {
        epochs,
        best_epoch,
        best_val_acc,
        train_acc: accuracy(&logits, labels, &split.train)?,
        test_obs_acc: opt_acc(&split.test_obs)?,
        test_ind_acc: opt_acc(&split.test_ind)?,
    };
    Ok(TrainedTeacher {
        model,
        probs: ProbMatrix::softmax(&logits),
        metrics,
    })
}

const MAGIC: &[u8; 4] = b"PNDT";
const VERSION: u32 = 1;

/// Binary checkpoint: magic, version, dropout, tensor count, per-tensor
/// (rows, cols) manifest, then every tensor as little-endian f64.
pub fn save_checkpoint(model: &SageModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut shapes = Vec::new();
    for l in &model.layers {
        shapes.push(l.w_self.shape());
        shapes.push(l.w_nbr.shape());
        shapes.push((1, l.bias.len()));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&model.dropout.to_le_bytes());
    buf.extend_from_slice(&(shapes.len() as u32).to_le_bytes());
    for (r, c) in &shapes {
        buf.extend_from_slice(&(*r as u32).to_le_bytes());
        buf.extend_from_slice(&(*c as u32).to_le_bytes());
    }
    for s in model.param_slices() {
        for v in s {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SageModel> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::load(path, 0, msg.to_string());
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(4).ok_or_else(|| bad("truncated checkpoint"))? != MAGIC {
        return Err(bad("not a teacher checkpoint"));
    }
    let u32_next = |c: &mut Cursor<'_>| {
        c.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| bad("truncated checkpoint"))
    };
    if u32_next(&mut cur)? != VERSION {
        return Err(bad("unsupported checkpoint version"));
    }
    let dropout = cur
        .take(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .ok_or_else(|| bad("truncated checkpoint"))?;
    let count = u32_next(&mut cur)? as usize;
    if count == 0 || !count.is_multiple_of(3) {
        return Err(bad("tensor count must be a positive multiple of three"));
    }
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let r = u32_next(&mut cur)? as usize;
        let c = u32_next(&mut cur)? as usize;
        shapes.push((r, c));
    }
    let mut tensors = Vec::with_capacity(count);
    for &(r, c) in &shapes {
        let bytes = cur.take(r * c * 8).ok_or_else(|| bad("truncated checkpoint"))?;
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        tensors.push(DenseMatrix::new(r, c, vals).map_err(|e| bad(&e.to_string()))?);
    }
    if cur.pos != buf.len() {
        return Err(bad("trailing bytes after checkpoint"));
    }
    let mut layers = Vec::with_capacity(count / 3);
    let mut it = tensors.into_iter();
    while let (Some(w_self), Some(w_nbr), Some(b)) = (it.next(), it.next(), it.next()) {
        layers.push(SageLayer {
            w_self,
            w_nbr,
            bias: b.into_vec(),
        });
    }
    SageModel::from_layers(layers, dropout).map_err(|e| bad(&e.to_string()))
}

struct Cursor<'b> {
    buf: &'b [u8],
    pos: usize,
}

impl<'b> Cursor<'b> {
    fn take(&mut self, n: usize) -> Option<&'b [u8]> {
        let s = self.buf.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }
}

/// One row per node, tab-separated, shortest round-trip float formatting.
pub fn write_probs_tsv(p: &ProbMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::with_capacity(p.rows() * p.cols() * 20);
    for i in 0..p.rows() {
        write_tsv_row(&mut s, p.row(i));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_probs_tsv(path: impl AsRef<Path>) -> Result<ProbMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (ln, line) in text.lines().enumerate() {
        let row: Vec<f64> = line
            .split('\t')
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::load(path, ln + 1, "bad probability value"))?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(Error::load(path, ln + 1, "ragged probability row"));
        }
        values.extend(row);
        rows += 1;
    }
    let m = DenseMatrix::new(rows, cols.unwrap_or(0), values)?;
    ProbMatrix::new(m).map_err(|e| Error::load(path, 0, e.to_string()))
}

/// Human-readable summary line for logs.
pub fn describe(metrics: &TeacherMetrics) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "best epoch {} val {:.4} train {:.4}",
        metrics.best_epoch, metrics.best_val_acc, metrics.train_acc
    );
    if let Some(a) = metrics.test_obs_acc {
        let _ = write!(s, " test_obs {a:.4}");
    }
    if let Some(a) = metrics.test_ind_acc {
        let _ = write!(s, " test_ind {a:.4}");
    }
    s
}
