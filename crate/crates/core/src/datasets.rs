//! Dataset files, splits and the synthetic generators.
//!
//! On-disk layout of a dataset directory:
//!
//! ```text
//! manifest.json  {"name": str, "num_nodes": int, "num_classes": int, "feature_dim": int}
//! edges.tsv      "u\tv" per line, 0-based, undirected, duplicates tolerated
//! features.tsv   feature_dim tab-separated floats per node
//! labels.tsv     one class id per node
//! splits.json    optional {"train": [..], "val": [..], "test_obs": [..], "test_ind": [..]}
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::matrix::DenseMatrix;
use crate::propagation::ProbMatrix;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: SparseGraph,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: SparseGraph,
        features: DenseMatrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if features.rows() != n || labels.len() != n {
            return Err(Error::input(format!(
                "{n} nodes but {} feature rows and {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::input(format!("label {bad} not below {num_classes} classes")));
        }
        Ok(Self {
            name: name.into(),
            graph,
            features,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
}

/// Node partition. All four sets are sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test_obs: Vec<usize>,
    #[serde(default)]
    pub test_ind: Vec<usize>,
}

impl Split {
    /// Checks that the four sets are disjoint and cover `0..num_nodes`.
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut seen = vec![false; num_nodes];
        for (name, set) in self.named_sets() {
            for &i in set {
                if i >= num_nodes {
                    return Err(Error::Split(format!("{name} contains node {i} >= {num_nodes}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Split(format!("node {i} appears in more than one set")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Split(format!("node {missing} is in no set")));
        }
        Ok(())
    }

    fn named_sets(&self) -> [(&'static str, &Vec<usize>); 4] {
        [
            ("train", &self.train),
            ("val", &self.val),
            ("test_obs", &self.test_obs),
            ("test_ind", &self.test_ind),
        ]
    }

    pub fn is_inductive(&self) -> bool {
        !self.test_ind.is_empty()
    }

    /// Nodes visible during training: everything except `test_ind`.
    pub fn observed(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .train
            .iter()
            .chain(&self.val)
            .chain(&self.test_obs)
            .copied()
            .collect();
        v.sort_unstable();
        v
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty content lines with 1-based line numbers. A single trailing
/// newline is tolerated; blank lines elsewhere are errors in the caller.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let body = body.strip_suffix('\r').unwrap_or(body);
    body.split('\n')
        .enumerate()
        .filter(move |_| !body.is_empty())
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
}

fn parse_usize(path: &Path, line: usize, tok: &str) -> Result<usize> {
    tok.trim()
        .parse()
        .map_err(|_| Error::load(path, line, format!("expected a non-negative integer, got {tok:?}")))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(&read_file(&manifest_path)?)
        .map_err(|e| Error::load(&manifest_path, e.line(), e.to_string()))?;
    let n = manifest.num_nodes;

    let labels_path = dir.join("labels.tsv");
    let mut labels = Vec::with_capacity(n);
    for (ln, l) in lines(&read_file(&labels_path)?) {
        let y = parse_usize(&labels_path, ln, l)?;
        if y >= manifest.num_classes {
            return Err(Error::load(
                &labels_path,
                ln,
                format!("label {y} not below num_classes {}", manifest.num_classes),
            ));
        }
        labels.push(y);
    }
    if labels.len() != n {
        return Err(Error::load(
            &labels_path,
            labels.len(),
            format!("manifest declares {n} nodes but file has {} labels", labels.len()),
        ));
    }

    let feat_path = dir.join("features.tsv");
    let d = manifest.feature_dim;
    let mut values = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (ln, l) in lines(&read_file(&feat_path)?) {
        let before = values.len();
        for tok in l.split('\t') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| Error::load(&feat_path, ln, format!("bad float {tok:?}")))?;
            if !v.is_finite() {
                return Err(Error::load(&feat_path, ln, "non-finite feature"));
            }
            values.push(v);
        }
        if values.len() - before != d {
            return Err(Error::load(
                &feat_path,
                ln,
                format!("expected {d} features, found {}", values.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::load(
            &feat_path,
            rows,
            format!("manifest declares {n} nodes but file has {rows} feature rows"),
        ));
    }

    let edges_path = dir.join("edges.tsv");
    let mut edges = Vec::new();
    for (ln, l) in lines(&read_file(&edges_path)?) {
        let mut it = l.split('\t');
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::load(&edges_path, ln, "expected two tab-separated node ids"));
        };
        let (u, v) = (parse_usize(&edges_path, ln, a)?, parse_usize(&edges_path, ln, b)?);
        if u >= n || v >= n {
            return Err(Error::load(&edges_path, ln, format!("node id out of range 0..{n}")));
        }
        edges.push((u, v));
    }
    let graph = SparseGraph::from_edges(&edges, n)?;
    let features = DenseMatrix::from_vec_unchecked(n, d, values);
    Dataset::new(manifest.name, graph, features, labels, manifest.num_classes)
}

/// Reads `splits.json` from a dataset directory when present.
pub fn load_splits(dir: impl AsRef<Path>, num_nodes: usize) -> Result<Option<Split>> {
    let path = dir.as_ref().join("splits.json");
    if !path.exists() {
        return Ok(None);
    }
    let split: Split = serde_json::from_str(&read_file(&path)?)
        .map_err(|e| Error::load(&path, e.line(), e.to_string()))?;
    split.validate(num_nodes)?;
    Ok(Some(split))
}

fn write_file(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `ds` in the directory layout read by [`load_dataset`]. Floats use
/// shortest round-trip formatting, so loading the result is bit-exact.
pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>, split: Option<&Split>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        name: ds.name.clone(),
        num_nodes: ds.num_nodes(),
        num_classes: ds.num_classes,
        feature_dim: ds.feature_dim(),
    };
    write_file(dir.join("manifest.json"), &to_json(&manifest)?)?;

    let mut s = String::new();
    for (u, v) in ds.graph.edges() {
        let _ = writeln!(s, "{u}\t{v}");
    }
    write_file(dir.join("edges.tsv"), &s)?;

    s.clear();
    for i in 0..ds.num_nodes() {
        write_tsv_row(&mut s, ds.features.row(i));
    }
    write_file(dir.join("features.tsv"), &s)?;

    s.clear();
    for y in &ds.labels {
        let _ = writeln!(s, "{y}");
    }
    write_file(dir.join("labels.tsv"), &s)?;

    if let Some(split) = split {
        write_file(dir.join("splits.json"), &to_json(split)?)?;
    }
    Ok(())
}

pub(crate) fn write_tsv_row(out: &mut String, row: &[f64]) {
    for (j, v) in row.iter().enumerate() {
        if j > 0 {
            out.push('\t');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub per_class_train: usize,
    pub per_class_val: usize,
    pub inductive: bool,
    pub inductive_frac: f64,
    /// Use 20%/30% of a class that cannot supply the fixed counts.
    pub allow_fallback: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            per_class_train: 20,
            per_class_val: 30,
            inductive: false,
            inductive_frac: 0.2,
            allow_fallback: true,
        }
    }
}

/// Per-class train/val sampling; the rest is the test pool, from which the
/// inductive share is drawn when requested.
pub fn make_splits(labels: &[usize], num_classes: usize, seed: u64, cfg: &SplitConfig) -> Result<Split> {
    if !(0.0..1.0).contains(&cfg.inductive_frac) {
        return Err(Error::config("inductive_frac must be in [0, 1)"));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::input(format!("label {y} not below {num_classes} classes")));
        }
        by_class[y].push(i);
    }
    let root = RngStream::new(seed);
    let mut rng = root.fork(1);
    let mut split = Split::default();
    let mut pool = Vec::new();
    let need = cfg.per_class_train + cfg.per_class_val;
    for (c, nodes) in by_class.iter_mut().enumerate() {
        nodes.shuffle(&mut rng);
        let (nt, nv) = if nodes.len() >= need {
            (cfg.per_class_train, cfg.per_class_val)
        } else if cfg.allow_fallback {
            log::warn!(
                "class {c} has {} nodes, fewer than {need}; using 20%/30% of it",
                nodes.len()
            );
            let nt = ((nodes.len() as f64 * 0.2).round() as usize).max(1).min(nodes.len());
            let nv = ((nodes.len() as f64 * 0.3).round() as usize).min(nodes.len() - nt);
            (nt, nv)
        } else {
            return Err(Error::Split(format!(
                "class {c} has {} nodes, fewer than the {need} required",
                nodes.len()
            )));
        };
        split.train.extend_from_slice(&nodes[..nt]);
        split.val.extend_from_slice(&nodes[nt..nt + nv]);
        pool.extend_from_slice(&nodes[nt + nv..]);
    }
    pool.sort_unstable();
    if cfg.inductive {
        let mut rng = root.fork(2);
        let k = (cfg.inductive_frac * pool.len() as f64).floor() as usize;
        let mut pick = vec![false; pool.len()];
        for i in sample(&mut rng, pool.len(), k) {
            pick[i] = true;
        }
        for (i, &node) in pool.iter().enumerate() {
            if pick[i] {
                split.test_ind.push(node);
            } else {
                split.test_obs.push(node);
            }
        }
    } else {
        split.test_obs = pool;
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    Ok(split)
}

/// Drops every edge touching a node of `ind`. The node count is kept.
pub fn remove_inductive_edges(g: &SparseGraph, ind: &[usize]) -> SparseGraph {
    let mut mask = vec![false; g.num_nodes()];
    for &i in ind {
        if i < mask.len() {
            mask[i] = true;
        }
    }
    g.filter_edges(|u, v| !mask[u] && !mask[v])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainsConfig {
    pub num_chains: usize,
    pub length: usize,
    pub num_classes: usize,
    /// Amplitude of uniform noise added to every feature (0 disables it).
    pub noise: f64,
    /// Extra pure-noise feature columns appended after the class one-hot.
    pub noise_dim: usize,
}

impl Default for ChainsConfig {
    fn default() -> Self {
        Self {
            num_chains: 30,
            length: 8,
            num_classes: 10,
            noise: 0.0,
            noise_dim: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainsData {
    pub dataset: Dataset,
    /// First node of every chain, the only node carrying its class one-hot.
    pub base_nodes: Vec<usize>,
    /// Nodes more than two hops from their chain's base.
    pub far_nodes: Vec<usize>,
    /// train = bases, val = nodes one or two hops out, test_obs = far nodes.
    pub split: Split,
}

/// Disjoint path graphs. Chain `c` occupies nodes `c·length .. (c+1)·length`
/// with its base first, and has class `c mod num_classes`.
pub fn gen_chains(cfg: &ChainsConfig, seed: u64) -> Result<ChainsData> {
    if cfg.num_classes == 0 || !cfg.num_chains.is_multiple_of(cfg.num_classes) {
        return Err(Error::config(format!(
            "num_chains ({}) must be divisible by num_classes ({})",
            cfg.num_chains, cfg.num_classes
        )));
    }
    if cfg.length == 0 {
        return Err(Error::config("chain length must be positive"));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::config("noise must be a non-negative finite number"));
    }
    let n = cfg.num_chains * cfg.length;
    let d = cfg.num_classes + cfg.noise_dim;
    let mut edges = Vec::with_capacity(cfg.num_chains * (cfg.length - 1));
    let mut labels = Vec::with_capacity(n);
    let mut features = DenseMatrix::zeros(n, d);
    let mut split = Split::default();
    let mut base_nodes = Vec::new();
    let mut rng = RngStream::new(seed).fork(3);
    for c in 0..cfg.num_chains {
        let class = c % cfg.num_classes;
        let base = c * cfg.length;
        base_nodes.push(base);
        for hop in 0..cfg.length {
            let node = base + hop;
            labels.push(class);
            if hop > 0 {
                edges.push((node - 1, node));
            }
            match hop {
                0 => split.train.push(node),
                1 | 2 => split.val.push(node),
                _ => split.test_obs.push(node),
            }
        }
        features.set(base, class, 1.0);
    }
    if cfg.noise > 0.0 {
        for v in features.as_mut_slice() {
            *v += rng.random_range(-cfg.noise..=cfg.noise);
        }
    }
    let graph = SparseGraph::from_edges(&edges, n)?;
    let far_nodes = split.test_obs.clone();
    let dataset = Dataset::new("chains", graph, features, labels, cfg.num_classes)?;
    Ok(ChainsData {
        dataset,
        base_nodes,
        far_nodes,
        split,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularConfig {
    pub degree: usize,
    pub homophily: f64,
    pub num_classes: usize,
    pub nodes_per_class: usize,
    /// Features are `one_hot(class) + N(0, σ²)` in `num_classes` columns.
    pub feature_noise: f64,
}

/// Number of same-class neighbors each node receives.
pub fn same_class_degree(degree: usize, h: f64) -> usize {
    (h * degree as f64).round() as usize
}

/// Per-offset inter-class edge counts `u_t` for class offsets
/// `t = 1..=⌊K/2⌋`. Class `c` links to `c ± t` with `u_t` edges per node
/// (a single pairing when `t = K/2`). Counts are as even as possible.
fn inter_class_plan(r: usize, k: usize) -> Option<Vec<usize>> {
    if r == 0 {
        return Some(vec![0; k / 2]);
    }
    if k < 2 {
        return None;
    }
    let half = k / 2;
    let weight = |t: usize| if 2 * t == k { 1 } else { 2 };
    // Equal share for every other class when possible.
    if r.is_multiple_of(k - 1) {
        let u = r / (k - 1);
        return Some(vec![u; half]);
    }
    let mut plan = vec![0; half];
    let mut left = r;
    // Hand out units round-robin, two edges per symmetric offset.
    'outer: loop {
        let mut progressed = false;
        for t in 1..=half {
            let w = weight(t);
            if left >= w {
                plan[t - 1] += 1;
                left -= w;
                progressed = true;
            }
            if left == 0 {
                break 'outer;
            }
        }
        if !progressed {
            return None;
        }
    }
    Some(plan)
}

/// d-regular graph where every node has exactly `round(h·d)` same-class
/// neighbors. Nodes are ordered class-major (`c·m + i`). Same-class edges
/// form a circulant inside each class; cross-class edges are bipartite
/// circulants between class pairs.
pub fn gen_regular_homophily(cfg: &RegularConfig, seed: u64) -> Result<Dataset> {
    let (d, k, m) = (cfg.degree, cfg.num_classes, cfg.nodes_per_class);
    if !(0.0..=1.0).contains(&cfg.homophily) {
        return Err(Error::Construction(format!("homophily {} outside [0, 1]", cfg.homophily)));
    }
    if k == 0 || m == 0 {
        return Err(Error::Construction("need at least one class and one node per class".into()));
    }
    let s = same_class_degree(d, cfg.homophily);
    let r = d - s;
    if s > m - 1 || (s % 2 == 1 && m % 2 == 1) {
        return Err(Error::Construction(format!(
            "cannot give {s} same-class neighbors inside a class of {m} nodes"
        )));
    }
    let plan = inter_class_plan(r, k).ok_or_else(|| {
        Error::Construction(format!("cannot spread {r} cross-class edges over {k} classes"))
    })?;
    if plan.iter().any(|&u| u > m) {
        return Err(Error::Construction(format!(
            "class size {m} too small for the cross-class degree {r}"
        )));
    }

    let node = |c: usize, i: usize| c * m + (i % m);
    let mut edges = Vec::with_capacity(k * m * d / 2);
    for c in 0..k {
        for i in 0..m {
            for o in 1..=s / 2 {
                edges.push((node(c, i), node(c, i + o)));
            }
            if s % 2 == 1 && i < m / 2 {
                edges.push((node(c, i), node(c, i + m / 2)));
            }
        }
    }
    for (t, &u) in (1..).zip(&plan) {
        let classes = if 2 * t == k { 0..k / 2 } else { 0..k };
        for c in classes {
            let other = (c + t) % k;
            for i in 0..m {
                for j in 0..u {
                    edges.push((node(c, i), node(other, i + j)));
                }
            }
        }
    }
    let n = k * m;
    let graph = SparseGraph::from_edges(&edges, n)?;
    let labels: Vec<usize> = (0..n).map(|v| v / m).collect();
    for v in 0..n {
        let same = graph.neighbors(v).iter().filter(|&&w| labels[w as usize] == labels[v]).count();
        if graph.degree(v) != d || same != s {
            return Err(Error::Construction(format!(
                "wiring produced degree {} with {same} same-class neighbors at node {v}",
                graph.degree(v)
            )));
        }
    }

    let mut rng = RngStream::new(seed).fork(4);
    let mut features = DenseMatrix::zeros(n, k);
    if cfg.feature_noise > 0.0 {
        let normal = Normal::new(0.0, cfg.feature_noise)
            .map_err(|e| Error::Construction(e.to_string()))?;
        for x in features.as_mut_slice() {
            *x = normal.sample(&mut rng);
        }
    }
    for (v, &y) in labels.iter().enumerate() {
        let x = features.get(v, y);
        features.set(v, y, x + 1.0);
    }
    Dataset::new("regular", graph, features, labels, k)
}

/// Teacher row with mass `p` on `class` and the rest spread evenly.
pub(crate) fn teacher_row(class: usize, p: f64, k: usize) -> Vec<f64> {
    let rest = (1.0 - p) / (k - 1) as f64;
    (0..k).map(|c| if c == class { p } else { rest }).collect()
}

/// Synthetic teacher: node `star` (true class 0) gets `[q, (1−q)/(K−1), …]`,
/// exactly `round(ε(|V|−1))` other nodes predict a uniformly chosen wrong
/// class with probability `p`, and the rest predict their label with `p`.
pub fn synth_teacher_output(
    labels: &[usize],
    num_classes: usize,
    p: f64,
    epsilon: f64,
    q: f64,
    star: usize,
    rng: &mut RngStream,
) -> Result<ProbMatrix> {
    let k = num_classes;
    let n = labels.len();
    if k < 2 {
        return Err(Error::input("need at least two classes"));
    }
    let inv_k = 1.0 / k as f64;
    if !(p > inv_k && p <= 1.0) {
        return Err(Error::input(format!("p must be in (1/K, 1], got {p}")));
    }
    if !(q >= 0.0 && q < inv_k) {
        return Err(Error::input(format!("q must be in [0, 1/K), got {q}")));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::input(format!("epsilon must be in [0, 1), got {epsilon}")));
    }
    if star >= n || labels[star] != 0 {
        return Err(Error::input("star node must exist and have class 0"));
    }
    let others: Vec<usize> = (0..n).filter(|&i| i != star).collect();
    let flips = (epsilon * others.len() as f64).round() as usize;
    let mut predicted = labels.to_vec();
    for idx in sample(rng, others.len(), flips).iter() {
        let v = others[idx];
        let shift = rng.random_range(1..k);
        predicted[v] = (labels[v] + shift) % k;
    }
    probs_from_predictions(&predicted, k, p, star, q)
}

/// Builds the teacher matrix from per-node predicted classes.
pub(crate) fn probs_from_predictions(
    predicted: &[usize],
    k: usize,
    p: f64,
    star: usize,
    q: f64,
) -> Result<ProbMatrix> {
    let n = predicted.len();
    let mut values = Vec::with_capacity(n * k);
    for (v, &c) in predicted.iter().enumerate() {
        if v == star {
            let rest = (1.0 - q) / (k - 1) as f64;
            values.extend((0..k).map(|j| if j == 0 { q } else { rest }));
        } else {
            values.extend(teacher_row(c, p, k));
        }
    }
    ProbMatrix::new(DenseMatrix::new(n, k, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::homophily;

    #[test]
    fn split_counts_transductive_and_inductive() {
        let labels: Vec<usize> = (0..700).map(|i| i % 7).collect();
        let s = make_splits(&labels, 7, 3, &SplitConfig::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test_obs.len(), s.test_ind.len()), (140, 210, 350, 0));
        s.validate(700).unwrap();
        let cfg = SplitConfig {
            inductive: true,
            ..SplitConfig::default()
        };
        let s = make_splits(&labels, 7, 3, &cfg).unwrap();
        assert_eq!((s.test_ind.len(), s.test_obs.len()), (70, 280));
        s.validate(700).unwrap();
        assert_eq!(s, make_splits(&labels, 7, 3, &cfg).unwrap());
    }

    #[test]
    fn small_class_fallback_or_error() {
        let labels: Vec<usize> = (0..60).map(|i| usize::from(i >= 50)).collect();
        let s = make_splits(&labels, 2, 0, &SplitConfig::default()).unwrap();
        s.validate(60).unwrap();
        assert_eq!(s.train.len(), 20 + 2);
        let strict = SplitConfig {
            allow_fallback: false,
            ..SplitConfig::default()
        };
        assert!(matches!(make_splits(&labels, 2, 0, &strict), Err(Error::Split(_))));
    }

    #[test]
    fn inductive_edge_removal() {
        let cycle = SparseGraph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 0)], 4).unwrap();
        assert_eq!(remove_inductive_edges(&cycle, &[]), cycle);
        assert_eq!(remove_inductive_edges(&cycle, &[0, 1, 2, 3]).num_edges(), 0);
        let g = remove_inductive_edges(&cycle, &[0]);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(1, 2), (2, 3)]);
        assert_eq!(g.num_nodes(), 4);
    }

    #[test]
    fn chains_shape() {
        let c = gen_chains(&ChainsConfig::default(), 0).unwrap();
        assert_eq!(c.dataset.num_nodes(), 240);
        assert_eq!(c.dataset.graph.num_edges(), 210);
        assert_eq!(homophily(&c.dataset.graph, &c.dataset.labels).unwrap(), 1.0);
        assert_eq!(c.far_nodes.len(), 150);
        for chain in 0..30 {
            let far = c.far_nodes.iter().filter(|&&v| v / 8 == chain).count();
            assert_eq!(far, 5);
        }
        let nonzero: usize = c.dataset.features.as_slice().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nonzero, 30);
        c.split.validate(240).unwrap();
        let bad = ChainsConfig {
            num_chains: 31,
            ..ChainsConfig::default()
        };
        assert!(matches!(gen_chains(&bad, 0), Err(Error::Config(_))));
    }

    fn regular(d: usize, h: f64, k: usize, m: usize) -> Result<Dataset> {
        gen_regular_homophily(
            &RegularConfig {
                degree: d,
                homophily: h,
                num_classes: k,
                nodes_per_class: m,
                feature_noise: 0.0,
            },
            0,
        )
    }

    #[test]
    fn regular_extremes() {
        let ds = regular(2, 1.0, 1, 10).unwrap();
        assert_eq!(homophily(&ds.graph, &ds.labels).unwrap(), 1.0);
        let ds = regular(2, 0.0, 2, 10).unwrap();
        assert_eq!(homophily(&ds.graph, &ds.labels).unwrap(), 0.0);
        assert!(ds.graph.degrees().iter().all(|&x| x == 2));
    }

    #[test]
    fn regular_uneven_cross_class_split() {
        // r = 3 over 4 classes: one edge to each of c±1, one to c+2.
        let ds = regular(7, 4.0 / 7.0, 4, 12).unwrap();
        assert!(ds.graph.degrees().iter().all(|&x| x == 7));
        assert!(regular(3, 0.0, 3, 10).is_err());
        assert!(regular(12, 1.0, 2, 5).is_err());
    }

    #[test]
    fn synth_teacher_contract() {
        let labels: Vec<usize> = (0..501).map(|i| i % 5).collect();
        let mut rng = RngStream::new(1);
        let pt = synth_teacher_output(&labels, 5, 0.9, 0.1, 0.05, 0, &mut rng).unwrap();
        let flipped = (1..501).filter(|&i| pt.row(i)[labels[i]] != 0.9).count();
        assert_eq!(flipped, 50);
        for i in 0..501 {
            assert!((pt.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let clean = synth_teacher_output(&labels, 5, 0.9, 0.0, 0.05, 0, &mut rng).unwrap();
        assert!((1..501).all(|i| clean.row(i)[labels[i]] == 0.9));
        assert!(synth_teacher_output(&labels, 5, 0.1, 0.0, 0.05, 0, &mut rng).is_err());
        assert!(synth_teacher_output(&labels, 5, 0.9, 0.0, 0.3, 0, &mut rng).is_err());
        assert!(synth_teacher_output(&labels, 5, 0.9, 0.0, 0.05, 1, &mut rng).is_err());
    }
}
