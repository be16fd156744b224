//! Undirected graphs in CSR form and the normalized propagation operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Undirected, unweighted graph. Each edge is stored in both directions,
/// neighbor lists are strictly increasing and self-loops are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseGraph {
    num_nodes: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
}

impl SparseGraph {
    /// Builds a graph from an edge list. Duplicates and both orientations are
    /// tolerated; self-loops are dropped.
    pub fn from_edges(edges: &[(usize, usize)], num_nodes: usize) -> Result<Self> {
        if num_nodes > u32::MAX as usize {
            return Err(Error::input("too many nodes for 32-bit ids"));
        }
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::input(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u == v {
                continue;
            }
            adj[u].push(v as u32);
            adj[v].push(u as u32);
        }
        let mut row_ptr = Vec::with_capacity(num_nodes + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut nbrs in adj {
            nbrs.sort_unstable();
            nbrs.dedup();
            col_idx.extend_from_slice(&nbrs);
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            num_nodes,
            row_ptr,
            col_idx,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col_idx.len() / 2
    }

    /// Number of stored (directed) CSR entries, twice the edge count.
    pub fn num_entries(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes).map(|i| self.degree(i)).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes && v < self.num_nodes && self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .map(|&v| v as usize)
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Copy of the graph keeping only edges for which `keep(u, v)` holds.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let edges: Vec<_> = self.edges().filter(|&(u, v)| keep(u, v)).collect();
        Self::from_edges(&edges, self.num_nodes).expect("edges come from a valid graph")
    }
}

/// Convenience wrapper matching the edge-list constructor.
pub fn build_graph(edges: &[(usize, usize)], num_nodes: usize) -> Result<SparseGraph> {
    SparseGraph::from_edges(edges, num_nodes)
}

/// Symmetrically normalized adjacency in CSR form with per-entry weights.
///
/// Built either GCN-style as `D̂^{-1/2}(A+I)D̂^{-1/2}` with `D̂ = D+I`
/// ([`normalized_adjacency`]) or without self-loops as `D^{-1/2}AD^{-1/2}`
/// ([`normalized_adjacency_no_self_loops`]).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    num_nodes: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    weights: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Entries of row `i` as `(column, weight)` in ascending column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .zip(&self.weights[r])
            .map(|(&c, &w)| (c as usize, w))
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.weights[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// Dense copy; only sensible for small graphs.
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.num_nodes;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for (j, w) in self.row(i) {
                m.set(i, j, w);
            }
        }
        m
    }

    fn check_rows(&self, p: &DenseMatrix) -> Result<()> {
        if p.rows() != self.num_nodes {
            return Err(Error::input(format!(
                "operator has {} nodes but matrix has {} rows",
                self.num_nodes,
                p.rows()
            )));
        }
        Ok(())
    }

    /// `(Ã P)[i, :]` for a single row.
    pub fn apply_row(&self, i: usize, p: &DenseMatrix) -> Result<Vec<f64>> {
        self.check_rows(p)?;
        let mut out = vec![0.0; p.cols()];
        for (j, w) in self.row(i) {
            for (o, v) in out.iter_mut().zip(p.row(j)) {
                *o += w * v;
            }
        }
        Ok(out)
    }

    /// Sparse-dense product `Ã P`. Each output row is accumulated in ascending
    /// column order, so the result does not depend on scheduling.
    pub fn apply(&self, p: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_rows(p)?;
        let c = p.cols();
        let mut out = vec![0.0; self.num_nodes * c];
        for i in 0..self.num_nodes {
            let o = &mut out[i * c..(i + 1) * c];
            for (j, w) in self.row(i) {
                for (x, v) in o.iter_mut().zip(p.row(j)) {
                    *x += w * v;
                }
            }
        }
        Ok(DenseMatrix::from_vec_unchecked(self.num_nodes, c, out))
    }
}

fn normalize(g: &SparseGraph, self_loops: bool) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let shift = usize::from(self_loops);
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(g.num_entries() + if self_loops { n } else { 0 });
    let mut weights = Vec::with_capacity(col_idx.capacity());
    row_ptr.push(0);
    for i in 0..n {
        let di = (g.degree(i) + shift) as f64;
        let mut diag_done = !self_loops;
        for &j in g.neighbors(i) {
            let j = j as usize;
            if !diag_done && j > i {
                col_idx.push(i as u32);
                weights.push(1.0 / di);
                diag_done = true;
            }
            let dj = (g.degree(j) + shift) as f64;
            col_idx.push(j as u32);
            // Product of integers first so (i,j) and (j,i) round identically.
            weights.push(1.0 / (di * dj).sqrt());
        }
        if !diag_done {
            col_idx.push(i as u32);
            weights.push(1.0 / di);
        }
        row_ptr.push(col_idx.len());
    }
    NormalizedAdjacency {
        num_nodes: n,
        row_ptr,
        col_idx,
        weights,
    }
}

/// `Ã = D̂^{-1/2}(A+I)D̂^{-1/2}` with `D̂ = D + I`.
pub fn normalized_adjacency(g: &SparseGraph) -> NormalizedAdjacency {
    normalize(g, true)
}

/// `D^{-1/2} A D^{-1/2}` without self-loops; isolated nodes get empty rows.
pub fn normalized_adjacency_no_self_loops(g: &SparseGraph) -> NormalizedAdjacency {
    normalize(g, false)
}

/// `Ã P`.
pub fn apply_operator(m: &NormalizedAdjacency, p: &DenseMatrix) -> Result<DenseMatrix> {
    m.apply(p)
}

/// Fraction of undirected edges whose endpoints share a label.
pub fn homophily(g: &SparseGraph, labels: &[usize]) -> Result<f64> {
    if labels.len() != g.num_nodes() {
        return Err(Error::input(format!(
            "{} labels for {} nodes",
            labels.len(),
            g.num_nodes()
        )));
    }
    if g.num_edges() == 0 {
        return Err(Error::UndefinedMetric("homophily of an edgeless graph".into()));
    }
    let same = g.edges().filter(|&(u, v)| labels[u] == labels[v]).count();
    Ok(same as f64 / g.num_edges() as f64)
}

/// `tr(Fᵀ (I − Ã) F)` without forming the Laplacian.
pub fn dirichlet_energy(f: &DenseMatrix, a: &NormalizedAdjacency) -> Result<f64> {
    let af = a.apply(f)?;
    let mut total = 0.0;
    for i in 0..f.rows() {
        let fi = f.row(i);
        let ai = af.row(i);
        total += fi.iter().zip(ai).map(|(x, y)| x * (x - y)).sum::<f64>();
    }
    Ok(total)
}
