//! Dense reference implementations built directly from edge lists with
//! nalgebra, sharing no code with the sparse operators under test.

#![allow(dead_code)]

use nalgebra::DMatrix;
use pnd_core::graph::build_graph;
use pnd_core::{DenseMatrix, RngStream, SparseGraph};
use rand::Rng;

pub struct RandomGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub graph: SparseGraph,
}

/// Erdős–Rényi-style graph on `n` nodes with edge probability `p`; may
/// contain isolated nodes, which the operators must handle.
pub fn random_graph(n: usize, p: f64, rng: &mut RngStream) -> RandomGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let graph = build_graph(&edges, n).expect("valid edges");
    RandomGraph { n, edges, graph }
}

/// `D̂^{-1/2}(A + I)D̂^{-1/2}` from the raw edge list.
pub fn dense_normalized(n: usize, edges: &[(usize, usize)]) -> DMatrix<f64> {
    let mut a = DMatrix::<f64>::identity(n, n);
    for &(u, v) in edges {
        if u != v {
            a[(u, v)] = 1.0;
            a[(v, u)] = 1.0;
        }
    }
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (d[i] * d[j]).sqrt())
}

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn max_diff(a: &DenseMatrix, b: &DMatrix<f64>) -> f64 {
    assert_eq!((a.rows(), a.cols()), b.shape());
    let mut worst: f64 = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            worst = worst.max((a.get(i, j) - b[(i, j)]).abs());
        }
    }
    worst
}

/// Row-stochastic random matrix.
pub fn random_probs(n: usize, k: usize, rng: &mut RngStream) -> DenseMatrix {
    let mut v = Vec::with_capacity(n * k);
    for _ in 0..n {
        let row: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = row.iter().sum();
        v.extend(row.into_iter().map(|x| x / s));
    }
    DenseMatrix::new(n, k, v).unwrap()
}

pub fn random_matrix(n: usize, k: usize, rng: &mut RngStream) -> DenseMatrix {
    let v = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::new(n, k, v).unwrap()
}

pub fn oracle_pnd(a: &DMatrix<f64>, p: &DMatrix<f64>, gamma: f64, t: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let m = a * gamma + DMatrix::identity(n, n) * (1.0 - gamma);
    let mut cur = p.clone();
    for _ in 0..t {
        cur = &m * cur;
    }
    cur
}

pub fn oracle_pnd_fix(a: &DMatrix<f64>, p: &DMatrix<f64>, gamma: f64, t: usize, fixed: &[usize]) -> DMatrix<f64> {
    let n = a.nrows();
    let m = a * gamma + DMatrix::identity(n, n) * (1.0 - gamma);
    let mut cur = p.clone();
    for _ in 0..t {
        cur = &m * cur;
        for &i in fixed {
            cur.set_row(i, &p.row(i));
        }
    }
    cur
}

pub fn oracle_inverse(a: &DMatrix<f64>, p: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    p * 2.0 - a * p * gamma
}

pub fn oracle_ppr(a: &DMatrix<f64>, p: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let sys = DMatrix::identity(n, n) - a * gamma;
    sys.lu().solve(p).expect("I - γÃ is nonsingular") * (1.0 - gamma)
}

/// `tr(Fᵀ(I − Ã)F)` with dense matrices.
pub fn oracle_energy(a: &DMatrix<f64>, f: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let l = DMatrix::identity(n, n) - a;
    (f.transpose() * l * f).trace()
}
