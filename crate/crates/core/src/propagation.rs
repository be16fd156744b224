//! Propagation operators applied to class-probability matrices.
//!
//! The smoothing recursion is `P ← γ Ã P + (1 − γ) P`, i.e. repeated
//! application of `M = γÃ + (1 − γ)I`. It is not the restart-style APPNP
//! recursion: iterating it converges toward the dominant eigenvector of `Ã`,
//! not toward the PPR solution. [`ppr_exact`] is the PPR operator itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::matrix::DenseMatrix;

pub const DEFAULT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub gamma: f64,
    pub iterations: usize,
    pub floor: f64,
}

impl PropagationConfig {
    pub fn new(gamma: f64, iterations: usize) -> Result<Self> {
        let cfg = Self {
            gamma,
            iterations,
            floor: DEFAULT_FLOOR,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!("gamma must be in (0, 1], got {}", self.gamma)));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if !(self.floor > 0.0) {
            return Err(Error::config("floor must be positive"));
        }
        Ok(())
    }
}

/// Row-stochastic matrix: non-negative entries, rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix(DenseMatrix);

impl ProbMatrix {
    /// Wraps `m` after checking every row is a distribution within 1e−9.
    pub fn new(m: DenseMatrix) -> Result<Self> {
        for i in 0..m.rows() {
            let row = m.row(i);
            if row.iter().any(|&v| v < 0.0) {
                return Err(Error::input(format!("row {i} has negative probabilities")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::input(format!("row {i} sums to {s}, not 1")));
            }
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: DenseMatrix) -> Self {
        Self(m)
    }

    /// Row-wise softmax of `logits`.
    pub fn softmax(logits: &DenseMatrix) -> Self {
        let mut out = logits.clone();
        for i in 0..out.rows() {
            softmax_in_place(out.row_mut(i));
        }
        Self(out)
    }

    /// Callers must keep every row a distribution.
    pub(crate) fn matrix_mut(&mut self) -> &mut DenseMatrix {
        &mut self.0
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn check_input(p: &DenseMatrix, a: &NormalizedAdjacency) -> Result<()> {
    if p.rows() != a.num_nodes() {
        return Err(Error::input(format!(
            "matrix has {} rows, graph has {} nodes",
            p.rows(),
            a.num_nodes()
        )));
    }
    p.ensure_finite("propagation input")
}

fn smoothing_step(p: &DenseMatrix, a: &NormalizedAdjacency, gamma: f64) -> Result<DenseMatrix> {
    let mut next = a.apply(p)?;
    for (x, &v) in next.as_mut_slice().iter_mut().zip(p.as_slice()) {
        *x = gamma * *x + (1.0 - gamma) * v;
    }
    Ok(next)
}

/// `(γÃ + (1 − γ)I)^T · P` by `T` sparse applications.
pub fn propagate_pnd(
    p: &DenseMatrix,
    a: &NormalizedAdjacency,
    cfg: &PropagationConfig,
) -> Result<DenseMatrix> {
    cfg.validate()?;
    check_input(p, a)?;
    let mut cur = p.clone();
    for _ in 0..cfg.iterations {
        cur = smoothing_step(&cur, a, cfg.gamma)?;
    }
    Ok(cur)
}

/// Smoothing where the rows in `train_idx` are reset to their input values
/// after every step, so those rows of the output equal the input bit-for-bit.
pub fn propagate_pnd_fix(
    p: &DenseMatrix,
    a: &NormalizedAdjacency,
    cfg: &PropagationConfig,
    train_idx: &[usize],
) -> Result<DenseMatrix> {
    cfg.validate()?;
    check_input(p, a)?;
    if let Some(&bad) = train_idx.iter().find(|&&i| i >= p.rows()) {
        return Err(Error::input(format!(
            "pinned node {bad} out of range (0..{})",
            p.rows()
        )));
    }
    let mut cur = p.clone();
    for _ in 0..cfg.iterations {
        cur = smoothing_step(&cur, a, cfg.gamma)?;
        for &j in train_idx {
            cur.row_mut(j).copy_from_slice(p.row(j));
        }
    }
    Ok(cur)
}

/// Residual bound on `‖(I − γÃ)z − b‖₂` for each column solve.
pub const PPR_TOLERANCE: f64 = 1e-10;

/// Personalized PageRank `(1 − γ)(I − γÃ)^{-1} P`, solved column by column
/// with conjugate gradients (the system matrix is SPD for `0 < γ < 1`).
pub fn ppr_exact(p: &DenseMatrix, a: &NormalizedAdjacency, gamma: f64) -> Result<DenseMatrix> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::input(format!("PPR needs 0 < gamma < 1, got {gamma}")));
    }
    check_input(p, a)?;
    let n = p.rows();
    let max_iter = 10 * n.max(1);
    let mut out = DenseMatrix::zeros(n, p.cols());
    for c in 0..p.cols() {
        let b: Vec<f64> = (0..n).map(|i| p.get(i, c)).collect();
        let z = conjugate_gradient(a, gamma, &b, max_iter).map_err(|iters| {
            Error::Numeric(format!(
                "PPR conjugate gradient did not converge in {iters} iterations (column {c})"
            ))
        })?;
        for (i, zi) in z.into_iter().enumerate() {
            out.set(i, c, (1.0 - gamma) * zi);
        }
    }
    Ok(out)
}

/// `y = (I − γÃ) x`.
fn shifted_apply(a: &NormalizedAdjacency, gamma: f64, x: &[f64], y: &mut [f64]) {
    for (i, yi) in y.iter_mut().enumerate() {
        let ax: f64 = a.row(i).map(|(j, w)| w * x[j]).sum();
        *yi = x[i] - gamma * ax;
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn conjugate_gradient(
    a: &NormalizedAdjacency,
    gamma: f64,
    b: &[f64],
    max_iter: usize,
) -> std::result::Result<Vec<f64>, usize> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= PPR_TOLERANCE {
        return Ok(x);
    }
    for _ in 0..max_iter {
        shifted_apply(a, gamma, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= PPR_TOLERANCE {
            // Confirm against the true residual, the recurrence drifts.
            shifted_apply(a, gamma, &x, &mut ap);
            let true_rr: f64 = ap.iter().zip(b).map(|(y, bi)| (bi - y) * (bi - y)).sum();
            if true_rr.sqrt() <= PPR_TOLERANCE {
                return Ok(x);
            }
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            p.copy_from_slice(&r);
            rr = dot(&r, &r);
            continue;
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(max_iter)
}

/// `(2I − γÃ) P`. Entries may be negative.
pub fn inverse_propagate(p: &DenseMatrix, a: &NormalizedAdjacency, gamma: f64) -> Result<DenseMatrix> {
    if !gamma.is_finite() {
        return Err(Error::input("gamma must be finite"));
    }
    check_input(p, a)?;
    let mut out = a.apply(p)?;
    for (x, &v) in out.as_mut_slice().iter_mut().zip(p.as_slice()) {
        *x = 2.0 * v - gamma * *x;
    }
    Ok(out)
}

/// Clamps every entry to at least `floor`, then divides each row by its sum.
pub fn normalize_rows(p: &DenseMatrix, floor: f64) -> Result<ProbMatrix> {
    if !(floor > 0.0) {
        return Err(Error::input("floor must be positive"));
    }
    p.ensure_finite("normalize_rows input")?;
    let mut out = p.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = v.max(floor);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(ProbMatrix(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, normalized_adjacency};

    fn two_nodes() -> NormalizedAdjacency {
        normalized_adjacency(&build_graph(&[(0, 1)], 2).unwrap())
    }

    fn single() -> NormalizedAdjacency {
        normalized_adjacency(&build_graph(&[], 1).unwrap())
    }

    #[test]
    fn config_validation() {
        assert!(PropagationConfig::new(0.0, 1).is_err());
        assert!(PropagationConfig::new(1.5, 1).is_err());
        assert!(PropagationConfig::new(0.5, 0).is_err());
        assert!(PropagationConfig::new(1.0, 3).is_ok());
    }

    #[test]
    fn vanishing_gamma_is_identity() {
        let a = two_nodes();
        let p = DenseMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let out = propagate_pnd(&p, &a, &PropagationConfig::new(1e-15, 5).unwrap()).unwrap();
        assert!(out.max_abs_diff(&p).unwrap() < 1e-12);
    }

    #[test]
    fn single_node_unchanged() {
        let p = DenseMatrix::from_rows(&[vec![0.2, 0.8]]).unwrap();
        for (g, t) in [(0.3, 1), (0.9, 7), (1.0, 20)] {
            let out = propagate_pnd(&p, &single(), &PropagationConfig::new(g, t).unwrap()).unwrap();
            assert!(out.max_abs_diff(&p).unwrap() < 1e-15);
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut p = DenseMatrix::zeros(2, 2);
        p.as_mut_slice()[0] = f64::INFINITY;
        let cfg = PropagationConfig::new(0.5, 1).unwrap();
        assert!(propagate_pnd(&p, &two_nodes(), &cfg).is_err());
        assert!(propagate_pnd(&DenseMatrix::zeros(3, 2), &two_nodes(), &cfg).is_err());
    }

    #[test]
    fn fix_all_pinned_and_none_pinned() {
        let a = two_nodes();
        let p = DenseMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let cfg = PropagationConfig::new(0.9, 10).unwrap();
        assert_eq!(propagate_pnd_fix(&p, &a, &cfg, &[0, 1]).unwrap(), p);
        assert_eq!(
            propagate_pnd_fix(&p, &a, &cfg, &[]).unwrap(),
            propagate_pnd(&p, &a, &cfg).unwrap()
        );
        assert!(propagate_pnd_fix(&p, &a, &cfg, &[2]).is_err());
    }

    #[test]
    fn ppr_two_node_hand_inverse() {
        // I − ½Ã = [[¾, −¼], [−¼, ¾]] has inverse [[3/2, ½], [½, 3/2]].
        let out = ppr_exact(&DenseMatrix::identity(2), &two_nodes(), 0.5).unwrap();
        let expect = [0.75, 0.25, 0.25, 0.75];
        for (x, e) in out.as_slice().iter().zip(expect) {
            assert!((x - e).abs() < 1e-12);
        }
    }

    #[test]
    fn ppr_single_node_and_bad_gamma() {
        let p = DenseMatrix::from_rows(&[vec![0.25, 0.75]]).unwrap();
        let out = ppr_exact(&p, &single(), 0.8).unwrap();
        assert!(out.max_abs_diff(&p).unwrap() < 1e-12);
        assert!(ppr_exact(&p, &single(), 1.0).is_err());
        assert!(ppr_exact(&p, &single(), 0.0).is_err());
    }

    #[test]
    fn inverse_propagate_cases() {
        let a = two_nodes();
        let p = DenseMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let out = inverse_propagate(&p, &a, 0.0).unwrap();
        let mut twice = p.clone();
        twice.scale(2.0);
        assert_eq!(out, twice);

        let q = DenseMatrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        assert_eq!(inverse_propagate(&q, &single(), 1.0).unwrap(), q);
    }

    #[test]
    fn normalize_rows_cases() {
        let p = DenseMatrix::from_rows(&[vec![0.3, 0.7]]).unwrap();
        let n = normalize_rows(&p, 1e-8).unwrap();
        assert!(n.matrix().max_abs_diff(&p).unwrap() <= 1e-15);

        let neg = DenseMatrix::from_rows(&[vec![-0.2, 1.0]]).unwrap();
        let n = normalize_rows(&neg, 1e-8).unwrap();
        let s = 1.0 + 1e-8;
        assert!((n.row(0)[0] - 1e-8 / s).abs() < 1e-20);
        assert!((n.row(0)[1] - 1.0 / s).abs() < 1e-15);

        let flat = DenseMatrix::from_rows(&[vec![2.0, 2.0]]).unwrap();
        assert_eq!(normalize_rows(&flat, 1e-8).unwrap().row(0), &[0.5, 0.5]);
        assert!(normalize_rows(&flat, 0.0).is_err());
    }

    #[test]
    fn prob_matrix_validation() {
        assert!(ProbMatrix::new(DenseMatrix::from_rows(&[vec![0.5, 0.6]]).unwrap()).is_err());
        assert!(ProbMatrix::new(DenseMatrix::from_rows(&[vec![-0.1, 1.1]]).unwrap()).is_err());
        let s = ProbMatrix::softmax(&DenseMatrix::from_rows(&[vec![1000.0, 1000.0]]).unwrap());
        assert_eq!(s.row(0), &[0.5, 0.5]);
    }
}
