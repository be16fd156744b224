//! Softmax-based losses. Both return the mean loss over `rows` together
//! with the gradient w.r.t. the full logits matrix (zero outside `rows`).

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::propagation::{softmax_in_place, ProbMatrix};

/// Numerically stable log-softmax of one row.
pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    row.iter().map(|v| v - lse).collect()
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let mut out = row.to_vec();
    softmax_in_place(&mut out);
    out
}

fn check_rows(logits: &DenseMatrix, rows: &[usize]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::input("loss over an empty row set"));
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= logits.rows()) {
        return Err(Error::input(format!("loss row {r} out of range ({} rows)", logits.rows())));
    }
    Ok(())
}

/// Mean over `rows` of `KL(target ‖ softmax(logits))`.
pub fn kl_loss(logits: &DenseMatrix, target: &ProbMatrix, rows: &[usize]) -> Result<(f64, DenseMatrix)> {
    if logits.shape() != target.matrix().shape() {
        return Err(Error::input(format!(
            "logits {:?} and target {:?} differ in shape",
            logits.shape(),
            target.matrix().shape()
        )));
    }
    check_rows(logits, rows)?;
    let scale = 1.0 / rows.len() as f64;
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for &i in rows {
        let t = target.row(i);
        let ls = log_softmax(logits.row(i));
        for (c, (&tc, &lc)) in t.iter().zip(&ls).enumerate() {
            if tc > 0.0 {
                loss += tc * (tc.ln() - lc);
            }
            grad.set(i, c, (lc.exp() - tc) * scale);
        }
    }
    Ok((loss * scale, grad))
}

/// Mean cross-entropy of `logits` against integer `labels` over `rows`.
pub fn ce_loss(logits: &DenseMatrix, labels: &[usize], rows: &[usize]) -> Result<(f64, DenseMatrix)> {
    if labels.len() != logits.rows() {
        return Err(Error::input("label count does not match logits rows"));
    }
    check_rows(logits, rows)?;
    let k = logits.cols();
    let scale = 1.0 / rows.len() as f64;
    let mut grad = DenseMatrix::zeros(logits.rows(), k);
    let mut loss = 0.0;
    for &i in rows {
        let y = labels[i];
        if y >= k {
            return Err(Error::input(format!("label {y} out of range for {k} classes")));
        }
        let ls = log_softmax(logits.row(i));
        loss -= ls[y];
        for (c, &lc) in ls.iter().enumerate() {
            let onehot = if c == y { 1.0 } else { 0.0 };
            grad.set(i, c, (lc.exp() - onehot) * scale);
        }
    }
    Ok((loss * scale, grad))
}
