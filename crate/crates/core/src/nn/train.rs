//! Shared training-loop helpers.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::RngStream;

/// Fraction of `idx` whose row argmax (lowest class on ties) equals the label.
pub fn accuracy(logits: &DenseMatrix, labels: &[usize], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::input("accuracy over an empty index set"));
    }
    let mut hits = 0usize;
    for &i in idx {
        if i >= logits.rows() || i >= labels.len() {
            return Err(Error::input(format!("node {i} out of range")));
        }
        let row = logits.row(i);
        let mut best = 0;
        for (c, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = c;
            }
        }
        if best == labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / idx.len() as f64)
}

/// Tracks the best validation score. Only a strictly better score counts as
/// an improvement, so ties keep the earliest epoch.
#[derive(Debug, Clone)]
pub struct EarlyStopping<S> {
    patience: usize,
    best_score: f64,
    best_epoch: usize,
    best_state: Option<S>,
}

impl<S: Clone> EarlyStopping<S> {
    pub fn new(patience: usize) -> Result<Self> {
        if patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        Ok(Self {
            patience,
            best_score: f64::NEG_INFINITY,
            best_epoch: 0,
            best_state: None,
        })
    }

    /// Records `score` for `epoch`; returns `true` when training should stop.
    pub fn observe(&mut self, epoch: usize, score: f64, state: &S) -> bool {
        if score > self.best_score {
            self.best_score = score;
            self.best_epoch = epoch;
            self.best_state = Some(state.clone());
            false
        } else {
            epoch - self.best_epoch >= self.patience
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_score(&self) -> f64 {
        self.best_score
    }

    pub fn into_best(self) -> Option<S> {
        self.best_state
    }
}

/// Splits `rows` into shuffled batches of `batch_size`, or one batch holding
/// every row in order when `batch_size` is `None`.
pub fn batches(rows: &[usize], batch_size: Option<usize>, rng: &mut RngStream) -> Vec<Vec<usize>> {
    match batch_size {
        Some(b) if b > 0 && b < rows.len() => {
            let mut order = rows.to_vec();
            order.shuffle(rng);
            order.chunks(b).map(<[usize]>::to_vec).collect()
        }
        _ => vec![rows.to_vec()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_cases() {
        let perfect = DenseMatrix::from_rows(&[vec![5.0, 0.0], vec![0.0, 5.0]]).unwrap();
        assert_eq!(accuracy(&perfect, &[0, 1], &[0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&perfect, &[1, 0], &[0, 1]).unwrap(), 0.0);
        let tie = DenseMatrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![0.0, 2.0, 2.0], vec![3.0, 0.0, 3.0]])
            .unwrap();
        assert_eq!(accuracy(&tie, &[0, 1, 0], &[0, 1, 2]).unwrap(), 1.0);
        assert!(accuracy(&tie, &[0, 1, 0], &[]).is_err());
    }

    #[test]
    fn early_stopping_keeps_earliest_tie() {
        let mut es = EarlyStopping::new(2).unwrap();
        assert!(!es.observe(1, 0.5, &1));
        assert!(!es.observe(2, 0.7, &2));
        assert!(!es.observe(3, 0.7, &3));
        assert!(es.observe(4, 0.6, &4));
        assert_eq!(es.best_epoch(), 2);
        assert_eq!(es.into_best(), Some(2));
    }

    #[test]
    fn full_batch_keeps_order() {
        let rows = [4, 1, 3];
        let b = batches(&rows, None, &mut RngStream::new(0));
        assert_eq!(b, vec![vec![4, 1, 3]]);
        let b = batches(&rows, Some(2), &mut RngStream::new(0));
        assert_eq!(b.len(), 2);
    }
}
