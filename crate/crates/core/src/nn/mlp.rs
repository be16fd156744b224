use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::RngStream;

/// Dense affine layer `h ↦ h·W + b` with `W` of shape in×out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: DenseMatrix::zeros(input, output),
            bias: vec![0.0; output],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(input: usize, output: usize, rng: &mut RngStream) -> Self {
        let mut layer = Self::zeros(input, output);
        glorot_fill(&mut layer.weight, rng);
        layer
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub(crate) fn forward(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = h.matmul(&self.weight)?;
        out.add_row_vector(&self.bias)?;
        Ok(out)
    }
}

pub(crate) fn glorot_fill(w: &mut DenseMatrix, rng: &mut RngStream) {
    let bound = (6.0 / (w.rows() + w.cols()) as f64).sqrt();
    for v in w.as_mut_slice() {
        *v = rng.random_range(-bound..=bound);
    }
}

pub(crate) fn relu_in_place(m: &mut DenseMatrix) {
    for v in m.as_mut_slice() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Inverted dropout. Returns the per-entry scale mask (0 or 1/(1−rate)).
pub(crate) fn dropout_in_place(m: &mut DenseMatrix, rate: f64, rng: &mut RngStream) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    let mut mask = Vec::with_capacity(m.as_slice().len());
    for v in m.as_mut_slice() {
        let s = if rng.random::<f64>() < rate { 0.0 } else { keep };
        *v *= s;
        mask.push(s);
    }
    mask
}

/// Multi-layer perceptron with ReLU between layers and dropout on hidden
/// activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layers: Vec<Linear>,
    dropout: f64,
}

/// Per-hidden-layer record kept for the backward pass.
#[derive(Debug, Clone)]
pub struct HiddenRecord {
    /// Pre-activation values.
    pub pre: DenseMatrix,
    /// Post-ReLU, post-dropout values fed into the next layer.
    pub out: DenseMatrix,
    pub mask: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MlpCache<'a> {
    input: &'a DenseMatrix,
    hidden: Vec<HiddenRecord>,
}

impl MlpCache<'_> {
    pub fn hidden(&self) -> &[HiddenRecord] {
        &self.hidden
    }

    /// Sign pattern of every hidden pre-activation, used to spot kinks.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.hidden
            .iter()
            .flat_map(|h| h.pre.as_slice().iter().map(|&v| v > 0.0))
            .collect()
    }
}

impl MlpModel {
    /// Glorot-initialised model with layer widths `dims` (input first).
    pub fn new(dims: &[usize], dropout: f64, rng: &mut RngStream) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::config("an MLP needs at least input and output dims"));
        }
        if dims.contains(&0) {
            return Err(Error::config("layer widths must be positive"));
        }
        let layers = dims
            .windows(2)
            .map(|w| Linear::glorot(w[0], w[1], rng))
            .collect();
        Self::from_layers(layers, dropout)
    }

    pub fn from_layers(layers: Vec<Linear>, dropout: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::config(format!("dropout must be in [0, 1), got {dropout}")));
        }
        if layers.is_empty() {
            return Err(Error::config("an MLP needs at least one layer"));
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::config("layer dims do not chain"));
            }
        }
        for l in &layers {
            if l.bias.len() != l.out_dim() {
                return Err(Error::config("bias length does not match layer width"));
            }
        }
        Ok(Self { layers, dropout })
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Forward pass. Dropout is only active when `train_mode` is set and the
    /// rate is positive; `rng` is untouched otherwise.
    pub fn forward<'a>(
        &self,
        x: &'a DenseMatrix,
        train_mode: bool,
        rng: &mut RngStream,
    ) -> Result<(DenseMatrix, MlpCache<'a>)> {
        if x.cols() != self.in_dim() {
            return Err(Error::input(format!(
                "features have {} columns, model expects {}",
                x.cols(),
                self.in_dim()
            )));
        }
        let mut hidden: Vec<HiddenRecord> = Vec::with_capacity(self.layers.len() - 1);
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            let pre = match hidden.last() {
                None => layer.forward(x)?,
                Some(prev) => layer.forward(&prev.out)?,
            };
            let mut out = pre.clone();
            relu_in_place(&mut out);
            let mask = (train_mode && self.dropout > 0.0)
                .then(|| dropout_in_place(&mut out, self.dropout, rng));
            hidden.push(HiddenRecord { pre, out, mask });
        }
        let h = if last == 0 { x } else { &hidden[last - 1].out };
        let logits = self.layers[last].forward(h)?;
        Ok((logits, MlpCache { input: x, hidden }))
    }

    /// Analytic gradients in the order of [`Self::param_slices`].
    pub fn backprop(&self, cache: &MlpCache<'_>, grad_logits: &DenseMatrix) -> Result<Vec<Vec<f64>>> {
        let n = cache.input.rows();
        if grad_logits.shape() != (n, self.out_dim()) || cache.hidden.len() + 1 != self.layers.len() {
            return Err(Error::input("gradient or cache shape does not match model"));
        }
        let mut grads = vec![Vec::new(); 2 * self.layers.len()];
        let mut g = grad_logits.clone();
        for l in (0..self.layers.len()).rev() {
            let h = if l == 0 { cache.input } else { &cache.hidden[l - 1].out };
            grads[2 * l] = h.t_matmul(&g)?.into_vec();
            grads[2 * l + 1] = g.column_sums();
            if l == 0 {
                break;
            }
            let mut gh = g.matmul_t(&self.layers[l].weight)?;
            let rec = &cache.hidden[l - 1];
            let gs = gh.as_mut_slice();
            if let Some(mask) = &rec.mask {
                gs.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
            }
            gs.iter_mut()
                .zip(rec.pre.as_slice())
                .for_each(|(v, &p)| {
                    if p <= 0.0 {
                        *v = 0.0;
                    }
                });
            g = gh;
        }
        Ok(grads)
    }

    /// Eval-mode logits.
    pub fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut dummy = RngStream::new(0);
        Ok(self.forward(x, false, &mut dummy)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_x(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = RngStream::new(seed);
        let v = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseMatrix::new(rows, cols, v).unwrap()
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let m = MlpModel::from_layers(vec![Linear::zeros(3, 4), Linear::zeros(4, 2)], 0.5).unwrap();
        let x = random_x(5, 3, 1);
        let (logits, _) = m.forward(&x, true, &mut RngStream::new(0)).unwrap();
        assert!(logits.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_single_layer() {
        let layer = Linear {
            weight: DenseMatrix::identity(3),
            bias: vec![0.0; 3],
        };
        let m = MlpModel::from_layers(vec![layer], 0.0).unwrap();
        let x = random_x(4, 3, 2);
        assert_eq!(m.predict(&x).unwrap(), x);
    }

    #[test]
    fn no_dropout_train_equals_eval() {
        let mut rng = RngStream::new(9);
        let m = MlpModel::new(&[6, 8, 3], 0.0, &mut rng).unwrap();
        let x = random_x(7, 6, 3);
        let (a, _) = m.forward(&x, true, &mut RngStream::new(1)).unwrap();
        let (b, _) = m.forward(&x, false, &mut RngStream::new(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dim_mismatch_is_input_error() {
        let m = MlpModel::new(&[6, 3], 0.0, &mut RngStream::new(0)).unwrap();
        assert!(matches!(m.predict(&random_x(2, 5, 0)), Err(Error::Input(_))));
    }

    #[test]
    fn zero_upstream_gradient() {
        let m = MlpModel::new(&[4, 5, 3], 0.3, &mut RngStream::new(4)).unwrap();
        let x = random_x(6, 4, 5);
        let (_, cache) = m.forward(&x, true, &mut RngStream::new(6)).unwrap();
        let grads = m.backprop(&cache, &DenseMatrix::zeros(6, 3)).unwrap();
        assert!(grads.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn linear_sum_of_logits_gradient() {
        let m = MlpModel::new(&[3, 2], 0.0, &mut RngStream::new(4)).unwrap();
        let x = random_x(5, 3, 7);
        let (_, cache) = m.forward(&x, false, &mut RngStream::new(0)).unwrap();
        let ones = DenseMatrix::new(5, 2, vec![1.0; 10]).unwrap();
        let grads = m.backprop(&cache, &ones).unwrap();
        let col = x.column_sums();
        for i in 0..3 {
            for j in 0..2 {
                assert!((grads[0][i * 2 + j] - col[i]).abs() < 1e-12);
            }
        }
        assert_eq!(grads[1], vec![5.0, 5.0]);
    }

    #[test]
    fn dropout_zeroes_and_rescales() {
        let m = MlpModel::new(&[4, 200, 2], 0.5, &mut RngStream::new(1)).unwrap();
        let x = random_x(3, 4, 1);
        let (_, cache) = m.forward(&x, true, &mut RngStream::new(2)).unwrap();
        let mask = cache.hidden()[0].mask.as_ref().unwrap();
        assert!(mask.iter().all(|&s| s == 0.0 || s == 2.0));
        let dropped = mask.iter().filter(|&&s| s == 0.0).count();
        assert!(dropped > 200 && dropped < 400);
    }
}
