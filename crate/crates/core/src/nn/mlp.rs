//! ReLU multilayer perceptrons.

use rand::Rng;

use super::matrix::Matrix;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// One affine layer: `y = x·W + b` with `W` shaped `(in, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Matrix,
}

/// A fully connected network with ReLU hidden layers and a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    layers: Vec<Dense>,
}

/// Tape handles for the parameters of one network forward pass.
#[derive(Debug, Clone)]
pub struct ParamVars {
    vars: Vec<(Var, Var)>,
}

impl ParamVars {
    /// Reads the parameter adjoints off a tape after `backward`.
    pub fn grads(&self, tape: &Tape) -> MlpGrads {
        MlpGrads {
            layers: self.vars.iter().map(|&(w, b)| (tape.grad(w), tape.grad(b))).collect(),
        }
    }
}

/// Gradient of a scalar loss with respect to every parameter of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<(Matrix, Matrix)>,
}

impl MlpGrads {
    pub fn zeros_like(model: &Mlp) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| {
                    (
                        Matrix::zeros(l.weight.rows(), l.weight.cols()),
                        Matrix::zeros(1, l.bias.cols()),
                    )
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|(w, b)| w.is_finite() && b.is_finite())
    }

    /// All components in parameter order (layer by layer, weight then bias).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.flatten().iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Mlp {
    /// Random network with weights and biases uniform in `±1/√fan_in`.
    pub fn new<R: Rng + ?Sized>(layer_dims: &[usize], rng: &mut R) -> Result<Self> {
        validate_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut sample = || rng.random_range(-bound..bound);
                let weight: Vec<f64> = (0..fan_in * fan_out).map(|_| sample()).collect();
                let bias: Vec<f64> = (0..fan_out).map(|_| sample()).collect();
                Dense {
                    weight: Matrix::from_vec(fan_in, fan_out, weight).expect("sized above"),
                    bias: Matrix::from_vec(1, fan_out, bias).expect("sized above"),
                }
            })
            .collect();
        Ok(Self { dims: layer_dims.to_vec(), layers })
    }

    /// Network with every parameter zero.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        validate_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| Dense { weight: Matrix::zeros(w[0], w[1]), bias: Matrix::zeros(1, w[1]) })
            .collect();
        Ok(Self { dims: layer_dims.to_vec(), layers })
    }

    /// Assembles a network from explicit layers, checking shape consistency.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::InvalidConfig("no layers".into()))?;
        let mut dims = vec![first.weight.rows()];
        for l in &layers {
            let expected = *dims.last().unwrap();
            if l.weight.rows() != expected {
                return Err(Error::DimensionMismatch { expected, got: l.weight.rows() });
            }
            if l.bias.shape() != (1, l.weight.cols()) {
                return Err(Error::DimensionMismatch { expected: l.weight.cols(), got: l.bias.len() });
            }
            if !(l.weight.is_finite() && l.bias.is_finite()) {
                return Err(Error::NonFinite("layer parameters".into()));
            }
            dims.push(l.weight.cols());
        }
        validate_dims(&dims)?;
        Ok(Self { dims, layers })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer, weight (row-major) then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(l.bias.as_slice());
        }
        out
    }

    /// Overwrites every parameter from a flat slice in [`Mlp::flat_params`] order.
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch { expected: self.num_params(), got: flat.len() });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            for m in [&mut l.weight, &mut l.bias] {
                let n = m.len();
                m.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
                offset += n;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.is_finite() && l.bias.is_finite())
    }

    /// Batched forward pass: `(n, input_dim) -> (n, output_dim)`.
    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: input.cols() });
        }
        let last = self.layers.len() - 1;
        let mut h = input.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&l.weight);
            let bias = l.bias.as_slice();
            let relu = i < last;
            for r in 0..z.rows() {
                for (x, b) in z.row_mut(r).iter_mut().zip(bias) {
                    *x += b;
                    if relu && *x <= 0.0 {
                        *x = 0.0;
                    }
                }
            }
            h = z;
        }
        Ok(h)
    }

    /// Forward pass for a single input vector.
    pub fn forward_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(&Matrix::row_vector(input))?.into_vec())
    }

    /// Records a forward pass on `tape`, registering the parameters as leaves.
    pub fn forward_tape(&self, tape: &mut Tape, input: Var) -> (Var, ParamVars) {
        assert_eq!(tape.value(input).cols(), self.input_dim(), "input width mismatch");
        let last = self.layers.len() - 1;
        let mut vars = Vec::with_capacity(self.layers.len());
        let mut h = input;
        for (i, l) in self.layers.iter().enumerate() {
            let w = tape.leaf(l.weight.clone());
            let b = tape.leaf(l.bias.clone());
            let z = tape.matmul(h, w);
            let z = tape.add_row(z, b);
            h = if i < last { tape.relu(z) } else { z };
            vars.push((w, b));
        }
        (h, ParamVars { vars })
    }

    /// Mean squared error of the network on `(inputs, targets)` and its gradient.
    ///
    /// The loss averages over every output element. Parameters are not touched.
    pub fn mse_grad(&self, inputs: &Matrix, targets: &Matrix) -> Result<(f64, MlpGrads)> {
        if inputs.rows() == 0 {
            return Err(Error::EmptyBatch);
        }
        if inputs.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: inputs.cols() });
        }
        if targets.shape() != (inputs.rows(), self.output_dim()) {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows() * self.output_dim(),
                got: targets.len(),
            });
        }
        let mut tape = Tape::new();
        let x = tape.leaf(inputs.clone());
        let t = tape.leaf(targets.clone());
        let (y, params) = self.forward_tape(&mut tape, x);
        let r = tape.sub(y, t);
        let sq = tape.square(r);
        let loss = tape.mean(sq);
        let loss_value = tape.value(loss).get(0, 0);
        if !loss_value.is_finite() {
            return Err(Error::NonFinite(format!("mse loss = {loss_value}")));
        }
        tape.backward(loss);
        let grads = params.grads(&tape);
        if !grads.is_finite() {
            return Err(Error::NonFinite("mse gradient".into()));
        }
        Ok((loss_value, grads))
    }

    /// `self ← τ·online + (1−τ)·self`, elementwise.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if self.dims != online.dims {
            return Err(Error::ArchitectureMismatch {
                target: self.dims.clone(),
                online: online.dims.clone(),
            });
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidConfig(format!("soft update rate {tau} outside [0, 1]")));
        }
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            for (tm, om) in [(&mut t.weight, &o.weight), (&mut t.bias, &o.bias)] {
                for (x, &y) in tm.as_mut_slice().iter_mut().zip(om.as_slice()) {
                    *x = if tau == 1.0 { y } else { tau * y + (1.0 - tau) * *x };
                }
            }
        }
        Ok(())
    }
}

/// Returns a copy of `target` moved toward `online` by rate `tau`.
pub fn soft_update(target: &Mlp, online: &Mlp, tau: f64) -> Result<Mlp> {
    let mut out = target.clone();
    out.soft_update_from(online, tau)?;
    Ok(out)
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::InvalidConfig(format!("layer dims {dims:?} must have >= 2 positive entries")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let mut net = Mlp::zeros(&[2, 2]).unwrap();
        net.layers_mut()[0].weight = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(net.forward_one(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn zero_weights_output_bias() {
        let mut net = Mlp::zeros(&[3, 4, 2]).unwrap();
        net.layers_mut()[1].bias = Matrix::row_vector(&[0.5, -2.0]);
        for x in [[0.0, 0.0, 0.0], [1.0, -7.0, 3.0]] {
            assert_eq!(net.forward_one(&x).unwrap(), vec![0.5, -2.0]);
        }
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let net = Mlp::zeros(&[2, 1]).unwrap();
        assert!(matches!(net.forward_one(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn invalid_dims_rejected() {
        assert!(Mlp::zeros(&[3]).is_err());
        assert!(Mlp::zeros(&[3, 0, 1]).is_err());
    }

    #[test]
    fn tape_forward_matches_plain_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[3, 8, 8, 2], &mut rng).unwrap();
        let x = Matrix::from_rows(&[[0.1, -0.4, 2.0], [1.0, 1.0, -1.0]]).unwrap();
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let (y, _) = net.forward_tape(&mut tape, xv);
        assert_eq!(tape.value(y), &net.forward(&x).unwrap());
    }

    #[test]
    fn one_weight_linear_model_gradient() {
        // L = (w·x − t)², x=2, t=0, w=1 → dL/dw = 2(wx−t)x = 8
        let mut net = Mlp::zeros(&[1, 1]).unwrap();
        net.layers_mut()[0].weight = Matrix::scalar(1.0);
        let (loss, g) = net.mse_grad(&Matrix::scalar(2.0), &Matrix::scalar(0.0)).unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(g.layers[0].0.get(0, 0), 8.0);
        assert_eq!(g.layers[0].1.get(0, 0), 4.0);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::new(&[2, 16, 1], &mut rng).unwrap();
        let x = Matrix::from_rows(&[[0.3, 0.2], [-1.0, 0.5], [2.0, 2.0]]).unwrap();
        let t = net.forward(&x).unwrap();
        let (loss, g) = net.mse_grad(&x, &t).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_batch_rejected() {
        let net = Mlp::zeros(&[2, 1]).unwrap();
        assert!(matches!(net.mse_grad(&Matrix::zeros(0, 2), &Matrix::zeros(0, 1)), Err(Error::EmptyBatch)));
    }

    #[test]
    fn soft_update_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let online = Mlp::new(&[2, 4, 1], &mut rng).unwrap();
        let target = Mlp::new(&[2, 4, 1], &mut rng).unwrap();
        assert_eq!(soft_update(&target, &online, 1.0).unwrap(), online);
        assert_eq!(soft_update(&target, &online, 0.0).unwrap(), target);
    }

    #[test]
    fn soft_update_table_rate() {
        let target = Mlp::zeros(&[1, 1]).unwrap();
        let mut online = Mlp::zeros(&[1, 1]).unwrap();
        online.layers_mut()[0].weight = Matrix::scalar(1.0);
        let out = soft_update(&target, &online, 0.005).unwrap();
        assert!((out.layers()[0].weight.get(0, 0) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn soft_update_rejects_architecture_mismatch() {
        let a = Mlp::zeros(&[2, 4, 1]).unwrap();
        let b = Mlp::zeros(&[2, 5, 1]).unwrap();
        assert!(matches!(soft_update(&a, &b, 0.5), Err(Error::ArchitectureMismatch { .. })));
    }
}
