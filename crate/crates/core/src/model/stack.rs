//! Ordered cascade of layers and its chained reverse-mode derivative.
//!
//! Layers are stored in application order: `layers[0]` consumes the latent,
//! the last layer emits the observation. In the generative-cascade view where
//! level `l` predicts `h_l` from `h_{l+1}` (level 0 = observation, level L =
//! latent), level `l` is `layers[L - 1 - l]`; [`LayerStack::level`] performs
//! that translation.

use crate::error::{Error, Result};
use crate::numerics::{RngStream, Vector};

use super::layer::{Activation, Layer, LayerGrad};

/// A feed-forward chain of layers with matching dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<Layer>,
}

/// Every intermediate value of a forward cascade.
///
/// `values[0]` is the input (the latent, for a decoder); `values[i]` is the
/// output of `layers[i-1]`; the last entry is the final output. In level
/// terms, `values[i]` is `h_{L-i}`.
#[derive(Debug, Clone)]
pub struct DecodeTrace {
    values: Vec<Vector>,
}

impl DecodeTrace {
    pub fn input(&self) -> &Vector {
        &self.values[0]
    }

    pub fn output(&self) -> &Vector {
        self.values.last().expect("trace is never empty")
    }

    /// Value at generative level `l` (0 = observation side, L = latent).
    pub fn level_value(&self, l: usize) -> &Vector {
        let depth = self.values.len() - 1;
        &self.values[depth - l]
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter(
                "a layer stack needs at least one layer".into(),
            ));
        }
        for w in layers.windows(2) {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(Error::ShapeMismatch {
                    op: "stack::new",
                    left: format!("layer output [{}]", w[0].output_dim()),
                    right: format!("next layer input [{}]", w[1].input_dim()),
                });
            }
        }
        Ok(LayerStack { layers })
    }

    /// Random MLP: `dims[0] -> dims[1] -> ...` with the given activations
    /// (one per transition).
    pub fn random(dims: &[usize], activations: &[Activation], rng: &mut RngStream) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::InvalidParameter(format!(
                "need {} activations for {} dims",
                dims.len().saturating_sub(1),
                dims.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Layer::random(w[1], w[0], act, rng))
            .collect();
        LayerStack::new(layers)
    }

    /// Number of layers (the depth L).
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Layer acting at generative level `l` (predicts `h_l` from `h_{l+1}`).
    pub fn level(&self, l: usize) -> &Layer {
        &self.layers[self.depth() - 1 - l]
    }

    /// Plain forward pass.
    pub fn forward(&self, input: &Vector) -> Result<Vector> {
        let mut h = input.clone();
        for layer in &self.layers {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    /// Forward pass keeping every intermediate value.
    pub fn decode(&self, input: &Vector) -> Result<DecodeTrace> {
        let mut values = Vec::with_capacity(self.depth() + 1);
        values.push(input.clone());
        for layer in &self.layers {
            let next = layer.forward(values.last().expect("non-empty"))?;
            values.push(next);
        }
        Ok(DecodeTrace { values })
    }

    /// Chained vector-Jacobian product: J^T u where J is the Jacobian of the
    /// whole stack at `input` and `u` lives at the output.
    pub fn vjp(&self, input: &Vector, upstream: &Vector) -> Result<Vector> {
        let trace = self.decode(input)?;
        self.vjp_from_trace(&trace, upstream)
    }

    /// Same as [`LayerStack::vjp`] reusing an existing forward trace.
    pub fn vjp_from_trace(&self, trace: &DecodeTrace, upstream: &Vector) -> Result<Vector> {
        let mut u = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            u = layer.vjp(&trace.values[i], &u)?;
        }
        Ok(u)
    }

    /// Backward pass collecting per-layer parameter gradients; returns them in
    /// storage order along with the gradient at the stack input.
    pub fn backward(&self, trace: &DecodeTrace, upstream: &Vector) -> Result<(Vec<LayerGrad>, Vector)> {
        let mut grads: Vec<Option<LayerGrad>> = (0..self.depth()).map(|_| None).collect();
        let mut u = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let g = layer.backward(&trace.values[i], &u)?;
            u = g.input.clone();
            grads[i] = Some(g);
        }
        Ok((grads.into_iter().map(|g| g.expect("filled")).collect(), u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn random_stack(dims: &[usize], seed: u64) -> LayerStack {
        let mut rng = RngStream::new(seed);
        let acts: Vec<Activation> = (0..dims.len() - 1)
            .map(|i| {
                if i % 2 == 0 {
                    Activation::Tanh
                } else {
                    Activation::Identity
                }
            })
            .collect();
        LayerStack::random(dims, &acts, &mut rng).unwrap()
    }

    #[test]
    fn single_layer_stack_is_layer_forward() {
        let mut rng = RngStream::new(1);
        let layer = Layer::random(3, 2, Activation::Tanh, &mut rng);
        let stack = LayerStack::new(vec![layer.clone()]).unwrap();
        let z = Vector::new(vec![0.3, -0.7]);
        assert_eq!(stack.forward(&z).unwrap(), layer.forward(&z).unwrap());
    }

    #[test]
    fn decode_matches_sequential_forward() {
        let stack = random_stack(&[4, 8, 5, 3], 2);
        let z = Vector::from_fn(4, |i| 0.1 * i as f64 - 0.2);
        let trace = stack.decode(&z).unwrap();
        let mut h = z.clone();
        for (i, layer) in stack.layers().iter().enumerate() {
            h = layer.forward(&h).unwrap();
            assert_eq!(&trace.values()[i + 1], &h);
        }
        assert_eq!(trace.output(), &h);
    }

    #[test]
    fn depth_three_against_manual_composition() {
        let stack = random_stack(&[2, 6, 4, 3], 5);
        let z = Vector::new(vec![0.4, -0.9]);
        let manual = stack.layers()[2]
            .forward(
                &stack.layers()[1]
                    .forward(&stack.layers()[0].forward(&z).unwrap())
                    .unwrap(),
            )
            .unwrap();
        let got = stack.forward(&z).unwrap();
        for i in 0..3 {
            assert!((got[i] - manual[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn level_accessor_reverses_storage_order() {
        let stack = random_stack(&[2, 5, 3], 6);
        // L = 2: level 1 predicts h_1 from the latent -> layers[0]
        assert_eq!(stack.level(1), &stack.layers()[0]);
        assert_eq!(stack.level(0), &stack.layers()[1]);
        let z = Vector::new(vec![1.0, -1.0]);
        let trace = stack.decode(&z).unwrap();
        assert_eq!(trace.level_value(2), &z);
        assert_eq!(trace.level_value(0), trace.output());
    }

    /// Finite differences of 0.5 * ||f(z) - x||^2 w.r.t. z.
    fn fd_grad_half_sq(stack: &LayerStack, z: &Vector, x: &Vector, eps: f64) -> Vector {
        let loss = |zz: &Vector| -> f64 {
            let out = stack.forward(zz).unwrap();
            0.5 * out.squared_distance(x).unwrap()
        };
        Vector::from_fn(z.dim(), |i| {
            let mut zp = z.clone();
            zp[i] += eps;
            let mut zm = z.clone();
            zm[i] -= eps;
            (loss(&zp) - loss(&zm)) / (2.0 * eps)
        })
    }

    #[test]
    fn full_stack_vjp_matches_finite_differences() {
        let mut rng = RngStream::new(77);
        for trial in 0..20 {
            let stack = random_stack(&[3, 7, 5, 4], 100 + trial);
            let z = Vector::from_fn(3, |_| rng.normal());
            let x = Vector::from_fn(4, |_| rng.normal());
            let out = stack.forward(&z).unwrap();
            let resid = out.sub(&x).unwrap();
            // grad of 0.5||f(z)-x||^2 = J^T (f(z) - x)
            let analytic = stack.vjp(&z, &resid).unwrap();
            let numeric = fd_grad_half_sq(&stack, &z, &x, 1e-5);
            for i in 0..3 {
                let denom = analytic[i].abs().max(numeric[i].abs()).max(1e-4);
                assert!(
                    (analytic[i] - numeric[i]).abs() / denom < 1e-6,
                    "trial {trial}: {} vs {}",
                    analytic[i],
                    numeric[i]
                );
            }
        }
    }

    #[test]
    fn identity_chain_vjp_is_identity() {
        let l1 = Layer::new(Matrix::identity(2), Vector::zeros(2), Activation::Identity).unwrap();
        let l2 = Layer::new(Matrix::identity(2), Vector::zeros(2), Activation::Identity).unwrap();
        let stack = LayerStack::new(vec![l1, l2]).unwrap();
        let u = Vector::new(vec![0.5, -0.25]);
        assert_eq!(stack.vjp(&Vector::zeros(2), &u).unwrap(), u);
    }

    #[test]
    fn mismatched_dims_rejected() {
        let mut rng = RngStream::new(3);
        let a = Layer::random(4, 2, Activation::Tanh, &mut rng);
        let b = Layer::random(3, 5, Activation::Tanh, &mut rng);
        assert!(LayerStack::new(vec![a, b]).is_err());
    }
}
