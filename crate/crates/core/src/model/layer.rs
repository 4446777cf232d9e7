//! A single affine layer with an elementwise activation, plus its
//! reverse-mode derivatives.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream, Vector};

/// Elementwise nonlinearity. The relu subgradient at 0 is fixed to 0 so the
/// VJP is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidParameter(format!(
                "unknown activation '{other}'"
            ))),
        }
    }
}

/// Affine layer `activation(W h + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weight: Matrix,
    bias: Vector,
    activation: Activation,
}

/// Parameter and input gradients of one layer for a given upstream signal.
#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub input: Vector,
    pub weight: Matrix,
    pub bias: Vector,
}

impl Layer {
    pub fn new(weight: Matrix, bias: Vector, activation: Activation) -> Result<Self> {
        if weight.rows() != bias.dim() {
            return Err(Error::ShapeMismatch {
                op: "layer::new",
                left: format!("weight {}x{}", weight.rows(), weight.cols()),
                right: format!("bias[{}]", bias.dim()),
            });
        }
        Ok(Layer {
            weight,
            bias,
            activation,
        })
    }

    /// Xavier-uniform initialization.
    pub fn random(
        output_dim: usize,
        input_dim: usize,
        activation: Activation,
        rng: &mut RngStream,
    ) -> Self {
        let bound = (6.0 / (input_dim + output_dim) as f64).sqrt();
        let weight = Matrix::from_fn(output_dim, input_dim, |_, _| rng.uniform_in(-bound, bound));
        Layer {
            weight,
            bias: Vector::zeros(output_dim),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &Vector {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn pre_activation(&self, input: &Vector) -> Result<Vector> {
        let mut pre = self.weight.matvec(input)?;
        for (p, b) in pre.iter_mut().zip(self.bias.iter()) {
            *p += b;
        }
        Ok(pre)
    }

    /// activation(W h + b)
    pub fn forward(&self, input: &Vector) -> Result<Vector> {
        let mut pre = self.pre_activation(input)?;
        for p in pre.iter_mut() {
            *p = self.activation.apply(*p);
        }
        Ok(pre)
    }

    /// J^T u, where J is the Jacobian of [`Layer::forward`] at `input`:
    /// W^T (activation'(W h + b) ⊙ u).
    pub fn vjp(&self, input: &Vector, upstream: &Vector) -> Result<Vector> {
        if upstream.dim() != self.output_dim() {
            return Err(Error::ShapeMismatch {
                op: "layer::vjp",
                left: format!("layer output [{}]", self.output_dim()),
                right: format!("upstream[{}]", upstream.dim()),
            });
        }
        let pre = self.pre_activation(input)?;
        let scaled = Vector::from_fn(self.output_dim(), |i| {
            self.activation.derivative(pre[i]) * upstream[i]
        });
        self.weight.matvec_transpose(&scaled)
    }

    /// Full backward pass: gradients w.r.t. input, weight and bias for the
    /// given upstream signal dL/d(output).
    pub fn backward(&self, input: &Vector, upstream: &Vector) -> Result<LayerGrad> {
        if upstream.dim() != self.output_dim() {
            return Err(Error::ShapeMismatch {
                op: "layer::backward",
                left: format!("layer output [{}]", self.output_dim()),
                right: format!("upstream[{}]", upstream.dim()),
            });
        }
        let pre = self.pre_activation(input)?;
        let scaled = Vector::from_fn(self.output_dim(), |i| {
            self.activation.derivative(pre[i]) * upstream[i]
        });
        let weight_grad = Matrix::from_fn(self.output_dim(), self.input_dim(), |r, c| {
            scaled[r] * input[c]
        });
        Ok(LayerGrad {
            input: self.weight.matvec_transpose(&scaled)?,
            weight: weight_grad,
            bias: scaled,
        })
    }

    /// In-place SGD update with step `lr` against accumulated gradients.
    pub fn apply_gradients(&mut self, grad: &LayerGrad, lr: f64) {
        let rows = self.weight.rows();
        let cols = self.weight.cols();
        for r in 0..rows {
            for c in 0..cols {
                let v = self.weight.get(r, c) - lr * grad.weight.get(r, c);
                self.weight.set(r, c, v);
            }
        }
        for (b, g) in self.bias.iter_mut().zip(grad.bias.iter()) {
            *b -= lr * g;
        }
    }
}
