//! Toy VAE: MLP encoder producing (mean, log-variance) over the latent,
//! MLP decoder, and per-sample SGD training with the reparameterization
//! trick. The trained encoder supplies amortized initial latent estimates
//! for the iterative retrieval engines.

use crate::error::{Error, Result};
use crate::numerics::{RngStream, Vector};

use super::layer::Activation;
use super::stack::LayerStack;

/// Encoder network mapping an observation to the 2d-dimensional
/// concatenation (mean, log-variance).
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    stack: LayerStack,
    latent_dim: usize,
}

impl Encoder {
    pub fn new(stack: LayerStack, latent_dim: usize) -> Result<Self> {
        if stack.output_dim() != 2 * latent_dim {
            return Err(Error::ShapeMismatch {
                op: "encoder::new",
                left: format!("encoder output [{}]", stack.output_dim()),
                right: format!("2 * latent [{}]", 2 * latent_dim),
            });
        }
        Ok(Encoder { stack, latent_dim })
    }

    pub fn stack(&self) -> &LayerStack {
        &self.stack
    }

    pub fn input_dim(&self) -> usize {
        self.stack.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    /// (mean, log-variance) split of the network output.
    pub fn encode(&self, x: &Vector) -> Result<(Vector, Vector)> {
        let out = self.stack.forward(x)?;
        let d = self.latent_dim;
        let mu = Vector::from_fn(d, |i| out[i]);
        let logvar = Vector::from_fn(d, |i| out[d + i]);
        Ok((mu, logvar))
    }
}

/// Encoder/decoder pair over a shared latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub encoder: Encoder,
    pub decoder: LayerStack,
    latent_dim: usize,
}

impl VaeModel {
    pub fn new(encoder: Encoder, decoder: LayerStack) -> Result<Self> {
        if decoder.input_dim() != encoder.latent_dim() {
            return Err(Error::ShapeMismatch {
                op: "vae::new",
                left: format!("decoder input [{}]", decoder.input_dim()),
                right: format!("latent [{}]", encoder.latent_dim()),
            });
        }
        if decoder.output_dim() != encoder.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "vae::new",
                left: format!("decoder output [{}]", decoder.output_dim()),
                right: format!("encoder input [{}]", encoder.input_dim()),
            });
        }
        let latent_dim = encoder.latent_dim();
        Ok(VaeModel {
            encoder,
            decoder,
            latent_dim,
        })
    }

    /// Default desk-scale topology: decoder latent -> hidden (tanh) ->
    /// observation (identity); the encoder mirrors it onto 2d outputs.
    pub fn random(
        obs_dim: usize,
        hidden: &[usize],
        latent_dim: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let mut dec_dims = vec![latent_dim];
        dec_dims.extend_from_slice(hidden);
        dec_dims.push(obs_dim);
        let mut dec_acts = vec![Activation::Tanh; dec_dims.len() - 2];
        dec_acts.push(Activation::Identity);

        let mut enc_dims = vec![obs_dim];
        enc_dims.extend(hidden.iter().rev());
        enc_dims.push(2 * latent_dim);
        let mut enc_acts = vec![Activation::Tanh; enc_dims.len() - 2];
        enc_acts.push(Activation::Identity);

        let decoder = LayerStack::random(&dec_dims, &dec_acts, &mut rng.substream("decoder"))?;
        let enc_stack = LayerStack::random(&enc_dims, &enc_acts, &mut rng.substream("encoder"))?;
        VaeModel::new(Encoder::new(enc_stack, latent_dim)?, decoder)
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.decoder.output_dim()
    }

    pub fn encode(&self, x: &Vector) -> Result<(Vector, Vector)> {
        self.encoder.encode(x)
    }

    /// Amortized latent estimate: the posterior mean.
    pub fn encode_mean(&self, x: &Vector) -> Result<Vector> {
        Ok(self.encode(x)?.0)
    }

    pub fn decode(&self, z: &Vector) -> Result<Vector> {
        self.decoder.forward(z)
    }
}

/// One training step's loss terms.
fn sample_loss(recon: f64, kl: f64) -> f64 {
    recon + kl
}

/// Train a copy of the model by per-sample SGD on
/// 0.5 * ||x_hat - x||^2 + KL(q(z|x) || N(0, I)) with the
/// reparameterization trick. Samples are visited in dataset order; all
/// randomness comes from `rng`. Returns the trained model and the
/// per-epoch mean loss trace.
pub fn train_vae(
    model: &VaeModel,
    dataset: &[Vector],
    epochs: usize,
    learning_rate: f64,
    rng: &mut RngStream,
) -> Result<(VaeModel, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    if learning_rate < 0.0 || learning_rate.is_nan() || !learning_rate.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "learning rate must be finite and non-negative, got {learning_rate}"
        )));
    }
    for (i, x) in dataset.iter().enumerate() {
        if x.dim() != model.obs_dim() {
            return Err(Error::ShapeMismatch {
                op: "train_vae",
                left: format!("sample {i} [{}]", x.dim()),
                right: format!("observation [{}]", model.obs_dim()),
            });
        }
    }

    let mut trained = model.clone();
    let d = trained.latent_dim();
    let mut trace = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        let mut epoch_loss = 0.0;
        for (idx, x) in dataset.iter().enumerate() {
            let enc_trace = trained.encoder.stack().decode(x)?;
            let enc_out = enc_trace.output();
            let mu = Vector::from_fn(d, |i| enc_out[i]);
            let logvar = Vector::from_fn(d, |i| enc_out[d + i]);
            let eps = rng.normal_vector(d);
            let std = Vector::from_fn(d, |i| (0.5 * logvar[i]).exp());
            let z = Vector::from_fn(d, |i| mu[i] + std[i] * eps[i]);

            let dec_trace = trained.decoder.decode(&z)?;
            let x_hat = dec_trace.output();
            let resid = x_hat.sub(x)?;
            let recon = 0.5 * resid.dot(&resid)?;
            let kl = 0.5
                * (0..d)
                    .map(|i| mu[i] * mu[i] + logvar[i].exp() - logvar[i] - 1.0)
                    .sum::<f64>();
            let loss = sample_loss(recon, kl);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss diverged at epoch {epoch}, sample {idx} \
                     (recon {recon}, kl {kl})"
                )));
            }
            epoch_loss += loss;

            // Decoder backward: dL/dx_hat = x_hat - x.
            let (dec_grads, dz) = trained.decoder.backward(&dec_trace, &resid)?;
            // Through the reparameterization into the encoder head.
            let dmu = Vector::from_fn(d, |i| dz[i] + mu[i]);
            let dlogvar = Vector::from_fn(d, |i| {
                dz[i] * eps[i] * 0.5 * std[i] + 0.5 * (logvar[i].exp() - 1.0)
            });
            let upstream = Vector::from_fn(2 * d, |i| if i < d { dmu[i] } else { dlogvar[i - d] });
            let (enc_grads, _) = trained.encoder.stack().backward(&enc_trace, &upstream)?;

            for (layer, grad) in trained.decoder.layers_mut().iter_mut().zip(&dec_grads) {
                layer.apply_gradients(grad, learning_rate);
            }
            for (layer, grad) in trained.encoder.stack.layers_mut().iter_mut().zip(&enc_grads) {
                layer.apply_gradients(grad, learning_rate);
            }
        }
        trace.push(epoch_loss / dataset.len() as f64);
    }
    Ok((trained, trace))
}
