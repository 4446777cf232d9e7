//! Differentiable generative model: layer cascade, reverse-mode derivatives,
//! and a toy VAE supplying amortized initial latent estimates.

mod layer;
mod persist;
mod stack;
mod vae;

pub use layer::{Activation, Layer, LayerGrad};
pub use persist::{format_f64, load_stack, load_vae, save_stack, save_vae};
pub use stack::{DecodeTrace, LayerStack};
pub use vae::{train_vae, Encoder, VaeModel};
