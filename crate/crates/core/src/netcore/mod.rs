//! Deterministic forward engine for piecewise-linear feedforward networks.
//!
//! Layers are indexed from 1; `h_0` is the latent code and `h_L` the output.
//! All arithmetic is `f64` and every routine is a pure function of its inputs,
//! so a [`NetworkSpec`] can be shared freely across threads.

mod backward;
mod container;
mod layer;
mod network;
mod tensor;

pub use backward::{LayerGrad, NetworkGrad};
pub use container::{load_model, read_model, save_model, write_model, MAGIC, VERSION};
pub use layer::{Activation, LayerKind, LayerSpec};
pub use network::{ForwardTrace, NetworkSpec, NeuronSite, Role};
pub use tensor::Tensor;
