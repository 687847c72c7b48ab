//! Curvature of local activation (CLA) for piecewise-linear generators.
//!
//! The crate is organised around a small double-precision forward engine
//! ([`netcore`]) and the analyses built on top of it:
//!
//! - [`probe`]: change points along latent axes and the per-neuron CLA.
//! - [`scoring`]: per-sample artifact score and High/Low/random group selection.
//! - [`correction`]: per-unit CLA aggregation and unit dampening.
//! - [`linan`]: per-sample linearization of a generator/discriminator pair and
//!   the single-step SGD update analysis.
//! - [`gymkit`]: toy datasets, vanilla GAN training, planted-artifact fixtures.
//! - [`evalkit`]: k-NN precision/recall, realism score and path length.

pub mod correction;
pub mod error;
pub mod evalkit;
pub mod gymkit;
pub mod linan;
pub mod netcore;
pub mod probe;
pub mod scoring;
pub mod svg;

pub use error::{Error, Result};
pub use netcore::{Activation, LayerKind, LayerSpec, NetworkSpec, NeuronSite, Role, Tensor};
pub use probe::{ChangePointPair, ClaRecord, ProbeConfig};
pub use scoring::{GroupKind, GroupSelection, SampleScore};
