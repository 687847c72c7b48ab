//! Shared fixtures for the criterion benches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cla_core::gymkit::init::{random_conv_generator, random_mlp, MlpArch};
use cla_core::{Activation, NetworkSpec, Role};

/// Leaky MLP generator `latent_dim -> width x depth -> 8`.
pub fn mlp_generator(latent_dim: usize, width: usize, depth: usize) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(latent_dim as u64 * 1000 + width as u64);
    random_mlp(
        &MlpArch::leaky(latent_dim, vec![width; depth], 8, 0.2),
        Role::Generator,
        0.1,
        &mut rng,
    )
    .expect("valid architecture")
}

/// Dense-then-conv generator producing `[3, 8, 8]`.
pub fn conv_generator(latent_dim: usize, channels: usize) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    random_conv_generator(latent_dim, channels, 3, Activation::LeakyRelu { slope: 0.2 }, &mut rng)
        .expect("valid architecture")
}

/// A fixed latent code with entries in `[-1, 1)`.
pub fn latent(dim: usize) -> Vec<f64> {
    (0..dim).map(|i| ((i * 37 % 17) as f64 / 8.5) - 1.0).collect()
}
