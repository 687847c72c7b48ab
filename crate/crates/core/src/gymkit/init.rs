use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::netcore::{Activation, LayerSpec, NetworkSpec, Role, Tensor};

/// Fully connected architecture: `input_dim -> hidden... -> output_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpArch {
    pub fn leaky(input_dim: usize, hidden: Vec<usize>, output_dim: usize, slope: f64) -> Self {
        Self {
            input_dim,
            hidden,
            output_dim,
            hidden_activation: Activation::LeakyRelu { slope },
            output_activation: Activation::Identity,
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden);
        w.push(self.output_dim);
        w
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R, n: usize, std: f64) -> Vec<f64> {
    (0..n)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// He-normal weights and `N(0, bias_std^2)` biases.
pub fn random_mlp<R: Rng + ?Sized>(
    arch: &MlpArch,
    role: Role,
    bias_std: f64,
    rng: &mut R,
) -> Result<NetworkSpec> {
    let widths = arch.widths();
    let last = widths.len() - 2;
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = (2.0 / fan_in as f64).sqrt();
            let act = if i == last {
                arch.output_activation
            } else {
                arch.hidden_activation
            };
            Ok(LayerSpec::dense(
                Tensor::new(vec![fan_out, fan_in], normal(rng, fan_in * fan_out, std))?,
                Tensor::vector(normal(rng, fan_out, bias_std)),
                act,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    NetworkSpec::new(role, arch.input_dim, layers)
}

/// Small convolutional generator: dense `latent -> c*4*4`, conv 3x3 over
/// `[c, 4, 4]`, nearest upsample x2, conv 3x3 to `[out_c, 8, 8]`.
pub fn random_conv_generator<R: Rng + ?Sized>(
    latent_dim: usize,
    channels: usize,
    out_channels: usize,
    hidden: Activation,
    rng: &mut R,
) -> Result<NetworkSpec> {
    let c = channels;
    let dense_std = (2.0 / latent_dim as f64).sqrt();
    let conv_std = (2.0 / (c * 9) as f64).sqrt();
    let layers = vec![
        LayerSpec::dense(
            Tensor::new(vec![c * 16, latent_dim], normal(rng, c * 16 * latent_dim, dense_std))?,
            Tensor::vector(normal(rng, c * 16, 0.1)),
            hidden,
        ),
        LayerSpec::conv2d(
            Tensor::new(vec![c, c, 3, 3], normal(rng, c * c * 9, conv_std))?,
            Tensor::vector(normal(rng, c, 0.1)),
            1,
            1,
            (4, 4),
            hidden,
        ),
        LayerSpec::upsample(2, Activation::Identity),
        LayerSpec::conv2d(
            Tensor::new(
                vec![out_channels, c, 3, 3],
                normal(rng, out_channels * c * 9, conv_std),
            )?,
            Tensor::vector(normal(rng, out_channels, 0.1)),
            1,
            1,
            (8, 8),
            Activation::Identity,
        ),
    ];
    NetworkSpec::new(Role::Generator, latent_dim, layers)
}
