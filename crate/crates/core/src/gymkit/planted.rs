//! Generators with a hand-built artifact unit.
//!
//! The planted unit's pre-activation is `a (ρ - |z - c|_1)`: a pyramid over
//! the L1 ball of radius `ρ` around `c`, whose slice along any latent axis
//! is a tent. The L1 distance is assembled exactly from leaky-relu features,
//! using `|x| = (σ(x) + σ(-x)) / (1 - γ)`, and carried to the planted layer
//! by one pass-through neuron per intermediate layer. The planted unit writes
//! a fixed artifact pattern into the output; the clean reference generator is
//! identical except that this outgoing column is zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::{Activation, LayerKind, LayerSpec, NetworkSpec, NeuronSite, Role, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSpec {
    pub latent_dim: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
    pub leaky_slope: f64,
    /// Hidden layer holding the planted unit; it uses relu.
    pub planted_layer: usize,
    pub target_unit: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Slope `a` of the pyramid.
    pub amplitude: f64,
    /// Peak L2 norm of the injected output perturbation.
    pub artifact_scale: f64,
    /// Radius must stay below this probe search bound.
    pub search_bound: f64,
    pub seed: u64,
}

impl Default for PlantSpec {
    fn default() -> Self {
        Self {
            latent_dim: 2,
            hidden_width: 16,
            output_dim: 8,
            leaky_slope: 0.2,
            planted_layer: 4,
            target_unit: 0,
            center: vec![0.0, 0.0],
            radius: 1.5,
            amplitude: 20.0,
            artifact_scale: 3.0,
            search_bound: 30.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedFixture {
    pub spec: PlantSpec,
    pub planted: NetworkSpec,
    pub clean: NetworkSpec,
}

impl PlantedFixture {
    pub fn site(&self) -> NeuronSite {
        NeuronSite::dense(self.spec.planted_layer, self.spec.target_unit)
    }

    /// `|z - c|_1`.
    pub fn l1_distance(&self, z: &[f64]) -> f64 {
        z.iter().zip(&self.spec.center).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Strictly inside the bump, where the planted unit is active.
    pub fn in_bump(&self, z: &[f64]) -> bool {
        self.l1_distance(z) < self.spec.radius
    }

    /// CLA of the planted neuron at the bump centre: `-a / ρ`.
    pub fn center_cla(&self) -> f64 {
        -self.spec.amplitude / self.spec.radius
    }
}

fn infeasible(msg: impl Into<String>) -> Error {
    Error::InfeasibleGeometry(msg.into())
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.latent_dim;
        if d == 0 || self.output_dim == 0 {
            return Err(infeasible("latent and output dimensions must be positive"));
        }
        if self.center.len() != d {
            return Err(infeasible(format!(
                "centre has {} coordinates, latent dimension is {d}",
                self.center.len()
            )));
        }
        if self.planted_layer < 2 {
            return Err(infeasible("planted layer must be 2 or deeper"));
        }
        if self.hidden_width < 2 * d {
            return Err(infeasible(format!(
                "hidden width {} cannot hold {} absolute-value features",
                self.hidden_width,
                2 * d
            )));
        }
        if self.target_unit >= self.hidden_width {
            return Err(infeasible(format!(
                "target unit {} outside width {}",
                self.target_unit, self.hidden_width
            )));
        }
        if !(self.radius > 0.0 && self.radius < self.search_bound) {
            return Err(infeasible(format!(
                "radius {} must lie in (0, {})",
                self.radius, self.search_bound
            )));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(infeasible(format!("leaky slope {} outside [0, 1)", self.leaky_slope)));
        }
        if !(self.amplitude > 0.0 && self.artifact_scale > 0.0) {
            return Err(infeasible("amplitude and artifact scale must be positive"));
        }
        Ok(())
    }
}

fn normals<R: Rng>(rng: &mut R, n: usize, std: f64) -> Vec<f64> {
    (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Builds the planted generator and its clean reference.
pub fn plant_artifact_generator(spec: &PlantSpec) -> Result<PlantedFixture> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.latent_dim;
    let w = spec.hidden_width;
    let p = spec.planted_layer;
    let gamma = spec.leaky_slope;
    let leaky = Activation::LeakyRelu { slope: gamma };
    let abs_gain = 1.0 / (1.0 - gamma);
    let mut layers = Vec::with_capacity(p + 1);

    // layer 1: features ±(z_d - c_d), then random neurons
    let mut weight = normals(&mut rng, w * d, (2.0 / d as f64).sqrt());
    let mut bias = normals(&mut rng, w, 0.1);
    for k in 0..d {
        for (row, sign) in [(2 * k, 1.0), (2 * k + 1, -1.0)] {
            weight[row * d..(row + 1) * d].fill(0.0);
            weight[row * d + k] = sign;
            bias[row] = -sign * spec.center[k];
        }
    }
    layers.push(LayerSpec::dense(Tensor::new(vec![w, d], weight)?, Tensor::vector(bias), leaky));

    for l in 2..=p {
        let mut weight = normals(&mut rng, w * w, (2.0 / w as f64).sqrt());
        let mut bias = normals(&mut rng, w, 0.1);
        // read |z - c|_1 from the abs features (l == 2) or the carrier in unit 0
        let l1_row = |row: &mut [f64], gain: f64| {
            row.fill(0.0);
            if l == 2 {
                row[..2 * d].fill(gain * abs_gain);
            } else {
                row[0] = gain;
            }
        };
        let (row, act) = if l == p {
            (spec.target_unit, Activation::Relu)
        } else {
            (0, leaky)
        };
        if l == p {
            l1_row(&mut weight[row * w..(row + 1) * w], -spec.amplitude);
            bias[row] = spec.amplitude * spec.radius;
        } else {
            l1_row(&mut weight[row * w..(row + 1) * w], 1.0);
            bias[row] = 0.0;
        }
        layers.push(LayerSpec::dense(Tensor::new(vec![w, w], weight)?, Tensor::vector(bias), act));
    }

    let out = spec.output_dim;
    let mut weight = normals(&mut rng, out * w, (1.0 / w as f64).sqrt());
    let direction = normals(&mut rng, out, 1.0);
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let peak = spec.amplitude * spec.radius;
    for (o, dv) in direction.iter().enumerate() {
        weight[o * w + spec.target_unit] = spec.artifact_scale * dv / (norm * peak);
    }
    let bias = normals(&mut rng, out, 0.1);
    layers.push(LayerSpec::dense(
        Tensor::new(vec![out, w], weight)?,
        Tensor::vector(bias),
        Activation::Identity,
    ));

    let planted = NetworkSpec::new(Role::Generator, d, layers)?;
    let mut clean = planted.clone();
    if let LayerKind::Dense { weight, .. } = &mut clean.layers[p].kind {
        let data = weight.data_mut();
        for o in 0..out {
            data[o * w + spec.target_unit] = 0.0;
        }
    }
    Ok(PlantedFixture {
        spec: spec.clone(),
        planted,
        clean,
    })
}
