use serde::{Deserialize, Serialize};
use std::fmt;

use super::layer::LayerSpec;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Generator,
    Discriminator,
}

/// Layered piecewise-linear network. Layer `l` (1-based) maps `h_{l-1}` to `h_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub role: Role,
    pub latent_dim: usize,
    pub layers: Vec<LayerSpec>,
}

/// Address of one neuron: `unit` is the channel (or the neuron index of a
/// dense layer); `row`/`col` are the spatial position, zero for dense layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronSite {
    pub layer: usize,
    pub unit: usize,
    pub row: usize,
    pub col: usize,
}

impl NeuronSite {
    pub fn dense(layer: usize, unit: usize) -> Self {
        Self {
            layer,
            unit,
            row: 0,
            col: 0,
        }
    }

    pub fn spatial(layer: usize, unit: usize, row: usize, col: usize) -> Self {
        Self {
            layer,
            unit,
            row,
            col,
        }
    }

    /// Site of the element at `flat` in an activation tensor of `shape`.
    pub fn from_flat(layer: usize, shape: &[usize], flat: usize) -> Self {
        if shape.len() == 3 {
            let (h, w) = (shape[1], shape[2]);
            Self::spatial(layer, flat / (h * w), (flat / w) % h, flat % w)
        } else {
            Self::dense(layer, flat)
        }
    }

    /// Row-major offset of this site inside an activation of `shape`.
    pub fn flat_index(&self, shape: &[usize]) -> Result<usize> {
        let invalid = |reason: String| Error::InvalidSite {
            site: self.to_string(),
            reason,
        };
        match shape {
            [c, h, w] => {
                if self.unit >= *c || self.row >= *h || self.col >= *w {
                    return Err(invalid(format!("outside activation shape {shape:?}")));
                }
                Ok((self.unit * h + self.row) * w + self.col)
            }
            _ => {
                let n: usize = shape.iter().product();
                if self.unit >= n || self.row != 0 || self.col != 0 {
                    return Err(invalid(format!("outside activation shape {shape:?}")));
                }
                Ok(self.unit)
            }
        }
    }
}

impl fmt::Display for NeuronSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(layer {}, unit {}, row {}, col {})",
            self.layer, self.unit, self.row, self.col
        )
    }
}

/// Pre- and post-activation tensors of every layer; index 0 is layer 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Tensor,
    pub pre: Vec<Tensor>,
    pub post: Vec<Tensor>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Tensor {
        self.post.last().unwrap_or(&self.input)
    }

    /// `h_l`, with `h_0` the input.
    pub fn activation(&self, layer: usize) -> &Tensor {
        if layer == 0 {
            &self.input
        } else {
            &self.post[layer - 1]
        }
    }
}

impl NetworkSpec {
    pub fn new(role: Role, latent_dim: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        let net = Self {
            role,
            latent_dim,
            layers,
        };
        net.layer_shapes()?;
        Ok(net)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, l: usize) -> Result<&LayerSpec> {
        if l == 0 || l > self.layers.len() {
            return Err(Error::InvalidConfig(format!(
                "layer {l} out of range 1..={}",
                self.layers.len()
            )));
        }
        Ok(&self.layers[l - 1])
    }

    /// Output shape of every layer, checking that consecutive layers compose
    /// and that a discriminator ends in a single scalar.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.latent_dim == 0 {
            return Err(Error::InvalidConfig("latent_dim must be positive".into()));
        }
        let mut shape = vec![self.latent_dim];
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer.output_shape(i + 1, &shape)?;
            shapes.push(shape.clone());
        }
        if self.role == Role::Discriminator && shape.iter().product::<usize>() != 1 {
            return Err(Error::ShapeMismatch {
                layer: self.layers.len(),
                detail: format!("discriminator must end in a scalar, got {shape:?}"),
            });
        }
        Ok(shapes)
    }

    pub fn output_len(&self) -> Result<usize> {
        Ok(self
            .layer_shapes()?
            .last()
            .map(|s| s.iter().product())
            .unwrap_or(self.latent_dim))
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.latent_dim {
            return Err(Error::ShapeMismatch {
                layer: 0,
                detail: format!("latent code has length {}, expected {}", z.len(), self.latent_dim),
            });
        }
        Ok(())
    }

    /// Full forward pass recording pre- and post-activations.
    pub fn forward_trace(&self, z: &[f64]) -> Result<ForwardTrace> {
        self.check_input(z)?;
        let input = Tensor::vector(z.to_vec());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Tensor> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let x = post.last().unwrap_or(&input);
            let p = layer.linear(i + 1, x, true)?;
            post.push(layer.activate(&p));
            pre.push(p);
        }
        Ok(ForwardTrace { input, pre, post })
    }

    /// Post-activations `h_1..h_L`; the last entry is the network output.
    pub fn forward(&self, z: &[f64]) -> Result<Vec<Tensor>> {
        Ok(self.forward_trace(z)?.post)
    }

    pub fn output(&self, z: &[f64]) -> Result<Tensor> {
        self.check_input(z)?;
        self.forward_from(0, &Tensor::vector(z.to_vec()))
    }

    /// `(pre, post)` of layer `l`, evaluating only layers `1..=l`.
    pub fn forward_to(&self, z: &[f64], l: usize) -> Result<(Tensor, Tensor)> {
        self.check_input(z)?;
        self.layer(l)?;
        let mut h = Tensor::vector(z.to_vec());
        let mut pre = None;
        for (i, layer) in self.layers[..l].iter().enumerate() {
            let p = layer.linear(i + 1, &h, true)?;
            h = layer.activate(&p);
            pre = Some(p);
        }
        Ok((pre.expect("l >= 1"), h))
    }

    /// Resume the forward pass from `h_l`, running layers `l+1..=L`.
    pub fn forward_from(&self, l: usize, h: &Tensor) -> Result<Tensor> {
        if l > self.layers.len() {
            return Err(Error::InvalidConfig(format!(
                "layer {l} out of range 0..={}",
                self.layers.len()
            )));
        }
        let mut x = h.clone();
        for (i, layer) in self.layers.iter().enumerate().skip(l) {
            let p = layer.linear(i + 1, &x, true)?;
            x = layer.activate(&p);
        }
        Ok(x)
    }

    /// Post-activation of one neuron at `z`.
    pub fn neuron_value(&self, z: &[f64], site: NeuronSite) -> Result<f64> {
        self.layer(site.layer).map_err(|_| Error::InvalidSite {
            site: site.to_string(),
            reason: format!("network has {} layers", self.layers.len()),
        })?;
        let (_, post) = self.forward_to(z, site.layer)?;
        let idx = site.flat_index(post.shape())?;
        Ok(post.data()[idx])
    }

    /// Every neuron site of layer `l` in row-major order.
    pub fn layer_sites(&self, l: usize) -> Result<Vec<NeuronSite>> {
        self.layer(l)?;
        let shape = &self.layer_shapes()?[l - 1];
        let n: usize = shape.iter().product();
        Ok((0..n).map(|i| NeuronSite::from_flat(l, shape, i)).collect())
    }

    /// Number of featuremap units (channels, or neurons of a dense layer).
    pub fn unit_count(&self, l: usize) -> Result<usize> {
        self.layer(l)?;
        let shape = &self.layer_shapes()?[l - 1];
        Ok(if shape.len() == 3 {
            shape[0]
        } else {
            shape.iter().product()
        })
    }
}
