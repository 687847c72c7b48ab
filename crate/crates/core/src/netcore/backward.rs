//! Reverse-mode gradients through the forward engine.

use super::layer::LayerKind;
use super::network::{ForwardTrace, NetworkSpec};
use crate::error::{Error, Result};

/// Gradient of a scalar with respect to one layer's weight and bias, laid out
/// like the parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Per-layer parameter gradients; `None` for parameter-free layers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrad {
    pub layers: Vec<Option<LayerGrad>>,
}

impl NetworkGrad {
    pub fn zeros_like(net: &NetworkSpec) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| {
                l.params().map(|(w, b)| LayerGrad {
                    weight: vec![0.0; w.len()],
                    bias: vec![0.0; b.len()],
                })
            })
            .collect();
        Self { layers }
    }

    /// `self += scale * other`, accumulating in layer order.
    pub fn add_scaled(&mut self, other: &NetworkGrad, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(a), Some(b)) = (a, b) {
                for (x, y) in a.weight.iter_mut().zip(&b.weight) {
                    *x += scale * y;
                }
                for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                    *x += scale * y;
                }
            }
        }
    }

    /// Flattened gradient in parameter order (layer, weight then bias).
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|g| g.weight.iter().chain(&g.bias).copied())
            .collect()
    }
}

impl NetworkSpec {
    /// Backpropagates `grad_output` (d loss / d output) through a recorded
    /// forward pass. Returns the parameter gradients and d loss / d input.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_output: &[f64],
    ) -> Result<(NetworkGrad, Vec<f64>)> {
        if grad_output.len() != trace.output().len() {
            return Err(Error::ShapeMismatch {
                layer: self.layers.len(),
                detail: format!(
                    "output gradient has length {}, output has {}",
                    grad_output.len(),
                    trace.output().len()
                ),
            });
        }
        let mut grads = NetworkGrad::zeros_like(self);
        let mut upstream = grad_output.to_vec();
        for l in (1..=self.layers.len()).rev() {
            let layer = &self.layers[l - 1];
            let pre = &trace.pre[l - 1];
            let x = trace.activation(l - 1);
            let dpre: Vec<f64> = upstream
                .iter()
                .zip(pre.data())
                .map(|(g, &p)| g * layer.activation.derivative(p))
                .collect();
            let mut dx = vec![0.0; x.len()];
            match &layer.kind {
                LayerKind::Dense { weight, .. } => {
                    let g = grads.layers[l - 1].as_mut().expect("dense has params");
                    let n_in = x.len();
                    let w = weight.data();
                    for (o, &d) in dpre.iter().enumerate() {
                        g.bias[o] += d;
                        let row = o * n_in;
                        for (i, &xi) in x.data().iter().enumerate() {
                            g.weight[row + i] += d * xi;
                            dx[i] += w[row + i] * d;
                        }
                    }
                }
                LayerKind::Conv2d {
                    weight,
                    stride,
                    padding,
                    input_hw: (h, w),
                    ..
                } => {
                    let g = grads.layers[l - 1].as_mut().expect("conv has params");
                    let ws = weight.shape();
                    let (oc_n, ic, k) = (ws[0], ws[1], ws[2]);
                    let (oh, ow) = (pre.shape()[1], pre.shape()[2]);
                    let wd = weight.data();
                    let xd = x.data();
                    for oc in 0..oc_n {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let d = dpre[(oc * oh + oy) * ow + ox];
                                g.bias[oc] += d;
                                for c in 0..ic {
                                    for ky in 0..k {
                                        let iy = (oy * stride + ky) as isize - *padding as isize;
                                        if iy < 0 || iy >= *h as isize {
                                            continue;
                                        }
                                        for kx in 0..k {
                                            let ix =
                                                (ox * stride + kx) as isize - *padding as isize;
                                            if ix < 0 || ix >= *w as isize {
                                                continue;
                                            }
                                            let wi = ((oc * ic + c) * k + ky) * k + kx;
                                            let xi = (c * h + iy as usize) * w + ix as usize;
                                            g.weight[wi] += d * xd[xi];
                                            dx[xi] += wd[wi] * d;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                LayerKind::UpsampleNearest { factor } => {
                    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                    let (oh, ow) = (h * factor, w * factor);
                    for ch in 0..c {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                dx[(ch * h + oy / factor) * w + ox / factor] +=
                                    dpre[(ch * oh + oy) * ow + ox];
                            }
                        }
                    }
                }
            }
            upstream = dx;
        }
        Ok((grads, upstream))
    }
}
