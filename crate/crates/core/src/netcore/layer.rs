use serde::{Deserialize, Serialize};
use std::fmt;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Elementwise nonlinearity applied after a layer's linear map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x >= 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if x >= 0.0 {
                    x
                } else if slope == 0.0 {
                    // keeps the slope-0 path bit-identical to relu (no -0.0)
                    0.0
                } else {
                    slope * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation. Kinks take the right
    /// derivative, matching the `x >= 0` branch of [`Activation::apply`].
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            other => other.local_slope(x).unwrap_or(1.0),
        }
    }

    /// Slope of the active linear piece at `x`, `None` for tanh.
    #[inline]
    pub fn local_slope(self, x: f64) -> Option<f64> {
        match self {
            Activation::Relu => Some(if x >= 0.0 { 1.0 } else { 0.0 }),
            Activation::LeakyRelu { slope } => Some(if x >= 0.0 { 1.0 } else { slope }),
            Activation::Identity => Some(1.0),
            Activation::Tanh => None,
        }
    }

    pub fn is_piecewise_linear(self) -> bool {
        !matches!(self, Activation::Tanh)
    }

    /// Relu-family activations, the only ones CLA probing is defined on.
    pub fn is_rectifier(self) -> bool {
        matches!(self, Activation::Relu | Activation::LeakyRelu { .. })
    }

    pub fn validate(self) -> Result<()> {
        if let Activation::LeakyRelu { slope } = self {
            if !(slope >= 0.0 && slope.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "leaky relu slope must be finite and non-negative, got {slope}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::LeakyRelu { slope } => write!(f, "leaky_relu({slope})"),
            Activation::Tanh => write!(f, "tanh"),
            Activation::Identity => write!(f, "identity"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerKind {
    /// `weight` is `[out, in]`, `bias` is `[out]`. Any input is flattened.
    Dense { weight: Tensor, bias: Tensor },
    /// `weight` is `[out_c, in_c, k, k]`, `bias` is `[out_c]`. The input is
    /// read as `[in_c, input_hw.0, input_hw.1]` in row-major order.
    Conv2d {
        weight: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
        input_hw: (usize, usize),
    },
    /// Nearest-neighbour upsampling of a `[c, h, w]` input.
    UpsampleNearest { factor: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn dense(weight: Tensor, bias: Tensor, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Dense { weight, bias },
            activation,
        }
    }

    pub fn conv2d(
        weight: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
        input_hw: (usize, usize),
        activation: Activation,
    ) -> Self {
        Self {
            kind: LayerKind::Conv2d {
                weight,
                bias,
                stride,
                padding,
                input_hw,
            },
            activation,
        }
    }

    pub fn upsample(factor: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::UpsampleNearest { factor },
            activation,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            LayerKind::Dense { .. } => "dense",
            LayerKind::Conv2d { .. } => "conv2d",
            LayerKind::UpsampleNearest { .. } => "upsample_nearest",
        }
    }

    /// Trainable parameters as `(weight, bias)`, if the layer has any.
    pub fn params(&self) -> Option<(&Tensor, &Tensor)> {
        match &self.kind {
            LayerKind::Dense { weight, bias } | LayerKind::Conv2d { weight, bias, .. } => {
                Some((weight, bias))
            }
            LayerKind::UpsampleNearest { .. } => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut Tensor, &mut Tensor)> {
        match &mut self.kind {
            LayerKind::Dense { weight, bias } | LayerKind::Conv2d { weight, bias, .. } => {
                Some((weight, bias))
            }
            LayerKind::UpsampleNearest { .. } => None,
        }
    }

    /// Output shape for an input of shape `input`; `layer` is only used to
    /// label errors.
    pub fn output_shape(&self, layer: usize, input: &[usize]) -> Result<Vec<usize>> {
        self.activation.validate()?;
        let in_len: usize = input.iter().product();
        let mismatch = |detail: String| Error::ShapeMismatch { layer, detail };
        match &self.kind {
            LayerKind::Dense { weight, bias } => {
                let ws = weight.shape();
                if ws.len() != 2 {
                    return Err(mismatch(format!("dense weight must be 2-D, got {ws:?}")));
                }
                if ws[1] != in_len {
                    return Err(mismatch(format!(
                        "dense layer expects {} inputs, got {in_len}",
                        ws[1]
                    )));
                }
                if bias.shape() != [ws[0]] {
                    return Err(mismatch(format!(
                        "bias shape {:?} does not match {} outputs",
                        bias.shape(),
                        ws[0]
                    )));
                }
                Ok(vec![ws[0]])
            }
            LayerKind::Conv2d {
                weight,
                bias,
                stride,
                padding,
                input_hw,
            } => {
                let ws = weight.shape();
                if ws.len() != 4 || ws[2] != ws[3] {
                    return Err(mismatch(format!(
                        "conv weight must be [out, in, k, k], got {ws:?}"
                    )));
                }
                if *stride == 0 {
                    return Err(mismatch("conv stride must be at least 1".into()));
                }
                let (h, w) = *input_hw;
                if ws[1] * h * w != in_len {
                    return Err(mismatch(format!(
                        "conv expects [{}, {h}, {w}] input, got {input:?}",
                        ws[1]
                    )));
                }
                if bias.shape() != [ws[0]] {
                    return Err(mismatch(format!(
                        "bias shape {:?} does not match {} channels",
                        bias.shape(),
                        ws[0]
                    )));
                }
                let k = ws[2];
                if h + 2 * padding < k || w + 2 * padding < k {
                    return Err(mismatch(format!(
                        "kernel {k} larger than padded input {h}x{w}"
                    )));
                }
                let oh = (h + 2 * padding - k) / stride + 1;
                let ow = (w + 2 * padding - k) / stride + 1;
                Ok(vec![ws[0], oh, ow])
            }
            LayerKind::UpsampleNearest { factor } => {
                if *factor == 0 {
                    return Err(mismatch("upsample factor must be at least 1".into()));
                }
                if input.len() != 3 {
                    return Err(mismatch(format!(
                        "upsample expects a [c, h, w] input, got {input:?}"
                    )));
                }
                Ok(vec![input[0], input[1] * factor, input[2] * factor])
            }
        }
    }

    /// The layer's affine (or, with `with_bias = false`, linear) map.
    pub fn linear(&self, layer: usize, input: &Tensor, with_bias: bool) -> Result<Tensor> {
        let out_shape = self.output_shape(layer, input.shape())?;
        let x = input.data();
        let mut out = vec![0.0; out_shape.iter().product()];
        match &self.kind {
            LayerKind::Dense { weight, bias } => {
                let n_in = x.len();
                let w = weight.data();
                for (o, slot) in out.iter_mut().enumerate() {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let mut acc = if with_bias { bias.data()[o] } else { 0.0 };
                    for (wi, xi) in row.iter().zip(x) {
                        acc += wi * xi;
                    }
                    *slot = acc;
                }
            }
            LayerKind::Conv2d {
                weight,
                bias,
                stride,
                padding,
                input_hw: (h, w),
            } => {
                let ws = weight.shape();
                let (ic, k) = (ws[1], ws[2]);
                let (oh, ow) = (out_shape[1], out_shape[2]);
                let wd = weight.data();
                for (oc, &b) in bias.data().iter().enumerate() {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = if with_bias { b } else { 0.0 };
                            for c in 0..ic {
                                for ky in 0..k {
                                    let iy = (oy * stride + ky) as isize - *padding as isize;
                                    if iy < 0 || iy >= *h as isize {
                                        continue;
                                    }
                                    for kx in 0..k {
                                        let ix = (ox * stride + kx) as isize - *padding as isize;
                                        if ix < 0 || ix >= *w as isize {
                                            continue;
                                        }
                                        let wv = wd[((oc * ic + c) * k + ky) * k + kx];
                                        let xv = x[(c * h + iy as usize) * w + ix as usize];
                                        acc += wv * xv;
                                    }
                                }
                            }
                            out[(oc * oh + oy) * ow + ox] = acc;
                        }
                    }
                }
            }
            LayerKind::UpsampleNearest { factor } => {
                let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
                let (oh, ow) = (h * factor, w * factor);
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            out[(ch * oh + oy) * ow + ox] =
                                x[(ch * h + oy / factor) * w + ox / factor];
                        }
                    }
                }
            }
        }
        Tensor::new(out_shape, out)
    }

    pub fn activate(&self, pre: &Tensor) -> Tensor {
        let act = self.activation;
        let data = pre.data().iter().map(|&v| act.apply(v)).collect();
        Tensor::new(pre.shape().to_vec(), data).expect("shape preserved")
    }
}
