//! Per-sample linearization of a generator/discriminator pair and the
//! single-step SGD analysis of a generator neuron.
//!
//! At an anchor `z0` every piecewise-linear layer acts as a fixed affine map
//! once each neuron's slope (1 on the active side, `γ` otherwise) is frozen.
//! Splitting the generator after layer `l` gives
//!
//! ```text
//! x = W_G h_l + o_G           (generator tail, layers l+1..L)
//! y = W_D x + o_D             (whole discriminator)
//! y = sum_i (W_D W_G)_i h_{l,i} + W_D o_G + o_D
//! ```
//!
//! where the `i`-th summand is the neuron's contribution. Biases are carried
//! as explicit offsets instead of a homogeneous coordinate.
//!
//! For the saturating generator loss `log(1 - f(D(G(z))))` with sigmoid `f`,
//! one SGD step on `z0` moves neuron `i`'s incoming weights by `δ_i h_{l-1}`
//! and its bias by `δ_i`, with `δ_i = η c0 f'(y) (W_D W_G)_i s_i`,
//! `c0 = 1 / (1 - f(y))` and `s_i` the neuron's own slope (1 when active).

mod matrix;

use serde::{Deserialize, Serialize};
use std::io::Write;

pub use matrix::Matrix;

use crate::error::{Error, Result};
use crate::netcore::{ForwardTrace, LayerKind, NetworkSpec, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub anchor: Vec<f64>,
    pub split_layer: usize,
    /// `h_{l-1}` at the anchor.
    pub h_prev: Vec<f64>,
    /// `h_l` at the anchor.
    pub h_split: Vec<f64>,
    /// Slopes of the split layer's neurons at the anchor.
    pub split_slopes: Vec<f64>,
    /// Slope masks of generator layers `l+1..L`.
    pub gen_masks: Vec<Vec<f64>>,
    /// Slope masks of every discriminator layer.
    pub disc_masks: Vec<Vec<f64>>,
    /// `W_G`, shape `D_x x D_l`.
    pub gen_matrix: Matrix,
    pub gen_offset: Vec<f64>,
    /// `W_D` as a row of length `D_x`.
    pub disc_row: Vec<f64>,
    pub disc_offset: f64,
    /// `D(G(z0))` from the exact forward passes.
    pub exact_output: f64,
}

impl Linearization {
    /// `W_D W_G`, one entry per split-layer neuron.
    pub fn neuron_weights(&self) -> Vec<f64> {
        self.gen_matrix.left_mul_row(&self.disc_row)
    }

    /// Generator output predicted by the linear tail.
    pub fn generated(&self, h_split: &[f64]) -> Vec<f64> {
        let mut x = self.gen_matrix.mul_vec(h_split);
        for (v, o) in x.iter_mut().zip(&self.gen_offset) {
            *v += o;
        }
        x
    }

    /// Linearized discriminator output `ȳ` for a split-layer activation.
    pub fn output(&self, h_split: &[f64]) -> f64 {
        dot(&self.disc_row, &self.generated(h_split)) + self.disc_offset
    }

    /// Offset part of `ȳ` not attributed to any split-layer neuron.
    pub fn offset_term(&self) -> f64 {
        dot(&self.disc_row, &self.gen_offset) + self.disc_offset
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn slopes(net: &NetworkSpec, trace: &ForwardTrace, layer: usize) -> Result<Vec<f64>> {
    let spec = net.layer(layer)?;
    trace.pre[layer - 1]
        .data()
        .iter()
        .map(|&p| {
            spec.activation
                .local_slope(p)
                .ok_or_else(|| Error::UnsupportedActivation {
                    layer,
                    activation: spec.activation.to_string(),
                })
        })
        .collect()
}

/// The linear part of `layer` as an explicit matrix, built column by column
/// from basis inputs of shape `in_shape`.
fn layer_matrix(net: &NetworkSpec, layer: usize, in_shape: &[usize]) -> Result<Matrix> {
    let spec = net.layer(layer)?;
    let n_in: usize = in_shape.iter().product();
    let mut cols = Vec::with_capacity(n_in);
    let mut basis = Tensor::zeros(in_shape.to_vec());
    for j in 0..n_in {
        basis.data_mut()[j] = 1.0;
        cols.push(spec.linear(layer, &basis, false)?.into_data());
        basis.data_mut()[j] = 0.0;
    }
    Ok(Matrix::from_columns(&cols))
}

fn layer_bias(net: &NetworkSpec, layer: usize, in_shape: &[usize]) -> Result<Vec<f64>> {
    let spec = net.layer(layer)?;
    Ok(spec
        .linear(layer, &Tensor::zeros(in_shape.to_vec()), true)?
        .into_data())
}

/// Composes layers `first..=last` of `net` into `(matrix, offset, masks)`
/// under the slope pattern of `trace`.
fn compose(
    net: &NetworkSpec,
    trace: &ForwardTrace,
    first: usize,
    last: usize,
) -> Result<(Matrix, Vec<f64>, Vec<Vec<f64>>)> {
    let in_len = trace.activation(first - 1).len();
    let mut m = Matrix::identity(in_len);
    let mut offset = vec![0.0; in_len];
    let mut masks = Vec::new();
    for k in first..=last {
        let in_shape = trace.activation(k - 1).shape().to_vec();
        let a = layer_matrix(net, k, &in_shape)?;
        let b = layer_bias(net, k, &in_shape)?;
        let s = slopes(net, trace, k)?;
        m = a.mul(&m).scale_rows(&s);
        offset = a
            .mul_vec(&offset)
            .iter()
            .zip(&b)
            .zip(&s)
            .map(|((v, bi), si)| si * (v + bi))
            .collect();
        masks.push(s);
    }
    Ok((m, offset, masks))
}

/// Linearizes `disc ∘ gen` at `z0`, splitting the generator after `split_layer`.
pub fn linearize(
    gen: &NetworkSpec,
    disc: &NetworkSpec,
    z0: &[f64],
    split_layer: usize,
) -> Result<Linearization> {
    gen.layer(split_layer)?;
    let gen_trace = gen.forward_trace(z0)?;
    let x = gen_trace.output().data().to_vec();
    let disc_trace = disc.forward_trace(&x)?;

    let (gen_matrix, gen_offset, gen_masks) = if split_layer == gen.depth() {
        let n = x.len();
        (Matrix::identity(n), vec![0.0; n], Vec::new())
    } else {
        compose(gen, &gen_trace, split_layer + 1, gen.depth())?
    };
    let (disc_matrix, disc_offset, disc_masks) = compose(disc, &disc_trace, 1, disc.depth())?;
    Ok(Linearization {
        anchor: z0.to_vec(),
        split_layer,
        h_prev: gen_trace.activation(split_layer - 1).data().to_vec(),
        h_split: gen_trace.activation(split_layer).data().to_vec(),
        split_slopes: slopes(gen, &gen_trace, split_layer)?,
        gen_masks,
        disc_masks,
        gen_matrix,
        gen_offset,
        disc_row: disc_matrix.row(0).to_vec(),
        disc_offset: disc_offset[0],
        exact_output: disc_trace.output().data()[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignClass {
    Positive,
    Negative,
    Zero,
}

impl SignClass {
    fn of(x: f64) -> Self {
        if x > 0.0 {
            SignClass::Positive
        } else if x < 0.0 {
            SignClass::Negative
        } else {
            SignClass::Zero
        }
    }
}

/// The four `(sign h_{l,i}, sign δ_i)` update geometries. A zero `δ` counts
/// with the positive-contribution case of its activation sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateCase {
    /// `h > 0, δ >= 0`: positive contribution.
    PositiveActivationPositiveDelta,
    /// `h > 0, δ < 0`: negative contribution.
    PositiveActivationNegativeDelta,
    /// `h < 0, δ > 0`: negative contribution.
    NegativeActivationPositiveDelta,
    /// `h < 0, δ <= 0`: positive contribution.
    NegativeActivationNegativeDelta,
}

impl UpdateCase {
    pub const ALL: [UpdateCase; 4] = [
        UpdateCase::PositiveActivationPositiveDelta,
        UpdateCase::PositiveActivationNegativeDelta,
        UpdateCase::NegativeActivationPositiveDelta,
        UpdateCase::NegativeActivationNegativeDelta,
    ];

    pub fn classify(activation: f64, delta: f64) -> Option<Self> {
        if activation > 0.0 {
            Some(if delta < 0.0 {
                UpdateCase::PositiveActivationNegativeDelta
            } else {
                UpdateCase::PositiveActivationPositiveDelta
            })
        } else if activation < 0.0 {
            Some(if delta > 0.0 {
                UpdateCase::NegativeActivationPositiveDelta
            } else {
                UpdateCase::NegativeActivationNegativeDelta
            })
        } else {
            None
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_negative_contribution(self) -> bool {
        matches!(
            self,
            UpdateCase::PositiveActivationNegativeDelta | UpdateCase::NegativeActivationPositiveDelta
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            UpdateCase::PositiveActivationPositiveDelta => "pos_act_pos_delta",
            UpdateCase::PositiveActivationNegativeDelta => "pos_act_neg_delta",
            UpdateCase::NegativeActivationPositiveDelta => "neg_act_pos_delta",
            UpdateCase::NegativeActivationNegativeDelta => "neg_act_neg_delta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionRecord {
    pub neuron: usize,
    /// `(W_D W_G)_i h_{l,i}`.
    pub contribution: f64,
    pub sign: SignClass,
    /// `None` when the neuron's activation is exactly zero.
    pub case: Option<UpdateCase>,
}

/// Per-neuron contributions to `ȳ` for the split-layer activation `h_split`.
pub fn contributions(lin: &Linearization, h_split: &[f64]) -> Result<Vec<ContributionRecord>> {
    if h_split.len() != lin.gen_matrix.cols() {
        return Err(Error::ShapeMismatch {
            layer: lin.split_layer,
            detail: format!(
                "activation has {} entries, linearization expects {}",
                h_split.len(),
                lin.gen_matrix.cols()
            ),
        });
    }
    let weights = lin.neuron_weights();
    Ok(h_split
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let contribution = weights[i] * h;
            // sign of δ_i is the sign of the neuron weight times its slope
            let delta_sign = weights[i] * lin.split_slopes[i];
            ContributionRecord {
                neuron: i,
                contribution,
                sign: SignClass::of(contribution),
                case: UpdateCase::classify(h, delta_sign),
            }
        })
        .collect())
}

pub fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateSimResult {
    pub neuron: usize,
    pub learning_rate: f64,
    pub delta: f64,
    pub weight: Vec<f64>,
    pub weight_plus: Vec<f64>,
    pub bias: f64,
    pub bias_plus: f64,
    pub h_prev: Vec<f64>,
    pub pre_activation: f64,
    pub pre_activation_plus: f64,
    pub activation: f64,
    pub activation_plus: f64,
    /// `|w·h_{l-1} + b| / |w|`, distance of `h_{l-1}` to the neuron's boundary.
    pub distance: f64,
    pub distance_plus: f64,
}

impl UpdateSimResult {
    pub fn case(&self) -> Option<UpdateCase> {
        UpdateCase::classify(self.activation, self.delta)
    }

    /// Largest learning rate for which the update cannot flip the sign of the
    /// pre-activation: `|w·h + b| / (|δ/η| (|h|^2 + 1))`.
    pub fn eta_threshold(&self) -> f64 {
        let per_eta = (self.delta / self.learning_rate).abs();
        let norm2 = dot(&self.h_prev, &self.h_prev) + 1.0;
        if per_eta == 0.0 {
            f64::INFINITY
        } else {
            self.pre_activation.abs() / (per_eta * norm2)
        }
    }
}

fn dense_row(gen: &NetworkSpec, layer: usize, neuron: usize) -> Result<(Vec<f64>, f64)> {
    match &gen.layer(layer)?.kind {
        LayerKind::Dense { weight, bias } => {
            let n_out = weight.shape()[0];
            if neuron >= n_out {
                return Err(Error::InvalidUnit {
                    unit: neuron,
                    layer,
                    available: n_out,
                });
            }
            let n_in = weight.shape()[1];
            Ok((
                weight.data()[neuron * n_in..(neuron + 1) * n_in].to_vec(),
                bias.data()[neuron],
            ))
        }
        _ => Err(Error::InvalidConfig(format!(
            "update simulation needs a dense layer; layer {layer} is {}",
            gen.layers[layer - 1].kind_name()
        ))),
    }
}

/// `η c0 f'(y)`, the common factor of every `δ_i` at this anchor.
fn update_scale(lin: &Linearization, learning_rate: f64) -> Result<f64> {
    let y = lin.exact_output;
    let fy = sigmoid(y);
    if 1.0 - fy == 0.0 {
        return Err(Error::SingularC0 { y });
    }
    let c0 = 1.0 / (1.0 - fy);
    let y_bar = lin.output(&lin.h_split);
    let fb = sigmoid(y_bar);
    Ok(learning_rate * c0 * fb * (1.0 - fb))
}

fn simulate_with(
    gen: &NetworkSpec,
    lin: &Linearization,
    weights: &[f64],
    scale: f64,
    neuron: usize,
    learning_rate: f64,
) -> Result<UpdateSimResult> {
    let layer = lin.split_layer;
    let (w, b) = dense_row(gen, layer, neuron)?;
    let act = gen.layers[layer - 1].activation;
    let h = &lin.h_prev;
    let delta = scale * weights[neuron] * lin.split_slopes[neuron];
    let w_plus: Vec<f64> = w.iter().zip(h).map(|(wi, hi)| wi + delta * hi).collect();
    let b_plus = b + delta;
    let pre = dot(&w, h) + b;
    let pre_plus = dot(&w_plus, h) + b_plus;
    let norm = |v: &[f64]| dot(v, v).sqrt();
    Ok(UpdateSimResult {
        neuron,
        learning_rate,
        delta,
        distance: pre.abs() / norm(&w),
        distance_plus: pre_plus.abs() / norm(&w_plus),
        weight: w,
        weight_plus: w_plus,
        bias: b,
        bias_plus: b_plus,
        h_prev: h.clone(),
        pre_activation: pre,
        pre_activation_plus: pre_plus,
        activation: act.apply(pre),
        activation_plus: act.apply(pre_plus),
    })
}

/// One linearized SGD step of the generator loss on `z0` for neuron `neuron`
/// of dense layer `layer`.
pub fn simulate_update(
    gen: &NetworkSpec,
    disc: &NetworkSpec,
    z0: &[f64],
    layer: usize,
    neuron: usize,
    learning_rate: f64,
) -> Result<UpdateSimResult> {
    if !(learning_rate > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    let lin = linearize(gen, disc, z0, layer)?;
    let scale = update_scale(&lin, learning_rate)?;
    simulate_with(gen, &lin, &lin.neuron_weights(), scale, neuron, learning_rate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: UpdateCase,
    pub count: usize,
    /// Mean of `distance_plus - distance`, `None` for an empty case.
    pub mean_distance_delta: Option<f64>,
    /// Mean of `|h⁺| - |h|`.
    pub mean_activation_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseHistogram {
    pub split_layer: usize,
    pub learning_rate: f64,
    pub cases: Vec<CaseSummary>,
    /// Neurons with non-zero activation.
    pub active: usize,
    pub updates: Vec<UpdateSimResult>,
}

impl CaseHistogram {
    pub fn count(&self, case: UpdateCase) -> usize {
        self.cases[case.index()].count
    }
}

/// Simulates the update of every non-zero neuron of `layer` and tallies the
/// four update cases.
pub fn classify_update_cases(
    gen: &NetworkSpec,
    disc: &NetworkSpec,
    z0: &[f64],
    layer: usize,
    learning_rate: f64,
) -> Result<CaseHistogram> {
    if !(learning_rate > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    let lin = linearize(gen, disc, z0, layer)?;
    let scale = update_scale(&lin, learning_rate)?;
    let weights = lin.neuron_weights();
    let mut updates = Vec::new();
    for (i, &h) in lin.h_split.iter().enumerate() {
        if h != 0.0 {
            updates.push(simulate_with(gen, &lin, &weights, scale, i, learning_rate)?);
        }
    }
    let cases = UpdateCase::ALL
        .iter()
        .map(|&case| {
            let members: Vec<&UpdateSimResult> =
                updates.iter().filter(|u| u.case() == Some(case)).collect();
            let mean = |f: &dyn Fn(&UpdateSimResult) -> f64| {
                (!members.is_empty())
                    .then(|| members.iter().map(|u| f(u)).sum::<f64>() / members.len() as f64)
            };
            CaseSummary {
                case,
                count: members.len(),
                mean_distance_delta: mean(&|u| u.distance_plus - u.distance),
                mean_activation_delta: mean(&|u| u.activation_plus.abs() - u.activation.abs()),
            }
        })
        .collect();
    Ok(CaseHistogram {
        split_layer: layer,
        learning_rate,
        active: updates.len(),
        cases,
        updates,
    })
}

/// CSV with columns `neuron, contribution, case, delta_activation, delta_distance`.
pub fn write_contributions_csv<W: Write>(
    out: W,
    records: &[ContributionRecord],
    updates: &[UpdateSimResult],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "neuron",
        "contribution",
        "case",
        "delta_activation",
        "delta_distance",
    ])?;
    for r in records {
        let u = updates.iter().find(|u| u.neuron == r.neuron);
        w.write_record([
            r.neuron.to_string(),
            r.contribution.to_string(),
            r.case.map(UpdateCase::name).unwrap_or("none").to_string(),
            u.map(|u| (u.activation_plus - u.activation).to_string())
                .unwrap_or_default(),
            u.map(|u| (u.distance_plus - u.distance).to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
