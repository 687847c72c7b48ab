//! Change points and curvature of local activation (CLA).
//!
//! For a neuron `g` and latent code `z0`, each latent axis `d` is scanned on
//! an even grid of `2n + 1` offsets over `[-R, R]` (the centre included).
//! The nearest zero crossing on each side is the change point; a side with no
//! crossing uses the search bound. The per-axis curvature is the difference of
//! the right and left secant slopes through `(p_l, z0, p_r)` divided by
//! `p_r - p_l`, and the CLA is its mean over axes.
//!
//! Crossings are located on the neuron's pre-activation, whose zero set is the
//! boundary of the post-activation zero set for relu and coincides with it for
//! leaky relu. A crossing inside a grid cell is placed by linear
//! interpolation, which is exact whenever the neuron is affine on that cell.
//! By definition the neuron value at an interior change point is zero, so the
//! curvature needs no evaluations beyond the grid.

mod export;

pub use export::{write_profiles_json, write_records_csv, profile_heatmap_svg};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::{NetworkSpec, NeuronSite, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Search bound `R`.
    pub search_bound: f64,
    /// Grid points on each side of the centre.
    pub grid_divisions: usize,
    /// Values with magnitude at or below this count as zero.
    pub zero_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            search_bound: 30.0,
            grid_divisions: 20,
            zero_tol: 1e-9,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.search_bound > 0.0 && self.search_bound.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "search bound must be positive, got {}",
                self.search_bound
            )));
        }
        if self.grid_divisions < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid_divisions must be at least 2, got {}",
                self.grid_divisions
            )));
        }
        if !(self.zero_tol >= 0.0) {
            return Err(Error::InvalidConfig("zero tolerance must be >= 0".into()));
        }
        Ok(())
    }

    /// Grid offsets `-R, ..., 0, ..., R` (length `2n + 1`, centre at index `n`).
    pub fn offsets(&self) -> Vec<f64> {
        let n = self.grid_divisions as i64;
        let r = self.search_bound;
        (-n..=n)
            .map(|k| match k {
                k if k == n => r,
                k if k == -n => -r,
                k => k as f64 * r / n as f64,
            })
            .collect()
    }

    /// Forward passes spent by one `cla`/`layer_cla` call on `latent_dim` axes:
    /// the shared centre plus `2n` off-centre samples per axis.
    pub fn forward_passes(&self, latent_dim: usize) -> usize {
        1 + latent_dim * 2 * self.grid_divisions
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePointPair {
    pub left: f64,
    pub right: f64,
    pub left_is_bound: bool,
    pub right_is_bound: bool,
}

/// CLA of one neuron at one latent code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaRecord {
    pub latent_id: u64,
    pub site: NeuronSite,
    /// Post-activation at `z0`.
    pub activation: f64,
    /// Mean of `axes`.
    pub mean: f64,
    /// Per-axis curvature, indexed by latent axis.
    pub axes: Vec<f64>,
}

impl ClaRecord {
    fn new(latent_id: u64, site: NeuronSite, activation: f64, axes: Vec<f64>) -> Self {
        let mean = axes.iter().sum::<f64>() / axes.len() as f64;
        Self {
            latent_id,
            site,
            activation,
            mean,
            axes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProbeStats {
    /// Network evaluations up to the probed layer.
    pub forward_passes: usize,
}

/// Sampled activation along one latent axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationProfile {
    pub site: NeuronSite,
    pub axis: usize,
    pub offsets: Vec<f64>,
    pub values: Vec<f64>,
}

/// Grid samples of every neuron of one layer along every axis.
struct LayerScan {
    center_post: Tensor,
    /// `axes[d][k]` is the `(pre, post)` layer activation at offset `k`.
    axes: Vec<Vec<(Tensor, Tensor)>>,
    forward_passes: usize,
}

fn check_probe_site(net: &NetworkSpec, layer: usize, cfg: &ProbeConfig) -> Result<()> {
    cfg.validate()?;
    let spec = net.layer(layer)?;
    if !spec.activation.is_rectifier() {
        return Err(Error::UnsupportedActivation {
            layer,
            activation: spec.activation.to_string(),
        });
    }
    Ok(())
}

fn check_axis(net: &NetworkSpec, axis: usize) -> Result<()> {
    if axis >= net.latent_dim {
        return Err(Error::InvalidConfig(format!(
            "axis {axis} out of range for latent dimension {}",
            net.latent_dim
        )));
    }
    Ok(())
}

fn scan_axis(
    net: &NetworkSpec,
    layer: usize,
    z0: &[f64],
    axis: usize,
    offsets: &[f64],
    center: &(Tensor, Tensor),
) -> Result<Vec<(Tensor, Tensor)>> {
    let n = offsets.len() / 2;
    let mut z = z0.to_vec();
    offsets
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            if k == n {
                return Ok(center.clone());
            }
            z[axis] = z0[axis] + r;
            net.forward_to(&z, layer)
        })
        .collect()
}

fn scan_layer(
    net: &NetworkSpec,
    layer: usize,
    z0: &[f64],
    cfg: &ProbeConfig,
    axes: &[usize],
    parallel: bool,
) -> Result<LayerScan> {
    let offsets = cfg.offsets();
    let center = net.forward_to(z0, layer)?;
    let axes: Vec<_> = if parallel {
        axes.par_iter()
            .map(|&d| scan_axis(net, layer, z0, d, &offsets, &center))
            .collect::<Result<_>>()?
    } else {
        axes.iter()
            .map(|&d| scan_axis(net, layer, z0, d, &offsets, &center))
            .collect::<Result<_>>()?
    };
    Ok(LayerScan {
        forward_passes: 1 + axes.len() * (offsets.len() - 1),
        center_post: center.1,
        axes,
    })
}

/// Change points from the pre-activation samples of one neuron on the grid.
fn change_points_from_samples(
    offsets: &[f64],
    pre: &[f64],
    center_value: f64,
    cfg: &ProbeConfig,
) -> ChangePointPair {
    if center_value.abs() <= cfg.zero_tol {
        return ChangePointPair {
            left: 0.0,
            right: 0.0,
            left_is_bound: false,
            right_is_bound: false,
        };
    }
    let n = offsets.len() / 2;
    let crossing = |from: usize, to: usize| -> f64 {
        let (a, b) = (pre[from], pre[to]);
        if b.abs() <= cfg.zero_tol {
            return offsets[to];
        }
        offsets[from] + (offsets[to] - offsets[from]) * a / (a - b)
    };
    let straddles = |prev: f64, v: f64| v.abs() <= cfg.zero_tol || (v > 0.0) != (prev > 0.0);

    let mut right = None;
    for k in n + 1..offsets.len() {
        if straddles(pre[k - 1], pre[k]) {
            right = Some(crossing(k - 1, k));
            break;
        }
    }
    let mut left = None;
    for k in (0..n).rev() {
        if straddles(pre[k + 1], pre[k]) {
            left = Some(crossing(k + 1, k));
            break;
        }
    }
    let bound = cfg.search_bound;
    ChangePointPair {
        left: left.unwrap_or(-bound).clamp(-bound, 0.0),
        right: right.unwrap_or(bound).clamp(0.0, bound),
        left_is_bound: left.is_none(),
        right_is_bound: right.is_none(),
    }
}

/// Secant-slope curvature through the change points, given the neuron's value
/// at the centre and (when a change point is the bound) at the bounds.
fn curvature(cp: &ChangePointPair, center: f64, left_value: f64, right_value: f64, tol: f64) -> f64 {
    let width = cp.right - cp.left;
    if center.abs() <= tol || width < tol || cp.right.abs() < tol || cp.left.abs() < tol {
        return 0.0;
    }
    let gr = if cp.right_is_bound { right_value } else { 0.0 };
    let gl = if cp.left_is_bound { left_value } else { 0.0 };
    let right_slope = (gr - center) / cp.right;
    let left_slope = (gl - center) / cp.left;
    (right_slope - left_slope) / width
}

fn axis_from_scan(
    samples: &[(Tensor, Tensor)],
    flat: usize,
    offsets: &[f64],
    center_value: f64,
    cfg: &ProbeConfig,
) -> (ChangePointPair, f64) {
    let pre: Vec<f64> = samples.iter().map(|(p, _)| p.data()[flat]).collect();
    let cp = change_points_from_samples(offsets, &pre, center_value, cfg);
    let last = samples.len() - 1;
    let c = curvature(
        &cp,
        center_value,
        samples[0].1.data()[flat],
        samples[last].1.data()[flat],
        cfg.zero_tol,
    );
    (cp, c)
}

fn layer_flat_index(net: &NetworkSpec, site: NeuronSite) -> Result<usize> {
    let shapes = net.layer_shapes()?;
    site.flat_index(&shapes[site.layer - 1])
}

/// Left/right change points of `site` along latent axis `axis` around `z0`.
pub fn find_change_points(
    net: &NetworkSpec,
    site: NeuronSite,
    z0: &[f64],
    axis: usize,
    cfg: &ProbeConfig,
) -> Result<ChangePointPair> {
    check_probe_site(net, site.layer, cfg)?;
    check_axis(net, axis)?;
    let flat = layer_flat_index(net, site)?;
    let scan = scan_layer(net, site.layer, z0, cfg, &[axis], false)?;
    let center_value = scan.center_post.data()[flat];
    Ok(axis_from_scan(&scan.axes[0], flat, &cfg.offsets(), center_value, cfg).0)
}

/// Curvature `C(d, z0)` for given change points. The neuron is evaluated at
/// `z0` and at any change point that is a search bound; interior change
/// points are zeros of the neuron.
pub fn axis_curvature(
    net: &NetworkSpec,
    site: NeuronSite,
    z0: &[f64],
    axis: usize,
    cp: &ChangePointPair,
    cfg: &ProbeConfig,
) -> Result<f64> {
    check_probe_site(net, site.layer, cfg)?;
    check_axis(net, axis)?;
    let center = net.neuron_value(z0, site)?;
    let at = |r: f64| -> Result<f64> {
        let mut z = z0.to_vec();
        z[axis] += r;
        net.neuron_value(&z, site)
    };
    let right_value = if cp.right_is_bound { at(cp.right)? } else { 0.0 };
    let left_value = if cp.left_is_bound { at(cp.left)? } else { 0.0 };
    Ok(curvature(cp, center, left_value, right_value, cfg.zero_tol))
}

/// CLA of one neuron at `z0`, with the number of forward passes it took.
pub fn cla_with_stats(
    net: &NetworkSpec,
    site: NeuronSite,
    z0: &[f64],
    latent_id: u64,
    cfg: &ProbeConfig,
) -> Result<(ClaRecord, ProbeStats)> {
    check_probe_site(net, site.layer, cfg)?;
    let flat = layer_flat_index(net, site)?;
    let axes: Vec<usize> = (0..net.latent_dim).collect();
    let scan = scan_layer(net, site.layer, z0, cfg, &axes, false)?;
    let offsets = cfg.offsets();
    let center_value = scan.center_post.data()[flat];
    let curvatures = scan
        .axes
        .iter()
        .map(|s| axis_from_scan(s, flat, &offsets, center_value, cfg).1)
        .collect();
    Ok((
        ClaRecord::new(latent_id, site, center_value, curvatures),
        ProbeStats {
            forward_passes: scan.forward_passes,
        },
    ))
}

pub fn cla(
    net: &NetworkSpec,
    site: NeuronSite,
    z0: &[f64],
    latent_id: u64,
    cfg: &ProbeConfig,
) -> Result<ClaRecord> {
    Ok(cla_with_stats(net, site, z0, latent_id, cfg)?.0)
}

fn layer_cla_impl(
    net: &NetworkSpec,
    layer: usize,
    z0: &[f64],
    latent_id: u64,
    cfg: &ProbeConfig,
    parallel: bool,
) -> Result<Vec<ClaRecord>> {
    check_probe_site(net, layer, cfg)?;
    let axes: Vec<usize> = (0..net.latent_dim).collect();
    let scan = scan_layer(net, layer, z0, cfg, &axes, parallel)?;
    let offsets = cfg.offsets();
    let shape = scan.center_post.shape().to_vec();
    let record = |flat: usize| {
        let center_value = scan.center_post.data()[flat];
        let curvatures = scan
            .axes
            .iter()
            .map(|s| axis_from_scan(s, flat, &offsets, center_value, cfg).1)
            .collect();
        ClaRecord::new(
            latent_id,
            NeuronSite::from_flat(layer, &shape, flat),
            center_value,
            curvatures,
        )
    };
    let n = scan.center_post.len();
    Ok(if parallel {
        (0..n).into_par_iter().map(record).collect()
    } else {
        (0..n).map(record).collect()
    })
}

/// CLA of every neuron of `layer` at `z0`, in row-major site order.
pub fn layer_cla(
    net: &NetworkSpec,
    layer: usize,
    z0: &[f64],
    latent_id: u64,
    cfg: &ProbeConfig,
) -> Result<Vec<ClaRecord>> {
    layer_cla_impl(net, layer, z0, latent_id, cfg, false)
}

/// [`layer_cla`] with axes and neurons evaluated on the rayon pool. Results
/// are merged in axis and site order, so they equal the sequential output.
pub fn layer_cla_parallel(
    net: &NetworkSpec,
    layer: usize,
    z0: &[f64],
    latent_id: u64,
    cfg: &ProbeConfig,
) -> Result<Vec<ClaRecord>> {
    layer_cla_impl(net, layer, z0, latent_id, cfg, true)
}

/// The grid samples `(r, g(z0 + r e_d))` used by the change-point search.
pub fn activation_profile(
    net: &NetworkSpec,
    site: NeuronSite,
    z0: &[f64],
    axis: usize,
    cfg: &ProbeConfig,
) -> Result<ActivationProfile> {
    check_probe_site(net, site.layer, cfg)?;
    check_axis(net, axis)?;
    let flat = layer_flat_index(net, site)?;
    let scan = scan_layer(net, site.layer, z0, cfg, &[axis], false)?;
    Ok(ActivationProfile {
        site,
        axis,
        offsets: cfg.offsets(),
        values: scan.axes[0].iter().map(|(_, p)| p.data()[flat]).collect(),
    })
}
