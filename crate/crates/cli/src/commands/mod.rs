pub mod correct;
pub mod detect;
pub mod eval;
pub mod geometry;
pub mod plant;
pub mod sweep;
pub mod train;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::path::Path;

use cla_core::NetworkSpec;

use crate::config::config_error;

pub fn load_model(path: &Path) -> Result<NetworkSpec> {
    cla_core::netcore::read_model(path).with_context(|| format!("loading model {}", path.display()))
}

/// `n` standard-normal codes from `seed`. With a truncation threshold each
/// component is redrawn until its magnitude is within the threshold.
pub fn sample_codes(n: usize, dim: usize, seed: u64, truncation: Option<f64>) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| loop {
                    let v: f64 = rng.sample(StandardNormal);
                    match truncation {
                        Some(t) if v.abs() > t => continue,
                        _ => break v,
                    }
                })
                .collect()
        })
        .collect()
}

/// Fails with a config error unless `layer` is a rectifier layer of `net`.
pub fn check_probe_layer(net: &NetworkSpec, layer: usize, what: &str) -> Result<()> {
    let spec = net.layer(layer).map_err(|_| {
        config_error(format!(
            "{what} {layer} is outside the model (depth {})",
            net.depth()
        ))
    })?;
    if !spec.activation.is_rectifier() {
        return Err(config_error(format!(
            "{what} {layer} has activation {}, CLA needs relu or leaky relu",
            spec.activation
        )));
    }
    Ok(())
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_codes_stay_in_bounds() {
        let codes = sample_codes(200, 3, 1, Some(0.5));
        assert!(codes.iter().flatten().all(|v| v.abs() <= 0.5));
        assert_eq!(sample_codes(5, 2, 9, None), sample_codes(5, 2, 9, None));
    }
}
