use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Modes evenly spaced on the unit circle.
    GaussianRing,
    /// Modes on a unit-spaced square grid centred at the origin.
    GaussianGrid,
    /// `3 x 8 x 8` images, one prototype shape/colour per mode, values in `[-1, 1]`.
    SyntheticShapes8x8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyDatasetSpec {
    pub kind: DatasetKind,
    pub modes: usize,
    pub sigma: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for ToyDatasetSpec {
    fn default() -> Self {
        Self {
            kind: DatasetKind::GaussianRing,
            modes: 8,
            sigma: 0.05,
            samples: 2000,
            seed: 0,
        }
    }
}

impl ToyDatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::InvalidConfig("dataset needs at least one mode".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dataset noise must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DatasetKind::GaussianRing | DatasetKind::GaussianGrid => 2,
            DatasetKind::SyntheticShapes8x8 => 3 * 64,
        }
    }

    /// Noise-free mode centres, in mode order.
    pub fn mode_centers(&self) -> Vec<Vec<f64>> {
        let m = self.modes;
        match self.kind {
            DatasetKind::GaussianRing => (0..m)
                .map(|k| {
                    let a = TAU * k as f64 / m as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect(),
            DatasetKind::GaussianGrid => {
                let side = (m as f64).sqrt().ceil() as usize;
                let half = (side as f64 - 1.0) / 2.0;
                (0..m)
                    .map(|k| vec![(k % side) as f64 - half, (k / side) as f64 - half])
                    .collect()
            }
            DatasetKind::SyntheticShapes8x8 => (0..m).map(shape_prototype).collect(),
        }
    }
}

const PALETTE: [[f64; 3]; 6] = [
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0],
];

fn shape_mask(shape: usize, r: usize, c: usize) -> bool {
    let (x, y) = (c as f64 - 3.5, r as f64 - 3.5);
    match shape {
        0 => (1..=6).contains(&r) && (1..=6).contains(&c),
        1 => r == 3 || r == 4 || c == 3 || c == 4,
        2 => x * x + y * y <= 9.0,
        _ => r == c || r + c == 7,
    }
}

fn shape_prototype(mode: usize) -> Vec<f64> {
    let shape = mode % 4;
    let color = PALETTE[(mode / 4) % PALETTE.len()];
    let mut img = vec![-1.0; 3 * 64];
    for (ch, &value) in color.iter().enumerate() {
        for r in 0..8 {
            for c in 0..8 {
                if shape_mask(shape, r, c) {
                    img[ch * 64 + r * 8 + c] = value;
                }
            }
        }
    }
    img
}

/// Draws `samples` points; sample `j` comes from mode `j mod modes`, so every
/// mode is represented as evenly as the count allows.
pub fn make_toy_dataset(spec: &ToyDatasetSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let centers = spec.mode_centers();
    let noise = Normal::new(0.0, spec.sigma).expect("sigma validated");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.samples)
        .map(|j| {
            centers[j % spec.modes]
                .iter()
                .map(|c| c + noise.sample(&mut rng))
                .collect()
        })
        .collect())
}

/// Number of modes with at least one sample within `3 sigma` (Euclidean).
pub fn mode_coverage(samples: &[Vec<f64>], centers: &[Vec<f64>], sigma: f64) -> usize {
    centers
        .iter()
        .filter(|c| {
            samples.iter().any(|s| {
                let d2: f64 = s.iter().zip(c.iter()).map(|(a, b)| (a - b).powi(2)).sum();
                d2.sqrt() <= 3.0 * sigma
            })
        })
        .count()
}

/// CSV with columns `x0..x{d-1}`.
pub fn write_dataset_csv<W: Write>(out: W, samples: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = samples.first().map_or(0, Vec::len);
    w.write_record((0..dim).map(|i| format!("x{i}")))?;
    for s in samples {
        w.write_record(s.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
