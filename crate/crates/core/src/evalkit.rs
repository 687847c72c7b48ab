//! k-NN manifold precision/recall, realism score and path length, all on
//! raw vectors with Euclidean distance. The distances stand in for learned
//! perceptual features, so every report carries `surrogate_distance: true`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::NetworkSpec;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Points of equal dimension with cached k-NN radii.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    points: Vec<Vec<f64>>,
    k: usize,
    radii: Vec<f64>,
}

impl FeatureSet {
    pub fn new(points: Vec<Vec<f64>>, k: usize) -> Result<Self> {
        let radii = knn_radii(&points, k)?;
        Ok(Self { points, k, radii })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Inside at least one k-NN ball of this set.
    pub fn covers(&self, x: &[f64]) -> bool {
        self.points
            .iter()
            .zip(&self.radii)
            .any(|(p, &r)| dist(p, x) <= r)
    }
}

/// Distance from each point to its `k`-th nearest other point.
pub fn knn_radii(points: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    if k == 0 || k >= points.len() {
        return Err(Error::InvalidConfig(format!(
            "k = {k} needs 1 <= k < set size ({})",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| p.len() != points[0].len()) {
        return Err(Error::InvalidConfig(format!(
            "mixed point dimensions {} and {}",
            points[0].len(),
            p.len()
        )));
    }
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| dist(p, q))
                .collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1]
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
}

/// Precision is the fraction of `fake` inside the real manifold; recall the
/// fraction of `real` inside the fake manifold.
pub fn precision_recall(real: &FeatureSet, fake: &FeatureSet) -> Result<PrecisionRecall> {
    let frac = |set: &FeatureSet, manifold: &FeatureSet| {
        set.points.iter().filter(|x| manifold.covers(x)).count() as f64 / set.points.len() as f64
    };
    Ok(PrecisionRecall {
        precision: frac(fake, real),
        recall: frac(real, fake),
    })
}

pub const REALISM_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealismScore {
    pub value: f64,
    /// The ratio was unbounded (coincident point) and was replaced by the cap.
    pub capped: bool,
}

/// `max_φ radius(φ) / |x - φ|` over the real points. A coincident point with
/// zero radius is skipped; one with positive radius caps the score.
pub fn realism_score(real: &FeatureSet, x: &[f64]) -> RealismScore {
    let mut best = 0.0f64;
    for (p, &r) in real.points.iter().zip(&real.radii) {
        let d = dist(p, x);
        if d == 0.0 {
            if r > 0.0 {
                return RealismScore {
                    value: REALISM_CAP,
                    capped: true,
                };
            }
            continue;
        }
        best = best.max(r / d);
    }
    if best > REALISM_CAP {
        RealismScore {
            value: REALISM_CAP,
            capped: true,
        }
    } else {
        RealismScore {
            value: best,
            capped: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub median: f64,
    pub capped: usize,
}

/// Mean and median realism over `xs`.
pub fn realism_summary(real: &FeatureSet, xs: &[Vec<f64>]) -> Result<SummaryStats> {
    if xs.is_empty() {
        return Err(Error::Empty("realism sample set".into()));
    }
    let scores: Vec<RealismScore> = xs.iter().map(|x| realism_score(real, x)).collect();
    let values: Vec<f64> = scores.iter().map(|s| s.value).collect();
    Ok(SummaryStats {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: median(&values),
        capped: scores.iter().filter(|s| s.capped).count(),
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Lerp,
    Slerp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PplConfig {
    pub epsilon: f64,
    pub pairs: usize,
    pub interpolation: Interpolation,
}

impl Default for PplConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            pairs: 1024,
            interpolation: Interpolation::Lerp,
        }
    }
}

impl PplConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "path length epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.pairs == 0 {
            return Err(Error::InvalidConfig("path length needs at least one pair".into()));
        }
        Ok(())
    }
}

/// One interpolation segment `(z1, z2, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PplPair {
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub t: f64,
}

pub fn interpolate(a: &[f64], b: &[f64], t: f64, how: Interpolation) -> Vec<f64> {
    match how {
        Interpolation::Lerp => a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect(),
        Interpolation::Slerp => {
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let cos = (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)).clamp(-1.0, 1.0);
            let omega = cos.acos();
            let s = omega.sin();
            if s.abs() < 1e-12 {
                return interpolate(a, b, t, Interpolation::Lerp);
            }
            let (wa, wb) = (((1.0 - t) * omega).sin() / s, (t * omega).sin() / s);
            a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
        }
    }
}

/// Standard-normal endpoints and `t ~ U[0, 1)` for `cfg.pairs` segments.
pub fn sample_ppl_pairs(latent_dim: usize, cfg: &PplConfig, seed: u64) -> Vec<PplPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..latent_dim).map(|_| rng.sample(StandardNormal)).collect()
    };
    (0..cfg.pairs)
        .map(|_| {
            let z1 = normal(&mut rng);
            let z2 = normal(&mut rng);
            let t = rng.random::<f64>();
            PplPair { z1, z2, t }
        })
        .collect()
}

/// `|G(interp(t + ε)) - G(interp(t))|^2 / ε^2` for every pair.
pub fn ppl_samples(net: &NetworkSpec, cfg: &PplConfig, pairs: &[PplPair]) -> Result<Vec<f64>> {
    cfg.validate()?;
    pairs
        .iter()
        .map(|p| {
            let a = net.output(&interpolate(&p.z1, &p.z2, p.t, cfg.interpolation))?;
            let b = net.output(&interpolate(&p.z1, &p.z2, p.t + cfg.epsilon, cfg.interpolation))?;
            let d2: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
            Ok(d2 / (cfg.epsilon * cfg.epsilon))
        })
        .collect()
}

/// Mean path length over freshly sampled pairs.
pub fn ppl(net: &NetworkSpec, cfg: &PplConfig, seed: u64) -> Result<f64> {
    cfg.validate()?;
    let pairs = sample_ppl_pairs(net.latent_dim, cfg, seed);
    let v = ppl_samples(net, cfg, &pairs)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Path length of short segments starting at given codes: each code `z` is
/// paired with a random partner `z2` and the segment is taken at `t = 0`.
pub fn local_ppl(
    net: &NetworkSpec,
    codes: &[Vec<f64>],
    cfg: &PplConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<PplPair> = codes
        .iter()
        .map(|z| PplPair {
            z1: z.clone(),
            z2: (0..z.len()).map(|_| rng.sample(StandardNormal)).collect(),
            t: 0.0,
        })
        .collect();
    ppl_samples(net, cfg, &pairs)
}

/// One entry of a metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub surrogate_distance: bool,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub value: f64,
    pub group: Option<String>,
}

impl MetricReport {
    pub fn new(metric: &str, value: f64, seed: u64) -> Self {
        Self {
            metric: metric.to_string(),
            surrogate_distance: true,
            k: None,
            epsilon: None,
            seed,
            value,
            group: None,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    pub fn with_group(mut self, group: &str) -> Self {
        self.group = Some(group.to_string());
        self
    }
}
