//! Per-sample artifact score and group selection.
//!
//! The score of a latent code at layer `l` sums, over the layer's neurons,
//! the concavity of positively activated neurons and the convexity of
//! negatively activated ones:
//!
//! ```text
//! S_l(z) = sum_i | min(C_i, 0) * sign(max(h_i, 0)) + max(C_i, 0) * sign(min(h_i, 0)) |
//! ```
//!
//! with `sign(0) = 0`, so at most one of the two terms is non-zero per neuron.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::probe::ClaRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub latent_id: u64,
    pub layer: usize,
    pub score: f64,
    /// Neurons with a non-zero term.
    pub contributing: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    HighCla,
    LowCla,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSelection {
    pub kind: GroupKind,
    pub members: Vec<u64>,
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Groups {
    pub high: GroupSelection,
    pub low: GroupSelection,
    pub random: GroupSelection,
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Contribution of one neuron to the score.
pub fn neuron_term(cla_mean: f64, activation: f64) -> f64 {
    (cla_mean.min(0.0) * sign0(activation.max(0.0)) + cla_mean.max(0.0) * sign0(activation.min(0.0)))
        .abs()
}

pub fn sample_score(records: &[ClaRecord]) -> Result<SampleScore> {
    let first = records
        .first()
        .ok_or_else(|| Error::Empty("no records to score".into()))?;
    let mut score = 0.0;
    let mut contributing = 0;
    for r in records {
        if r.latent_id != first.latent_id {
            return Err(Error::MixedLatentIds {
                first: first.latent_id,
                other: r.latent_id,
            });
        }
        if r.site.layer != first.site.layer {
            return Err(Error::MixedLayers {
                first: first.site.layer,
                other: r.site.layer,
            });
        }
        let t = neuron_term(r.mean, r.activation);
        if t > 0.0 {
            contributing += 1;
        }
        score += t;
    }
    Ok(SampleScore {
        latent_id: first.latent_id,
        layer: first.site.layer,
        score,
        contributing,
    })
}

/// Number of samples a fraction selects out of `n`.
pub fn group_size(n: usize, fraction: f64) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Sorts by score (descending, ties by ascending latent id) and picks the top
/// and bottom `fraction`, plus a seeded random group of the same size drawn
/// without replacement from the whole pool.
pub fn rank_and_select(scores: &[SampleScore], fraction: f64, seed: u64) -> Result<Groups> {
    if scores.is_empty() {
        return Err(Error::Empty("no scores to rank".into()));
    }
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(Error::InvalidConfig(format!(
            "fraction must be in (0, 0.5], got {fraction}"
        )));
    }
    let count = group_size(scores.len(), fraction);
    if count == 0 {
        return Err(Error::InvalidConfig(format!(
            "fraction {fraction} of {} samples selects nothing",
            scores.len()
        )));
    }
    let mut ranked: Vec<&SampleScore> = scores.iter().collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.latent_id.cmp(&b.latent_id))
    });
    let high = ranked[..count].iter().map(|s| s.latent_id).collect();
    let low = ranked[ranked.len() - count..]
        .iter()
        .rev()
        .map(|s| s.latent_id)
        .collect();

    let mut pool: Vec<u64> = scores.iter().map(|s| s.latent_id).collect();
    pool.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = rand::seq::index::sample(&mut rng, pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect();

    let group = |kind, members| GroupSelection {
        kind,
        members,
        fraction,
        seed,
    };
    Ok(Groups {
        high: group(GroupKind::HighCla, high),
        low: group(GroupKind::LowCla, low),
        random: group(GroupKind::Random, random),
    })
}

/// CSV with columns `latent_id, layer, score`.
pub fn write_scores_csv<W: Write>(out: W, scores: &[SampleScore]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["latent_id", "layer", "score"])?;
    for s in scores {
        w.write_record([
            s.latent_id.to_string(),
            s.layer.to_string(),
            s.score.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. `None` when either side is empty.
pub fn ranking_auc(positives: &[f64], negatives: &[f64]) -> Option<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in positives {
        for n in negatives {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Some(wins / (positives.len() * negatives.len()) as f64)
}
