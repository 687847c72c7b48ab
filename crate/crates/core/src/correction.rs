//! Featuremap-unit CLA and unit dampening.
//!
//! A unit is a channel of a conv activation (all of its spatial neurons) or a
//! single neuron of a dense layer. Correction runs the generator up to the
//! stopping layer, multiplies the selected units by the maintain ratio `λ`
//! (`λ = 0` is zero-ablation) and resumes the forward pass.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::netcore::{NetworkSpec, Tensor};
use crate::probe::{layer_cla, ClaRecord, ProbeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitScore {
    pub layer: usize,
    pub unit: usize,
    /// Mean CLA over the unit's neurons.
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitRanking {
    /// Largest `|mean CLA|` first.
    #[default]
    Magnitude,
    /// Most negative (most concave) mean first.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionConfig {
    pub stopping_layer: usize,
    pub num_units: usize,
    /// Fraction of each selected unit's activation that is kept.
    pub maintain_ratio: f64,
    #[serde(default)]
    pub ranking: UnitRanking,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        Self {
            stopping_layer: 4,
            num_units: 100,
            maintain_ratio: 0.9,
            ranking: UnitRanking::Magnitude,
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self, net: &NetworkSpec) -> Result<()> {
        if !(0.0..=1.0).contains(&self.maintain_ratio) {
            return Err(Error::InvalidConfig(format!(
                "maintain ratio must be in [0, 1], got {}",
                self.maintain_ratio
            )));
        }
        let available = net.unit_count(self.stopping_layer)?;
        if self.num_units > available {
            return Err(Error::TooManyUnits {
                requested: self.num_units,
                available,
            });
        }
        Ok(())
    }
}

/// Mean CLA per unit of `layer`, ordered by unit id.
pub fn unit_cla(records: &[ClaRecord], layer: usize) -> Result<Vec<UnitScore>> {
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let mut members: BTreeMap<usize, Vec<&ClaRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.site.layer == layer) {
        members.entry(r.site.unit).or_default().push(r);
    }
    if members.is_empty() {
        return Err(Error::Empty(format!("no records for layer {layer}")));
    }
    for (unit, mut rs) in members {
        // fixed summation order keeps the mean independent of input order
        rs.sort_by_key(|r| (r.site.row, r.site.col));
        let sum: f64 = rs.iter().map(|r| r.mean).sum();
        sums.insert(unit, (sum, rs.len()));
    }
    Ok(sums
        .into_iter()
        .map(|(unit, (sum, count))| UnitScore {
            layer,
            unit,
            mean: sum / count as f64,
            count,
        })
        .collect())
}

/// The `num_units` highest-ranked units, ties broken by unit id.
pub fn identify_artifact_units(
    scores: &[UnitScore],
    num_units: usize,
    ranking: UnitRanking,
) -> Result<Vec<usize>> {
    if num_units == 0 {
        return Err(Error::InvalidConfig("num_units must be at least 1".into()));
    }
    if num_units > scores.len() {
        return Err(Error::TooManyUnits {
            requested: num_units,
            available: scores.len(),
        });
    }
    let key = |s: &UnitScore| match ranking {
        UnitRanking::Magnitude => s.mean.abs(),
        UnitRanking::Signed => -s.mean,
    };
    let mut ranked: Vec<&UnitScore> = scores.iter().collect();
    ranked.sort_by(|a, b| key(b).total_cmp(&key(a)).then(a.unit.cmp(&b.unit)));
    Ok(ranked[..num_units].iter().map(|s| s.unit).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub original: Tensor,
    pub corrected: Tensor,
}

impl Correction {
    pub fn distance(&self) -> f64 {
        self.original.l2_distance(&self.corrected)
    }
}

/// Scale `units` of an activation tensor by `ratio` in place.
pub fn dampen_units(h: &mut Tensor, units: &[usize], ratio: f64) -> Result<()> {
    let shape = h.shape().to_vec();
    let (channels, per_unit) = if shape.len() == 3 {
        (shape[0], shape[1] * shape[2])
    } else {
        (h.len(), 1)
    };
    for &u in units {
        if u >= channels {
            return Err(Error::InvalidUnit {
                unit: u,
                layer: 0,
                available: channels,
            });
        }
        for v in &mut h.data_mut()[u * per_unit..(u + 1) * per_unit] {
            *v *= ratio;
        }
    }
    Ok(())
}

/// Original and corrected outputs for latent code `z`.
pub fn correct(
    net: &NetworkSpec,
    z: &[f64],
    cfg: &CorrectionConfig,
    units: &[usize],
) -> Result<Correction> {
    cfg.validate(net)?;
    let l = cfg.stopping_layer;
    let trace = net.forward_trace(z)?;
    let mut h = trace.activation(l).clone();
    dampen_units(&mut h, units, cfg.maintain_ratio).map_err(|e| match e {
        Error::InvalidUnit {
            unit, available, ..
        } => Error::InvalidUnit {
            unit,
            layer: l,
            available,
        },
        other => other,
    })?;
    let corrected = if cfg.maintain_ratio == 1.0 {
        trace.output().clone()
    } else {
        net.forward_from(l, &h)?
    };
    Ok(Correction {
        original: trace.output().clone(),
        corrected,
    })
}

/// Result of probing, ranking and dampening one latent code.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeCorrection {
    pub latent_id: u64,
    pub units: Vec<usize>,
    pub unit_scores: Vec<UnitScore>,
    pub correction: Correction,
}

/// Probe the stopping layer at `z`, pick the units with the highest CLA and
/// dampen them. Only this code's own records are consulted.
pub fn correct_with_cla(
    net: &NetworkSpec,
    z: &[f64],
    latent_id: u64,
    cfg: &CorrectionConfig,
    probe: &ProbeConfig,
) -> Result<CodeCorrection> {
    cfg.validate(net)?;
    let records = layer_cla(net, cfg.stopping_layer, z, latent_id, probe)?;
    let unit_scores = unit_cla(&records, cfg.stopping_layer)?;
    let units = identify_artifact_units(&unit_scores, cfg.num_units, cfg.ranking)?;
    let correction = correct(net, z, cfg, &units)?;
    Ok(CodeCorrection {
        latent_id,
        units,
        unit_scores,
        correction,
    })
}
