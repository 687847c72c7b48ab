use serde::{Deserialize, Serialize};
use std::io::Write;

use super::planted::{plant_artifact_generator, PlantSpec};
use super::train::TrainSnapshot;
use crate::error::{Error, Result};
use crate::netcore::{NetworkSpec, NeuronSite};
use crate::probe::{cla, ClaRecord, ProbeConfig};

/// CLA of one site across a sequence of generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSeries {
    pub site: NeuronSite,
    pub steps: Vec<usize>,
    pub records: Vec<ClaRecord>,
}

impl DynamicsSeries {
    pub fn means(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean).collect()
    }
}

/// Probes every site at `z_fixed` in each `(step, generator)` pair.
pub fn track_cla_dynamics(
    generators: &[(usize, &NetworkSpec)],
    sites: &[NeuronSite],
    z_fixed: &[f64],
    cfg: &ProbeConfig,
) -> Result<Vec<DynamicsSeries>> {
    sites
        .iter()
        .map(|&site| {
            let records = generators
                .iter()
                .map(|(_, g)| cla(g, site, z_fixed, 0, cfg))
                .collect::<Result<Vec<_>>>()?;
            Ok(DynamicsSeries {
                site,
                steps: generators.iter().map(|(s, _)| *s).collect(),
                records,
            })
        })
        .collect()
}

/// [`track_cla_dynamics`] over the generators of training snapshots.
pub fn track_snapshot_dynamics(
    snapshots: &[TrainSnapshot],
    sites: &[NeuronSite],
    z_fixed: &[f64],
    cfg: &ProbeConfig,
) -> Result<Vec<DynamicsSeries>> {
    let gens: Vec<(usize, &NetworkSpec)> =
        snapshots.iter().map(|s| (s.step, &s.generator)).collect();
    track_cla_dynamics(&gens, sites, z_fixed, cfg)
}

/// Planted generators whose bump shrinks through `radii` (strictly
/// decreasing); every other weight is shared across the series.
pub fn narrowing_bump_series(base: &PlantSpec, radii: &[f64]) -> Result<Vec<NetworkSpec>> {
    if radii.is_empty() {
        return Err(Error::Empty("radius schedule".into()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidConfig(
            "radius schedule must be strictly decreasing".into(),
        ));
    }
    radii
        .iter()
        .map(|&radius| {
            let spec = PlantSpec {
                radius,
                ..base.clone()
            };
            Ok(plant_artifact_generator(&spec)?.planted)
        })
        .collect()
}

/// Long-format CSV: `step, layer, unit, row, col, activation, cla_mean`.
pub fn write_dynamics_csv<W: Write>(out: W, series: &[DynamicsSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "layer", "unit", "row", "col", "activation", "cla_mean"])?;
    for s in series {
        for (step, r) in s.steps.iter().zip(&s.records) {
            w.write_record([
                step.to_string(),
                s.site.layer.to_string(),
                s.site.unit.to_string(),
                s.site.row.to_string(),
                s.site.col.to_string(),
                r.activation.to_string(),
                r.mean.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
