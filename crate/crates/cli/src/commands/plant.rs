use anyhow::Result;
use serde::Serialize;

use cla_core::gymkit::{plant_artifact_generator, PlantSpec, PlantedFixture};
use cla_core::probe::cla;

use crate::config::RunConfig;
use crate::output::OutputDir;

#[derive(Debug, Serialize)]
struct PlantReport<'a> {
    spec: &'a PlantSpec,
    site: cla_core::NeuronSite,
    /// CLA of the planted neuron at the bump centre, measured by the probe.
    center_cla: f64,
    generator: &'static str,
    reference: &'static str,
}

/// Writes `planted.clp` (the generator) and `clean.clp` (its reference).
pub fn cmd_plant(cfg: &RunConfig) -> Result<PlantedFixture> {
    cfg.validate()?;
    let fixture = plant_artifact_generator(&cfg.plant)?;
    let measured = cla(
        &fixture.planted,
        fixture.site(),
        &fixture.spec.center,
        0,
        &cfg.probe.probe_config(),
    )?;
    let mut out = OutputDir::create(cfg.out_dir()?, &cfg.hash(), cfg.command()?)?;
    out.model("planted.clp", "generator with the planted artifact unit", &fixture.planted)?;
    out.model("clean.clp", "reference generator with the artifact column removed", &fixture.clean)?;
    out.json(
        "plant.json",
        "fixture geometry",
        &PlantReport {
            spec: &fixture.spec,
            site: fixture.site(),
            center_cla: measured.mean,
            generator: "planted.clp",
            reference: "clean.clp",
        },
    )?;
    out.finish()?;
    Ok(fixture)
}
