use anyhow::Result;
use serde::Serialize;

use cla_core::gymkit::dataset::{mode_coverage, write_dataset_csv};
use cla_core::gymkit::dynamics::{track_snapshot_dynamics, write_dynamics_csv};
use cla_core::gymkit::train::{sample_latents, save_snapshot};
use cla_core::gymkit::{make_toy_dataset, train_gan, DynamicsSeries, TrainRun};
use cla_core::svg::{line_panels, Panel, Series};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::check_probe_layer;
use crate::config::RunConfig;
use crate::output::OutputDir;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Serialize)]
struct TrainSummary {
    steps: usize,
    snapshots: Vec<usize>,
    final_d_loss: Option<f64>,
    final_g_loss: Option<f64>,
    dynamics_layer: usize,
    z_fixed: Vec<f64>,
    /// Modes with a generated sample within 3 sigma, out of `modes`.
    modes_covered: usize,
    modes: usize,
}

fn dynamics_svg(series: &[DynamicsSeries]) -> String {
    let lines = series
        .iter()
        .enumerate()
        .map(|(i, s)| Series {
            label: format!("unit {}", s.site.unit),
            color: PALETTE[i % PALETTE.len()].to_string(),
            points: s.steps.iter().zip(s.means()).map(|(&t, m)| (t as f64, m)).collect(),
        })
        .collect();
    line_panels(&[Panel {
        title: "CLA across training".into(),
        x_label: "step".into(),
        y_label: "mean CLA".into(),
        series: lines,
    }])
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainRun> {
    cfg.validate()?;
    let t = &cfg.train;
    let data = make_toy_dataset(&t.dataset)?;
    let run = train_gan(&t.model, &data)?;
    let first = &run.snapshots[0].generator;
    check_probe_layer(first, t.dynamics_layer, "train.dynamics_layer")?;
    let z_fixed = t.z_fixed.clone().unwrap_or_else(|| vec![0.0; t.model.latent_dim]);
    if z_fixed.len() != t.model.latent_dim {
        return Err(crate::config::config_error(format!(
            "train.z_fixed has {} entries, latent dimension is {}",
            z_fixed.len(),
            t.model.latent_dim
        )));
    }
    let sites = first.layer_sites(t.dynamics_layer)?;
    let series = track_snapshot_dynamics(&run.snapshots, &sites, &z_fixed, &cfg.probe.probe_config())?;

    let mut out = crate::output::OutputDir::create(cfg.out_dir()?, &cfg.hash(), cfg.command()?)?;
    out.csv("dataset.csv", "training samples", |w| write_dataset_csv(w, &data))?;
    out.jsonl("train_log.jsonl", "per-step losses", &run.log)?;
    std::fs::create_dir_all(out.path("snapshots"))?;
    for snap in &run.snapshots {
        save_snapshot(&out.path("snapshots"), snap, out.hash())?;
        let step = snap.step;
        out.register(&format!("snapshots/gen_{step:06}.clp"), "model", "generator snapshot");
        out.register(&format!("snapshots/disc_{step:06}.clp"), "model", "discriminator snapshot");
        out.register(&format!("snapshots/snapshot_{step:06}.json"), "json", "snapshot sidecar");
    }
    out.csv("dynamics.csv", "CLA of the tracked layer per snapshot", |w| {
        write_dynamics_csv(w, &series)
    })?;
    out.svg("dynamics.svg", "CLA across training", &dynamics_svg(&series))?;
    write_summary(&mut out, cfg, &run, z_fixed)?;
    out.finish()?;
    Ok(run)
}

fn write_summary(out: &mut OutputDir, cfg: &RunConfig, run: &TrainRun, z_fixed: Vec<f64>) -> Result<()> {
    let t = &cfg.train;
    let last = run.snapshots.last().expect("at least the initial snapshot");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fake = sample_latents(&mut rng, 1000, t.model.latent_dim)
        .iter()
        .map(|z| Ok(last.generator.output(z)?.into_data()))
        .collect::<cla_core::Result<Vec<_>>>()?;
    let finite = |v: f64| v.is_finite().then_some(v);
    let summary = TrainSummary {
        steps: t.model.steps,
        snapshots: run.snapshots.iter().map(|s| s.step).collect(),
        final_d_loss: finite(last.d_loss),
        final_g_loss: finite(last.g_loss),
        dynamics_layer: t.dynamics_layer,
        z_fixed,
        modes_covered: mode_coverage(&fake, &t.dataset.mode_centers(), t.dataset.sigma),
        modes: t.dataset.modes,
    };
    out.json("summary.json", "training summary", &summary)?;
    Ok(())
}
