use anyhow::Result;
use serde::Serialize;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use cla_core::evalkit::FeatureSet;
use cla_core::svg::{line_panels, Panel, Series};
use cla_core::ProbeConfig;

use super::detect::run_detection;
use super::eval::{group_ppl, group_realism, reference_set};
use super::load_model;
use crate::config::{config_error, RunConfig};
use crate::output::OutputDir;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub search_bound: f64,
    pub grid_divisions: usize,
    pub layer: usize,
    pub forward_passes: usize,
    pub high_ppl: f64,
    pub low_ppl: f64,
    pub high_rs_mean: Option<f64>,
    pub high_rs_median: Option<f64>,
    pub low_rs_mean: Option<f64>,
    pub low_rs_median: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Wall-clock detection time per row.
    pub timings: Vec<Duration>,
}

fn write_rows(w: &mut Vec<u8>, rows: &[SweepRow]) -> cla_core::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn sweep_svg(rows: &[SweepRow]) -> String {
    let mut panels = Vec::new();
    let mut keys: Vec<(usize, usize)> = rows.iter().map(|r| (r.layer, r.grid_divisions)).collect();
    keys.dedup();
    for (layer, n) in keys {
        let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.layer == layer && r.grid_divisions == n).collect();
        let curve = |label: &str, color: &str, f: &dyn Fn(&SweepRow) -> Option<f64>| Series {
            label: label.into(),
            color: color.into(),
            points: cell.iter().filter_map(|r| f(r).map(|v| (r.search_bound, v))).collect(),
        };
        panels.push(Panel {
            title: format!("PPL, layer {layer}, n = {n}"),
            x_label: "search bound R".into(),
            y_label: "PPL".into(),
            series: vec![
                curve("High CLA", "#d62728", &|r| Some(r.high_ppl)),
                curve("Low CLA", "#1f77b4", &|r| Some(r.low_ppl)),
            ],
        });
        if cell.iter().any(|r| r.high_rs_mean.is_some()) {
            panels.push(Panel {
                title: format!("Realism, layer {layer}, n = {n}"),
                x_label: "search bound R".into(),
                y_label: "mean RS".into(),
                series: vec![
                    curve("High CLA", "#d62728", &|r| r.high_rs_mean),
                    curve("Low CLA", "#1f77b4", &|r| r.low_rs_mean),
                ],
            });
        }
    }
    line_panels(&panels)
}

pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutcome> {
    let net = load_model(&cfg.generator_path()?)?;
    let real = reference_set(cfg, net.latent_dim)?
        .map(|r| FeatureSet::new(r, cfg.eval.k))
        .transpose()?;
    let s = &cfg.sweep;
    if s.search_bounds.is_empty() || s.grid_divisions.is_empty() || s.layers.is_empty() {
        return Err(config_error("sweep grid is empty"));
    }
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &layer in &s.layers {
        for &n in &s.grid_divisions {
            for &r in &s.search_bounds {
                let probe = ProbeConfig {
                    search_bound: r,
                    grid_divisions: n,
                    ..cfg.probe.probe_config()
                };
                let start = Instant::now();
                let det = run_detection(&net, cfg, &probe, layer)?;
                timings.push(start.elapsed());
                let high = det.group_codes(&det.groups.high.members);
                let low = det.group_codes(&det.groups.low.members);
                let (hr, lr) = match &real {
                    Some(set) => (Some(group_realism(&net, set, &high)?), Some(group_realism(&net, set, &low)?)),
                    None => (None, None),
                };
                rows.push(SweepRow {
                    search_bound: r,
                    grid_divisions: n,
                    layer,
                    forward_passes: det.forward_passes,
                    high_ppl: group_ppl(&net, cfg, &high)?,
                    low_ppl: group_ppl(&net, cfg, &low)?,
                    high_rs_mean: hr.map(|s| s.mean),
                    high_rs_median: hr.map(|s| s.median),
                    low_rs_mean: lr.map(|s| s.mean),
                    low_rs_median: lr.map(|s| s.median),
                });
            }
        }
    }
    Ok(SweepOutcome { rows, timings })
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let outcome = run_sweep(cfg)?;
    let mut out = OutputDir::create(cfg.out_dir()?, &cfg.hash(), cfg.command()?)?;
    out.csv("sweep.csv", "group metrics per probe setting", |w| write_rows(w, &outcome.rows))?;
    out.svg("sweep.svg", "High/Low CLA group metrics against the search bound", &sweep_svg(&outcome.rows))?;
    let mut timing = String::from("search_bound\tgrid_divisions\tlayer\telapsed_ms\n");
    for (r, t) in outcome.rows.iter().zip(&outcome.timings) {
        writeln!(
            timing,
            "{}\t{}\t{}\t{:.3}",
            r.search_bound,
            r.grid_divisions,
            r.layer,
            t.as_secs_f64() * 1e3
        )?;
    }
    out.text("timing.txt", "wall-clock detection time per setting (not reproducible)", &timing)?;
    out.finish()?;
    Ok(outcome)
}
