use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use cla_core::probe::{activation_profile, layer_cla, profile_heatmap_svg, write_records_csv};
use cla_core::scoring::{rank_and_select, sample_score, write_scores_csv, Groups};
use cla_core::{ClaRecord, NetworkSpec, ProbeConfig, SampleScore};

use super::{check_probe_layer, load_model, mean, sample_codes};
use crate::config::RunConfig;
use crate::output::OutputDir;

/// In-memory result of scoring a pool of latent codes.
#[derive(Debug, Clone)]
pub struct Detection {
    pub layer: usize,
    pub probe: ProbeConfig,
    pub codes: Vec<Vec<f64>>,
    pub records: Vec<Vec<ClaRecord>>,
    pub scores: Vec<SampleScore>,
    pub groups: Groups,
    pub forward_passes: usize,
}

impl Detection {
    pub fn code(&self, latent_id: u64) -> &[f64] {
        &self.codes[latent_id as usize]
    }

    pub fn group_codes(&self, ids: &[u64]) -> Vec<Vec<f64>> {
        ids.iter().map(|&id| self.code(id).to_vec()).collect()
    }
}

/// Samples codes, probes `layer` at each and ranks them.
pub fn run_detection(
    net: &NetworkSpec,
    cfg: &RunConfig,
    probe: &ProbeConfig,
    layer: usize,
) -> Result<Detection> {
    check_probe_layer(net, layer, "probe layer")?;
    let codes = sample_codes(cfg.scoring.codes, net.latent_dim, cfg.seed, cfg.scoring.truncation);
    let per_code: Vec<(Vec<ClaRecord>, SampleScore)> = codes
        .par_iter()
        .enumerate()
        .map(|(id, z)| {
            let records = layer_cla(net, layer, z, id as u64, probe)?;
            let score = sample_score(&records)?;
            Ok((records, score))
        })
        .collect::<cla_core::Result<_>>()?;
    let (records, scores): (Vec<_>, Vec<_>) = per_code.into_iter().unzip();
    let groups = rank_and_select(&scores, cfg.scoring.fraction, cfg.seed)?;
    Ok(Detection {
        layer,
        probe: *probe,
        forward_passes: codes.len() * probe.forward_passes(net.latent_dim),
        codes,
        records,
        scores,
        groups,
    })
}

#[derive(Debug, Serialize)]
struct GroupSummary {
    kind: &'static str,
    size: usize,
    mean_score: f64,
}

#[derive(Debug, Serialize)]
struct DetectSummary {
    command: &'static str,
    codes: usize,
    latent_dim: usize,
    layer: usize,
    search_bound: f64,
    grid_divisions: usize,
    fraction: f64,
    seed: u64,
    forward_passes: usize,
    groups: Vec<GroupSummary>,
}

fn write_codes_csv(w: &mut Vec<u8>, codes: &[Vec<f64>]) -> cla_core::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let dim = codes.first().map_or(0, Vec::len);
    let mut header = vec!["latent_id".to_string()];
    header.extend((0..dim).map(|d| format!("z{d}")));
    out.write_record(&header)?;
    for (id, z) in codes.iter().enumerate() {
        let mut row = vec![id.to_string()];
        row.extend(z.iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Profiles, across all axes, of the neuron contributing most to the score of `id`.
fn profile_svg(net: &NetworkSpec, det: &Detection, id: u64, label: &str) -> Result<String> {
    let records = &det.records[id as usize];
    let top = records
        .iter()
        .filter(|r| cla_core::scoring::neuron_term(r.mean, r.activation) > 0.0)
        .max_by(|a, b| a.mean.abs().total_cmp(&b.mean.abs()))
        .or_else(|| records.first())
        .expect("layer has neurons");
    let profiles = (0..net.latent_dim)
        .map(|axis| activation_profile(net, top.site, det.code(id), axis, &det.probe))
        .collect::<cla_core::Result<Vec<_>>>()?;
    Ok(profile_heatmap_svg(
        &format!("{label} code {id}, neuron {} (CLA {:.4})", top.site, top.mean),
        &profiles,
    ))
}

pub fn write_detection(out: &mut OutputDir, net: &NetworkSpec, cfg: &RunConfig, det: &Detection) -> Result<()> {
    out.csv("scores.csv", "per-code artifact score at the probe layer", |w| {
        write_scores_csv(w, &det.scores)
    })?;
    out.csv("codes.csv", "sampled latent codes", |w| write_codes_csv(w, &det.codes))?;
    let flat: Vec<ClaRecord> = det.records.iter().flatten().cloned().collect();
    out.csv("cla_records.csv", "per-neuron CLA of every code", |w| {
        write_records_csv(w, &flat)
    })?;
    out.json("groups.json", "high-CLA, low-CLA and random groups", &det.groups)?;
    let score_of = |ids: &[u64]| mean(&ids.iter().map(|&i| det.scores[i as usize].score).collect::<Vec<_>>());
    let summary = DetectSummary {
        command: "detect",
        codes: det.codes.len(),
        latent_dim: net.latent_dim,
        layer: det.layer,
        search_bound: det.probe.search_bound,
        grid_divisions: det.probe.grid_divisions,
        fraction: cfg.scoring.fraction,
        seed: cfg.seed,
        forward_passes: det.forward_passes,
        groups: [
            ("high_cla", &det.groups.high.members),
            ("low_cla", &det.groups.low.members),
            ("random", &det.groups.random.members),
        ]
        .into_iter()
        .map(|(kind, m)| GroupSummary {
            kind,
            size: m.len(),
            mean_score: score_of(m),
        })
        .collect(),
    };
    out.json("summary.json", "detection summary", &summary)?;
    if let Some(&id) = det.groups.high.members.first() {
        let svg = profile_svg(net, det, id, "highest score")?;
        out.svg("profile_high.svg", "activation profile of the top high-CLA code", &svg)?;
    }
    if let Some(&id) = det.groups.low.members.first() {
        let svg = profile_svg(net, det, id, "lowest score")?;
        out.svg("profile_low.svg", "activation profile of the bottom low-CLA code", &svg)?;
    }
    Ok(())
}

pub fn cmd_detect(cfg: &RunConfig) -> Result<Detection> {
    cfg.validate()?;
    let net = load_model(&cfg.generator_path()?)?;
    let det = run_detection(&net, cfg, &cfg.probe.probe_config(), cfg.probe.layer)?;
    let mut out = OutputDir::create(cfg.out_dir()?, &cfg.hash(), cfg.command()?)?;
    write_detection(&mut out, &net, cfg, &det)?;
    out.finish()?;
    Ok(det)
}
