use anyhow::Result;
use serde::Serialize;

use cla_core::evalkit::{
    local_ppl, ppl, precision_recall, realism_summary, FeatureSet, MetricReport, SummaryStats,
};
use cla_core::NetworkSpec;

use super::detect::run_detection;
use super::{load_model, mean, sample_codes};
use crate::config::{config_error, RunConfig};
use crate::output::{read_samples_csv, OutputDir};

/// Real samples: the configured CSV, else outputs of the reference model on
/// `eval.samples` codes drawn with `seed + 1`.
pub fn reference_set(cfg: &RunConfig, latent_dim: usize) -> Result<Option<Vec<Vec<f64>>>> {
    if let Some(p) = &cfg.eval.reference_samples {
        return Ok(Some(read_samples_csv(p)?));
    }
    match cfg.reference_path()? {
        Some(p) => {
            let r = load_model(&p)?;
            Ok(Some(outputs(&r, &sample_codes(cfg.eval.samples, latent_dim, cfg.seed.wrapping_add(1), None))?))
        }
        None => Ok(None),
    }
}

pub fn outputs(net: &NetworkSpec, codes: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    Ok(codes
        .iter()
        .map(|z| Ok(net.output(z)?.into_data()))
        .collect::<cla_core::Result<Vec<_>>>()?)
}

/// Realism of the generator outputs at `codes` against `real`.
pub fn group_realism(net: &NetworkSpec, real: &FeatureSet, codes: &[Vec<f64>]) -> Result<SummaryStats> {
    Ok(realism_summary(real, &outputs(net, codes)?)?)
}

/// Mean path length of short segments starting at `codes`.
pub fn group_ppl(net: &NetworkSpec, cfg: &RunConfig, codes: &[Vec<f64>]) -> Result<f64> {
    Ok(mean(&local_ppl(net, codes, &cfg.eval.ppl_config(), cfg.seed)?))
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub metrics: Vec<MetricReport>,
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let net = load_model(&cfg.generator_path()?)?;
    let real = reference_set(cfg, net.latent_dim)?.ok_or_else(|| config_error("no reference set"))?;
    let k = cfg.eval.k;
    if real.len() <= k || cfg.eval.samples <= k {
        return Err(config_error(format!(
            "k = {k} needs more than k real ({}) and generated ({}) samples",
            real.len(),
            cfg.eval.samples
        )));
    }
    let fake = outputs(&net, &sample_codes(cfg.eval.samples, net.latent_dim, cfg.seed, cfg.scoring.truncation))?;
    if fake[0].len() != real[0].len() {
        return Err(config_error(format!(
            "generator output has dimension {}, reference samples have {}",
            fake[0].len(),
            real[0].len()
        )));
    }
    let real_set = FeatureSet::new(real, k)?;
    let fake_set = FeatureSet::new(fake.clone(), k)?;
    let pr = precision_recall(&real_set, &fake_set)?;
    let rs = realism_summary(&real_set, &fake)?;
    let ppl_cfg = cfg.eval.ppl_config();
    let path_length = ppl(&net, &ppl_cfg, cfg.seed)?;
    let seed = cfg.seed;
    let mut report = EvalReport {
        metrics: vec![
            MetricReport::new("precision", pr.precision, seed).with_k(k),
            MetricReport::new("recall", pr.recall, seed).with_k(k),
            MetricReport::new("realism_mean", rs.mean, seed).with_k(k),
            MetricReport::new("realism_median", rs.median, seed).with_k(k),
            MetricReport::new("realism_capped", rs.capped as f64, seed).with_k(k),
            MetricReport::new("ppl", path_length, seed).with_epsilon(ppl_cfg.epsilon),
        ],
    };
    let det = run_detection(&net, cfg, &cfg.probe.probe_config(), cfg.probe.layer)?;
    for (name, members) in [
        ("high_cla", &det.groups.high.members),
        ("low_cla", &det.groups.low.members),
        ("random", &det.groups.random.members),
    ] {
        let codes = det.group_codes(members);
        let rs = group_realism(&net, &real_set, &codes)?;
        report.metrics.extend([
            MetricReport::new("realism_mean", rs.mean, seed).with_k(k).with_group(name),
            MetricReport::new("realism_median", rs.median, seed).with_k(k).with_group(name),
            MetricReport::new("local_ppl", group_ppl(&net, cfg, &codes)?, seed)
                .with_epsilon(ppl_cfg.epsilon)
                .with_group(name),
        ]);
    }
    let mut out = OutputDir::create(cfg.out_dir()?, &cfg.hash(), cfg.command()?)?;
    out.json("metrics.json", "surrogate-distance metric report", &report)?;
    out.finish()?;
    Ok(report)
}
