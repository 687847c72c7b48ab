use anyhow::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cla_core::correction::{correct_with_cla, CodeCorrection, UnitRanking};
use cla_core::NetworkSpec;

use super::detect::{run_detection, write_detection, Detection};
use super::{check_probe_layer, load_model, mean};
use crate::config::{config_error, RunConfig};
use crate::output::OutputDir;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeReport {
    pub latent_id: u64,
    pub units: Vec<usize>,
    /// Mean CLA of each dampened unit, in `units` order.
    pub unit_cla: Vec<f64>,
    /// L2 distance between original and corrected output.
    pub output_change: f64,
    /// L2 distance to the reference generator before and after correction.
    pub reference_before: Option<f64>,
    pub reference_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub stopping_layer: usize,
    pub num_units: usize,
    pub maintain_ratio: f64,
    pub ranking: UnitRanking,
    pub corrected_codes: usize,
    pub mean_output_change: f64,
    /// Fraction of codes moved strictly closer to the reference output.
    pub improved_fraction: Option<f64>,
    pub codes: Vec<CodeReport>,
}

#[derive(Debug, Clone)]
pub struct CorrectOutcome {
    pub detection: Detection,
    pub corrections: Vec<CodeCorrection>,
    pub report: CorrectionReport,
}

fn code_report(fix: &CodeCorrection, reference: Option<&NetworkSpec>, z: &[f64]) -> Result<CodeReport> {
    let unit_cla = fix
        .units
        .iter()
        .map(|u| {
            fix.unit_scores
                .iter()
                .find(|s| s.unit == *u)
                .map_or(f64::NAN, |s| s.mean)
        })
        .collect();
    let (before, after) = match reference {
        Some(r) => {
            let target = r.output(z)?;
            (
                Some(fix.correction.original.l2_distance(&target)),
                Some(fix.correction.corrected.l2_distance(&target)),
            )
        }
        None => (None, None),
    };
    Ok(CodeReport {
        latent_id: fix.latent_id,
        units: fix.units.clone(),
        unit_cla,
        output_change: fix.correction.distance(),
        reference_before: before,
        reference_after: after,
    })
}

/// Corrects every code of the high-CLA group of `det`.
pub fn correct_group(
    net: &NetworkSpec,
    reference: Option<&NetworkSpec>,
    cfg: &RunConfig,
    det: &Detection,
) -> Result<(Vec<CodeCorrection>, CorrectionReport)> {
    let ccfg = cfg.correction.correction_config();
    ccfg.validate(net).map_err(|e| config_error(e.to_string()))?;
    check_probe_layer(net, ccfg.stopping_layer, "stopping layer")?;
    let probe = cfg.probe.probe_config();
    let ids = &det.groups.high.members;
    let corrections: Vec<CodeCorrection> = ids
        .par_iter()
        .map(|&id| correct_with_cla(net, det.code(id), id, &ccfg, &probe))
        .collect::<cla_core::Result<_>>()?;
    let codes = corrections
        .iter()
        .map(|c| code_report(c, reference, det.code(c.latent_id)))
        .collect::<Result<Vec<_>>>()?;
    let improved_fraction = reference.map(|_| {
        let improved = codes
            .iter()
            .filter(|c| c.reference_after < c.reference_before)
            .count();
        improved as f64 / codes.len().max(1) as f64
    });
    let report = CorrectionReport {
        stopping_layer: ccfg.stopping_layer,
        num_units: ccfg.num_units,
        maintain_ratio: ccfg.maintain_ratio,
        ranking: ccfg.ranking,
        corrected_codes: codes.len(),
        mean_output_change: mean(&codes.iter().map(|c| c.output_change).collect::<Vec<_>>()),
        improved_fraction,
        codes,
    };
    Ok((corrections, report))
}

fn write_outputs_csv(w: &mut Vec<u8>, fixes: &[CodeCorrection]) -> cla_core::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let dim = fixes.first().map_or(0, |f| f.correction.original.len());
    let mut header = vec!["latent_id".to_string(), "stage".to_string()];
    header.extend((0..dim).map(|d| format!("x{d}")));
    out.write_record(&header)?;
    for f in fixes {
        for (stage, t) in [("original", &f.correction.original), ("corrected", &f.correction.corrected)] {
            let mut row = vec![f.latent_id.to_string(), stage.to_string()];
            row.extend(t.data().iter().map(f64::to_string));
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn cmd_correct(cfg: &RunConfig) -> Result<CorrectOutcome> {
    cfg.validate()?;
    let net = load_model(&cfg.generator_path()?)?;
    let reference = cfg.reference_path()?.map(|p| load_model(&p)).transpose()?;
    let det = run_detection(&net, cfg, &cfg.probe.probe_config(), cfg.probe.layer)?;
    let (corrections, report) = correct_group(&net, reference.as_ref(), cfg, &det)?;
    let mut out = OutputDir::create(cfg.out_dir()?, &cfg.hash(), cfg.command()?)?;
    write_detection(&mut out, &net, cfg, &det)?;
    out.json("correction_report.json", "per-code correction report", &report)?;
    out.csv("outputs.csv", "generator outputs before and after correction", |w| {
        write_outputs_csv(w, &corrections)
    })?;
    out.finish()?;
    Ok(CorrectOutcome {
        detection: det,
        corrections,
        report,
    })
}
