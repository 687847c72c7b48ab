use anyhow::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cla_core::linan::{classify_update_cases, contributions, linearize, CaseHistogram, ContributionRecord, UpdateCase};

use super::{load_model, sample_codes};
use crate::config::RunConfig;
use crate::output::OutputDir;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTotal {
    pub case: UpdateCase,
    pub count: usize,
    pub mean_distance_delta: Option<f64>,
    pub mean_activation_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub codes: usize,
    pub layer: usize,
    pub learning_rate: f64,
    /// Largest relative gap between linearized and exact discriminator output.
    pub max_linearization_error: f64,
    pub identity_checks: usize,
    pub identity_passed: usize,
    pub identity_pass_rate: f64,
    /// Every active neuron fell in exactly one case, for every code.
    pub partition_ok: bool,
    pub cases: Vec<CaseTotal>,
}

struct CodeAnalysis {
    rel_error: f64,
    records: Vec<ContributionRecord>,
    hist: CaseHistogram,
    identity_passed: usize,
}

fn analyse(gen: &cla_core::NetworkSpec, disc: &cla_core::NetworkSpec, z: &[f64], cfg: &RunConfig) -> cla_core::Result<CodeAnalysis> {
    let layer = cfg.geometry.layer;
    let lin = linearize(gen, disc, z, layer)?;
    let y_bar = lin.output(&lin.h_split);
    let rel_error = (y_bar - lin.exact_output).abs() / lin.exact_output.abs().max(1e-300);
    let records = contributions(&lin, &lin.h_split)?;
    let hist = classify_update_cases(gen, disc, z, layer, cfg.geometry.learning_rate)?;
    let identity_passed = hist
        .updates
        .iter()
        .filter(|u| {
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let lhs = dot(&u.h_prev, &u.weight_plus);
            let rhs = dot(&u.h_prev, &u.weight) + u.delta * dot(&u.h_prev, &u.h_prev);
            (lhs - rhs).abs() <= 1e-9 * lhs.abs().max(rhs.abs()).max(1e-300)
        })
        .count();
    Ok(CodeAnalysis {
        rel_error,
        records,
        hist,
        identity_passed,
    })
}

fn write_contributions(w: &mut Vec<u8>, per_code: &[CodeAnalysis]) -> cla_core::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["latent_id", "neuron", "contribution", "case", "delta_activation", "delta_distance"])?;
    for (id, a) in per_code.iter().enumerate() {
        for r in &a.records {
            let u = a.hist.updates.iter().find(|u| u.neuron == r.neuron);
            out.write_record([
                id.to_string(),
                r.neuron.to_string(),
                r.contribution.to_string(),
                r.case.map_or("none", UpdateCase::name).to_string(),
                u.map(|u| (u.activation_plus - u.activation).to_string()).unwrap_or_default(),
                u.map(|u| (u.distance_plus - u.distance).to_string()).unwrap_or_default(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn cmd_geometry(cfg: &RunConfig) -> Result<GeometrySummary> {
    cfg.validate()?;
    let gen = load_model(&cfg.generator_path()?)?;
    let disc = load_model(&cfg.discriminator_path()?)?;
    let codes = sample_codes(cfg.geometry.codes, gen.latent_dim, cfg.seed, cfg.scoring.truncation);
    let per_code: Vec<CodeAnalysis> = codes
        .par_iter()
        .map(|z| analyse(&gen, &disc, z, cfg))
        .collect::<cla_core::Result<_>>()?;

    let mut partition_ok = true;
    let mut identity_checks = 0;
    let mut identity_passed = 0;
    let mut max_err: f64 = 0.0;
    for a in &per_code {
        let counted: usize = a.hist.cases.iter().map(|c| c.count).sum();
        partition_ok &= counted == a.hist.active;
        identity_checks += a.hist.updates.len();
        identity_passed += a.identity_passed;
        max_err = max_err.max(a.rel_error);
    }
    let cases = UpdateCase::ALL
        .iter()
        .map(|&case| {
            let members: Vec<_> = per_code
                .iter()
                .flat_map(|a| a.hist.updates.iter())
                .filter(|u| u.case() == Some(case))
                .collect();
            let avg = |f: &dyn Fn(&cla_core::linan::UpdateSimResult) -> f64| {
                (!members.is_empty()).then(|| members.iter().map(|u| f(u)).sum::<f64>() / members.len() as f64)
            };
            CaseTotal {
                case,
                count: members.len(),
                mean_distance_delta: avg(&|u| u.distance_plus - u.distance),
                mean_activation_delta: avg(&|u| u.activation_plus.abs() - u.activation.abs()),
            }
        })
        .collect();
    let summary = GeometrySummary {
        codes: codes.len(),
        layer: cfg.geometry.layer,
        learning_rate: cfg.geometry.learning_rate,
        max_linearization_error: max_err,
        identity_checks,
        identity_passed,
        identity_pass_rate: if identity_checks == 0 {
            1.0
        } else {
            identity_passed as f64 / identity_checks as f64
        },
        partition_ok,
        cases,
    };
    let mut out = OutputDir::create(cfg.out_dir()?, &cfg.hash(), cfg.command()?)?;
    out.csv("contributions.csv", "per-neuron contributions and simulated update effects", |w| {
        write_contributions(w, &per_code)
    })?;
    out.json("histogram.json", "update-case histogram", &serde_json::json!({ "cases": summary.cases }))?;
    out.json("summary.json", "linearization and identity checks", &summary)?;
    out.finish()?;
    Ok(summary)
}
