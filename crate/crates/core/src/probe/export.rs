use std::io::Write;

use super::{ActivationProfile, ClaRecord};
use crate::error::Result;
use crate::svg;

/// CSV with columns `latent_id, layer, unit, row, col, activation, cla_mean,
/// cla_axis_0 .. cla_axis_{D-1}`.
pub fn write_records_csv<W: Write>(out: W, records: &[ClaRecord]) -> Result<()> {
    let dims = records.iter().map(|r| r.axes.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "latent_id",
        "layer",
        "unit",
        "row",
        "col",
        "activation",
        "cla_mean",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..dims).map(|d| format!("cla_axis_{d}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.latent_id.to_string(),
            r.site.layer.to_string(),
            r.site.unit.to_string(),
            r.site.row.to_string(),
            r.site.col.to_string(),
            r.activation.to_string(),
            r.mean.to_string(),
        ];
        row.extend(r.axes.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Profiles as a JSON array.
pub fn write_profiles_json<W: Write>(out: W, profiles: &[ActivationProfile]) -> Result<()> {
    serde_json::to_writer_pretty(out, profiles)?;
    Ok(())
}

/// Heatmap of per-axis activation profiles of one neuron, one row per axis.
pub fn profile_heatmap_svg(title: &str, profiles: &[ActivationProfile]) -> String {
    let labels: Vec<String> = profiles.iter().map(|p| format!("axis {}", p.axis)).collect();
    let rows: Vec<Vec<f64>> = profiles.iter().map(|p| p.values.clone()).collect();
    svg::heatmap(title, &labels, &rows)
}
