//! Runs alone in its own binary so that no other test competes for cores.

mod common;

use cla_cli::commands::sweep::cmd_sweep;
use cla_cli::CommandKind;
use common::*;

#[test]
fn detection_time_grows_linearly_in_grid_divisions() {
    let tmp = tempfile::tempdir().unwrap();
    let (g, _) = write_pair(&tmp.path().join("m"), 1, vec![64, 64, 64]);
    let divisions = [10usize, 20, 40];
    let mut best = vec![f64::INFINITY; divisions.len()];
    for rep in 0..4 {
        let mut cfg = config(CommandKind::Sweep, &tmp.path().join(format!("s{rep}")));
        cfg.model.generator = Some(g.clone());
        cfg.probe.layer = 3;
        cfg.scoring.codes = 400;
        cfg.eval.pairs = 8;
        cfg.sweep.search_bounds = vec![30.0];
        cfg.sweep.grid_divisions = divisions.to_vec();
        cfg.sweep.layers = vec![3];
        let outcome = cmd_sweep(&cfg).unwrap();
        for (i, (row, t)) in outcome.rows.iter().zip(&outcome.timings).enumerate() {
            // one centre pass plus 2n per latent axis
            assert_eq!(row.forward_passes, 400 * (1 + 2 * 2 * row.grid_divisions));
            best[i] = best[i].min(t.as_secs_f64() / row.forward_passes as f64);
        }
        let log = std::fs::read_to_string(tmp.path().join(format!("s{rep}")).join("timing.txt")).unwrap();
        assert_eq!(log.lines().filter(|l| !l.starts_with('#')).count(), 1 + divisions.len());
    }
    for (t, n) in best.iter().zip(divisions) {
        assert!(t.is_finite() && *t > 0.0, "no timing for n = {n}");
    }
    let lo = best.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = best.iter().cloned().fold(0.0, f64::max);
    println!("per-pass seconds by grid_divisions {divisions:?}: {best:?}");
    assert!(hi / lo <= 1.2, "per-pass cost varies by {:.3}x", hi / lo);
}
