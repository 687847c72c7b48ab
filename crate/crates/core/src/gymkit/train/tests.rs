use super::*;
use crate::gymkit::dataset::{make_toy_dataset, mode_coverage, DatasetKind, ToyDatasetSpec};
use crate::gymkit::optim::{flat_params, set_flat_params};
use crate::linan::linearize;
use crate::netcore::LayerKind;

fn small_pair(seed: u64) -> (NetworkSpec, NetworkSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen = random_mlp(&MlpArch::leaky(3, vec![6, 5], 4, 0.2), Role::Generator, 0.2, &mut rng).unwrap();
    let disc = random_mlp(&MlpArch::leaky(4, vec![6], 1, 0.2), Role::Discriminator, 0.2, &mut rng).unwrap();
    (gen, disc)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn central_diff(net: &NetworkSpec, f: impl Fn(&NetworkSpec) -> f64) -> Vec<f64> {
    let p = flat_params(net);
    let h = 1e-5;
    let mut work = net.clone();
    (0..p.len())
        .map(|i| {
            let mut q = p.clone();
            q[i] = p[i] + h;
            set_flat_params(&mut work, &q).unwrap();
            let up = f(&work);
            q[i] = p[i] - h;
            set_flat_params(&mut work, &q).unwrap();
            let down = f(&work);
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[test]
fn backprop_matches_finite_differences() {
    for seed in 0..50 {
        let (gen, disc) = small_pair(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let xs = sample_latents(&mut rng, 3, 4);
        let zs = sample_latents(&mut rng, 3, 3);

        let (_, g) = real_term(&disc, &xs).unwrap();
        let fd = central_diff(&disc, |d| real_term(d, &xs).unwrap().0);
        assert!(rel_err(&g.flatten(), &fd) <= 1e-4, "real term, seed {seed}");

        let fake = fake_term(&gen, &disc, &zs).unwrap();
        let fd = central_diff(&disc, |d| fake_term(&gen, d, &zs).unwrap().value);
        assert!(rel_err(&fake.disc_grad.flatten(), &fd) <= 1e-4, "fake term (D), seed {seed}");
        let fd = central_diff(&gen, |g| fake_term(g, &disc, &zs).unwrap().value);
        assert!(rel_err(&fake.gen_grad.flatten(), &fd) <= 1e-4, "fake term (G), seed {seed}");
    }
}

#[test]
fn single_sgd_step_matches_linearized_update() {
    for seed in 0..50 {
        let (gen, disc) = small_pair(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(7 + seed);
        let z0 = sample_latents(&mut rng, 1, 3);
        let eta = 0.05;
        let next = generator_sgd_step(&gen, &disc, &z0, eta).unwrap();
        for l in 1..=gen.depth() {
            let lin = linearize(&gen, &disc, &z0[0], l).unwrap();
            let (LayerKind::Dense { weight: w0, bias: b0 }, LayerKind::Dense { weight: w1, bias: b1 }) =
                (&gen.layers[l - 1].kind, &next.layers[l - 1].kind)
            else {
                unreachable!()
            };
            let n_in = w0.shape()[1];
            for i in 0..w0.shape()[0] {
                let u = crate::linan::simulate_update(&gen, &disc, &z0[0], l, i, eta).unwrap();
                let realized: Vec<f64> = (0..n_in)
                    .map(|j| w1.data()[i * n_in + j] - w0.data()[i * n_in + j])
                    .collect();
                let predicted: Vec<f64> = lin.h_prev.iter().map(|h| u.delta * h).collect();
                assert!(
                    rel_err(&realized, &predicted) <= 1e-6,
                    "seed {seed} layer {l} neuron {i}: {realized:?} vs {predicted:?}"
                );
                let db = b1.data()[i] - b0.data()[i];
                assert!((db - u.delta).abs() <= 1e-6 * u.delta.abs().max(1e-12));
            }
        }
    }
}

fn ring_data(seed: u64) -> Vec<Vec<f64>> {
    make_toy_dataset(&ToyDatasetSpec {
        kind: DatasetKind::GaussianRing,
        modes: 8,
        sigma: 0.05,
        samples: 800,
        seed,
    })
    .unwrap()
}

fn tiny_cfg() -> TrainConfig {
    TrainConfig {
        generator_hidden: vec![8, 8],
        discriminator_hidden: vec![8],
        steps: 20,
        snapshot_interval: 5,
        batch_size: 4,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_freezes_networks() {
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..tiny_cfg()
    };
    let run = train_gan(&cfg, &ring_data(0)).unwrap();
    assert_eq!(run.snapshots.len(), 5);
    for s in &run.snapshots[1..] {
        assert_eq!(s.generator, run.snapshots[0].generator);
        assert_eq!(s.discriminator, run.snapshots[0].discriminator);
    }
}

#[test]
fn training_is_deterministic() {
    let cfg = tiny_cfg();
    let data = ring_data(1);
    let a = train_gan(&cfg, &data).unwrap();
    let b = train_gan(&cfg, &data).unwrap();
    assert_eq!(a.snapshots.last().unwrap().generator, b.snapshots.last().unwrap().generator);
    let (la, lb): (Vec<_>, Vec<_>) = (
        a.log.iter().map(|e| (e.d_loss.to_bits(), e.g_loss.to_bits())).collect(),
        b.log.iter().map(|e| (e.d_loss.to_bits(), e.g_loss.to_bits())).collect(),
    );
    assert_eq!(la, lb);
    assert_ne!(a.snapshots[0].generator, a.snapshots[4].generator);
}

#[test]
fn nan_data_aborts_with_diagnostic() {
    let mut data = ring_data(0);
    for x in &mut data {
        x[0] = f64::NAN;
    }
    match train_gan(&tiny_cfg(), &data) {
        Err(Error::Diverged { step: 1, detail }) => assert!(detail.contains("discriminator")),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn config_validation() {
    let bad_interval = TrainConfig {
        snapshot_interval: 7,
        ..tiny_cfg()
    };
    assert!(bad_interval.validate().is_err());
    let bad_lr = TrainConfig {
        learning_rate: -1.0,
        ..tiny_cfg()
    };
    assert!(bad_lr.validate().is_err());
    assert!(train_gan(&tiny_cfg(), &[vec![1.0, 2.0, 3.0]]).is_err());
}

#[test]
fn snapshots_reload_bit_exactly() {
    let run = train_gan(&tiny_cfg(), &ring_data(2)).unwrap();
    let dir = std::env::temp_dir().join(format!("cla-snap-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let zs = sample_latents(&mut rng, 10, 2);
    for snap in &run.snapshots {
        let path = save_snapshot(&dir, snap, "abc").unwrap();
        let (meta, back) = load_snapshot(&path).unwrap();
        assert_eq!(meta.config_hash, "abc");
        assert_eq!(meta.step, snap.step);
        for z in &zs {
            let a = snap.generator.output(z).unwrap();
            let b = back.generator.output(z).unwrap();
            let bits = |t: &crate::netcore::Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
            let x = a.data().to_vec();
            assert_eq!(
                snap.discriminator.output(&x).unwrap().data()[0].to_bits(),
                back.discriminator.output(&x).unwrap().data()[0].to_bits()
            );
        }
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn log_is_json_lines() {
    let run = train_gan(&tiny_cfg(), &ring_data(0)).unwrap();
    let mut buf = Vec::new();
    write_log_jsonl(&mut buf, &run.log).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 20);
    let first: LogEntry = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first.step, 1);
}

#[test]
fn ring_training_covers_modes() {
    let spec = ToyDatasetSpec {
        kind: DatasetKind::GaussianRing,
        modes: 8,
        sigma: 0.05,
        samples: 2000,
        seed: 0,
    };
    let centers = spec.mode_centers();
    let mut covered_runs = 0;
    for seed in 0..10 {
        let data = make_toy_dataset(&ToyDatasetSpec { seed, ..spec.clone() }).unwrap();
        let cfg = TrainConfig {
            generator_hidden: vec![32, 32],
            discriminator_hidden: vec![32, 32],
            optimizer: OptimizerKind::adam(),
            learning_rate: 2e-3,
            batch_size: 32,
            steps: 2000,
            snapshot_interval: 2000,
            seed,
            ..TrainConfig::default()
        };
        let run = train_gan(&cfg, &data).unwrap();
        let gen = &run.snapshots.last().unwrap().generator;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let fake: Vec<Vec<f64>> = sample_latents(&mut rng, 1000, 2)
            .iter()
            .map(|z| gen.output(z).unwrap().into_data())
            .collect();
        let covered = mode_coverage(&fake, &centers, spec.sigma);
        eprintln!("seed {seed}: {covered}/8 modes");
        if covered >= 7 {
            covered_runs += 1;
        }
    }
    assert!(covered_runs >= 8, "only {covered_runs}/10 runs covered >= 7 modes");
}
