//! Vanilla GAN training with the saturating minimax objective
//!
//! ```text
//! V(D, G) = E_x[log f(D(x))] + E_z[log(1 - f(D(G(z))))]
//! ```
//!
//! where `f` is the sigmoid and `D` outputs a logit. The discriminator ascends
//! `V`; the generator descends the second term directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::init::{random_mlp, MlpArch};
use super::optim::{Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::linan::sigmoid;
use crate::netcore::{read_model, write_model, NetworkGrad, NetworkSpec, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub latent_dim: usize,
    pub data_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    /// Leaky-relu slope of every hidden layer.
    pub leaky_slope: f64,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub snapshot_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            latent_dim: 2,
            data_dim: 2,
            generator_hidden: vec![32, 32, 32, 32],
            discriminator_hidden: vec![32, 32],
            leaky_slope: 0.2,
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.01,
            batch_size: 32,
            steps: 1000,
            snapshot_interval: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if self.latent_dim == 0 || self.data_dim == 0 {
            return bad("latent and data dimensions must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.snapshot_interval == 0 || self.steps % self.snapshot_interval != 0 {
            return bad(format!(
                "snapshot interval {} must divide step count {}",
                self.snapshot_interval, self.steps
            ));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return bad(format!("leaky slope must lie in [0, 1), got {}", self.leaky_slope));
        }
        Ok(())
    }

    pub fn generator_arch(&self) -> MlpArch {
        MlpArch::leaky(
            self.latent_dim,
            self.generator_hidden.clone(),
            self.data_dim,
            self.leaky_slope,
        )
    }

    pub fn discriminator_arch(&self) -> MlpArch {
        MlpArch::leaky(self.data_dim, self.discriminator_hidden.clone(), 1, self.leaky_slope)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSnapshot {
    pub step: usize,
    pub generator: NetworkSpec,
    pub discriminator: NetworkSpec,
    /// `-V` on the last discriminator batch (NaN at step 0).
    pub d_loss: f64,
    /// Mean `log(1 - f(D(G(z))))` on the last generator batch (NaN at step 0).
    pub g_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub snapshots: Vec<TrainSnapshot>,
    pub log: Vec<LogEntry>,
}

/// `log f(y)` without overflow.
fn log_sigmoid(y: f64) -> f64 {
    -softplus(-y)
}

fn softplus(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

fn disc_logit(disc: &NetworkSpec, x: &[f64]) -> Result<(f64, crate::netcore::ForwardTrace)> {
    let trace = disc.forward_trace(x)?;
    Ok((trace.output().data()[0], trace))
}

/// Mean `log f(D(x))` over `xs` and its gradient with respect to the
/// discriminator parameters.
pub fn real_term(disc: &NetworkSpec, xs: &[Vec<f64>]) -> Result<(f64, NetworkGrad)> {
    let n = xs.len() as f64;
    let mut value = 0.0;
    let mut grad = NetworkGrad::zeros_like(disc);
    for x in xs {
        let (y, trace) = disc_logit(disc, x)?;
        value += log_sigmoid(y);
        let (g, _) = disc.backward(&trace, &[1.0 - sigmoid(y)])?;
        grad.add_scaled(&g, 1.0 / n);
    }
    Ok((value / n, grad))
}

#[derive(Debug, Clone)]
pub struct FakeTerm {
    /// Mean `log(1 - f(D(G(z))))`.
    pub value: f64,
    pub disc_grad: NetworkGrad,
    pub gen_grad: NetworkGrad,
}

/// Mean `log(1 - f(D(G(z))))` over `zs` with gradients for both networks.
pub fn fake_term(gen: &NetworkSpec, disc: &NetworkSpec, zs: &[Vec<f64>]) -> Result<FakeTerm> {
    let n = zs.len() as f64;
    let mut value = 0.0;
    let mut disc_grad = NetworkGrad::zeros_like(disc);
    let mut gen_grad = NetworkGrad::zeros_like(gen);
    for z in zs {
        let gen_trace = gen.forward_trace(z)?;
        let (y, trace) = disc_logit(disc, gen_trace.output().data())?;
        value += -softplus(y);
        let (gd, dx) = disc.backward(&trace, &[-sigmoid(y)])?;
        disc_grad.add_scaled(&gd, 1.0 / n);
        let (gg, _) = gen.backward(&gen_trace, &dx)?;
        gen_grad.add_scaled(&gg, 1.0 / n);
    }
    Ok(FakeTerm {
        value: value / n,
        disc_grad,
        gen_grad,
    })
}

/// One plain SGD step of the generator loss on the batch `zs`.
pub fn generator_sgd_step(
    gen: &NetworkSpec,
    disc: &NetworkSpec,
    zs: &[Vec<f64>],
    learning_rate: f64,
) -> Result<NetworkSpec> {
    let fake = fake_term(gen, disc, zs)?;
    let mut next = gen.clone();
    Optimizer::new(OptimizerKind::Sgd, learning_rate).step(&mut next, &fake.gen_grad)?;
    Ok(next)
}

pub fn sample_latents<R: Rng + ?Sized>(rng: &mut R, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

fn guard(step: usize, what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            step,
            detail: format!("{what} is {v}"),
        })
    }
}

/// Alternating discriminator/generator training. Snapshots are taken before
/// the first step and after every `snapshot_interval` steps.
pub fn train_gan(cfg: &TrainConfig, data: &[Vec<f64>]) -> Result<TrainRun> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training data".into()));
    }
    if let Some(bad) = data.iter().find(|x| x.len() != cfg.data_dim) {
        return Err(Error::InvalidConfig(format!(
            "data point has dimension {}, config says {}",
            bad.len(),
            cfg.data_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gen = random_mlp(&cfg.generator_arch(), Role::Generator, 0.0, &mut rng)?;
    let mut disc = random_mlp(&cfg.discriminator_arch(), Role::Discriminator, 0.0, &mut rng)?;
    let mut gen_opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut disc_opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);

    let mut snapshots = vec![TrainSnapshot {
        step: 0,
        generator: gen.clone(),
        discriminator: disc.clone(),
        d_loss: f64::NAN,
        g_loss: f64::NAN,
    }];
    let mut log = Vec::with_capacity(cfg.steps);
    for step in 1..=cfg.steps {
        let real: Vec<Vec<f64>> = (0..cfg.batch_size)
            .map(|_| data[rng.random_range(0..data.len())].clone())
            .collect();
        let zs = sample_latents(&mut rng, cfg.batch_size, cfg.latent_dim);
        let (real_v, real_g) = real_term(&disc, &real)?;
        let fake = fake_term(&gen, &disc, &zs)?;
        let d_loss = -(real_v + fake.value);
        guard(step, "discriminator loss", d_loss)?;
        // descend -V
        let mut d_grad = NetworkGrad::zeros_like(&disc);
        d_grad.add_scaled(&real_g, -1.0);
        d_grad.add_scaled(&fake.disc_grad, -1.0);
        disc_opt.step(&mut disc, &d_grad)?;

        let zs = sample_latents(&mut rng, cfg.batch_size, cfg.latent_dim);
        let fake = fake_term(&gen, &disc, &zs)?;
        guard(step, "generator loss", fake.value)?;
        gen_opt.step(&mut gen, &fake.gen_grad)?;

        log.push(LogEntry {
            step,
            d_loss,
            g_loss: fake.value,
        });
        if step % cfg.snapshot_interval == 0 {
            snapshots.push(TrainSnapshot {
                step,
                generator: gen.clone(),
                discriminator: disc.clone(),
                d_loss,
                g_loss: fake.value,
            });
        }
    }
    Ok(TrainRun { snapshots, log })
}

pub fn write_log_jsonl<W: Write>(mut out: W, log: &[LogEntry]) -> Result<()> {
    for entry in log {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Sidecar written next to each snapshot's model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub step: usize,
    pub d_loss: Option<f64>,
    pub g_loss: Option<f64>,
    pub config_hash: String,
    pub generator: String,
    pub discriminator: String,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Writes `gen_<step>.clp`, `disc_<step>.clp` and `snapshot_<step>.json` into
/// `dir`; returns the sidecar path.
pub fn save_snapshot(dir: &Path, snap: &TrainSnapshot, config_hash: &str) -> Result<PathBuf> {
    let meta = SnapshotMeta {
        step: snap.step,
        d_loss: finite(snap.d_loss),
        g_loss: finite(snap.g_loss),
        config_hash: config_hash.to_string(),
        generator: format!("gen_{:06}.clp", snap.step),
        discriminator: format!("disc_{:06}.clp", snap.step),
    };
    write_model(dir.join(&meta.generator), &snap.generator)?;
    write_model(dir.join(&meta.discriminator), &snap.discriminator)?;
    let path = dir.join(format!("snapshot_{:06}.json", snap.step));
    std::fs::write(&path, serde_json::to_vec_pretty(&meta)?)?;
    Ok(path)
}

pub fn load_snapshot(sidecar: &Path) -> Result<(SnapshotMeta, TrainSnapshot)> {
    let meta: SnapshotMeta = serde_json::from_slice(&std::fs::read(sidecar)?)?;
    let dir = sidecar.parent().unwrap_or_else(|| Path::new("."));
    let snap = TrainSnapshot {
        step: meta.step,
        generator: read_model(dir.join(&meta.generator))?,
        discriminator: read_model(dir.join(&meta.discriminator))?,
        d_loss: meta.d_loss.unwrap_or(f64::NAN),
        g_loss: meta.g_loss.unwrap_or(f64::NAN),
    };
    Ok((meta, snap))
}

#[cfg(test)]
mod tests;
