#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cla_cli::commands::plant::cmd_plant;
use cla_cli::{CommandKind, RunConfig};
use cla_core::gymkit::init::{random_mlp, MlpArch};
use cla_core::gymkit::PlantedFixture;
use cla_core::netcore::write_model;
use cla_core::{Activation, NetworkSpec, Role};

pub fn config(command: CommandKind, out: &Path) -> RunConfig {
    RunConfig {
        command: Some(command),
        out: Some(out.to_path_buf()),
        ..RunConfig::default()
    }
}

pub struct Planted {
    pub fixture: PlantedFixture,
    pub generator: PathBuf,
    pub clean: PathBuf,
}

/// Writes the default planted fixture under `dir/plant`.
pub fn planted(dir: &Path) -> Planted {
    let out = dir.join("plant");
    let fixture = cmd_plant(&config(CommandKind::Plant, &out)).expect("plant");
    Planted {
        fixture,
        generator: out.join("planted.clp"),
        clean: out.join("clean.clp"),
    }
}

/// Leaky generator `2 -> hidden -> 2` and discriminator `2 -> 16 -> 16 -> 1`.
pub fn random_pair(seed: u64, hidden: Vec<usize>) -> (NetworkSpec, NetworkSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen = random_mlp(&MlpArch::leaky(2, hidden, 2, 0.2), Role::Generator, 0.1, &mut rng).unwrap();
    let mut darch = MlpArch::leaky(2, vec![16, 16], 1, 0.2);
    darch.output_activation = Activation::Identity;
    let disc = random_mlp(&darch, Role::Discriminator, 0.1, &mut rng).unwrap();
    (gen, disc)
}

pub fn write_pair(dir: &Path, seed: u64, hidden: Vec<usize>) -> (PathBuf, PathBuf) {
    let (gen, disc) = random_pair(seed, hidden);
    std::fs::create_dir_all(dir).unwrap();
    let (g, d) = (dir.join("gen.clp"), dir.join("disc.clp"));
    write_model(&g, &gen).unwrap();
    write_model(&d, &disc).unwrap();
    (g, d)
}

/// Contents of every CSV and JSON file below `root`, keyed by relative path.
pub fn data_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if matches!(path.extension().and_then(|e| e.to_str()), Some("csv" | "json" | "jsonl")) {
                let bytes = std::fs::read(&path).unwrap();
                files.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    files
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Data rows of a CSV written by the CLI, skipping the hash comment.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap();
    let header = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}
