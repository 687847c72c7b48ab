//! Toy-scale GAN training, planted-artifact fixtures and CLA dynamics.

pub mod dataset;
pub mod dynamics;
pub mod init;
pub mod optim;
pub mod planted;
pub mod train;

pub use dataset::{make_toy_dataset, DatasetKind, ToyDatasetSpec};
pub use dynamics::{narrowing_bump_series, track_cla_dynamics, DynamicsSeries};
pub use optim::{Optimizer, OptimizerKind};
pub use planted::{plant_artifact_generator, PlantSpec, PlantedFixture};
pub use train::{train_gan, TrainConfig, TrainRun, TrainSnapshot};
