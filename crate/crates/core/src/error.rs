use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at layer {layer}: {detail}")]
    ShapeMismatch { layer: usize, detail: String },

    #[error("tensor shape {shape:?} does not hold {len} elements")]
    TensorShape { shape: Vec<usize>, len: usize },

    #[error("invalid neuron site {site}: {reason}")]
    InvalidSite { site: String, reason: String },

    #[error("layer {layer} has activation {activation}, which is not supported here")]
    UnsupportedActivation { layer: usize, activation: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad model container: {0}")]
    BadMagic(String),

    #[error("unsupported container version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("container truncated while reading {what}")]
    Truncated { what: String },

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("records mix latent codes {first} and {other}")]
    MixedLatentIds { first: u64, other: u64 },

    #[error("records mix layers {first} and {other}")]
    MixedLayers { first: usize, other: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("requested {requested} units but layer only has {available}")]
    TooManyUnits { requested: usize, available: usize },

    #[error("unit {unit} is outside layer {layer} ({available} units)")]
    InvalidUnit { unit: usize, layer: usize, available: usize },

    #[error("sigmoid of discriminator output saturated at 1 (y = {y}); c0 is singular")]
    SingularC0 { y: f64 },

    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    #[error("infeasible planted geometry: {0}")]
    InfeasibleGeometry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
