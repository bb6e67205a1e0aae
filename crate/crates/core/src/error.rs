use alloc::string::String;
use alloc::vec::Vec;

use crate::texture::TextureId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid texture dimensions {width}x{height}")]
    InvalidDimension { width: u32, height: u32 },

    #[error("texture {width}x{height} exceeds the {max_side} texel side limit")]
    DimensionCap { width: u32, height: u32, max_side: u32 },

    #[error("coordinate ({x}, {y}) out of bounds for texture {texture} ({width}x{height})")]
    OutOfBounds {
        texture: TextureId,
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },

    #[error("invalid cache config: {0}")]
    InvalidConfig(String),

    #[error("degenerate least-squares fit; collinear features: {}", .collinear.join(", "))]
    DegenerateFit { collinear: Vec<String> },

    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("invalid bitonic schedule position: stage {stage}, step {step}")]
    Schedule { stage: u32, step: u32 },

    #[error("input size mismatch: {0}")]
    InputMismatch(String),

    #[error("layout invariant violated in pass {pass}: logical index {logical} {detail}")]
    LayoutViolation {
        pass: u32,
        logical: u32,
        detail: String,
    },

    #[error("{count} elements exceed the capacity of {max}")]
    Capacity { count: usize, max: usize },

    #[error("invalid key {0}")]
    InvalidKey(f32),

    #[error("key pair ({key}, {value}) is reserved for padding")]
    ReservedSentinel { key: f32, value: u32 },

    #[error("tile id {0} does not fit in 20 bits")]
    KeyOverflow(u32),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("gaussian index {index} out of range ({count} gaussians)")]
    CorruptIndex { index: usize, count: usize },

    #[error("invalid gaussian {index}: {reason}")]
    InvalidGaussian { index: usize, reason: String },

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}
