//! Fingerprints, similarity, physicochemical properties and score modifiers.

mod fingerprint;
mod modifiers;
mod properties;

use thiserror::Error;

pub use fingerprint::{circular_fingerprint, tanimoto, Fingerprint, DEFAULT_RADIUS, DEFAULT_WIDTH};
pub use modifiers::{
    arithmetic_mean, gaussian_modifier, geometric_mean, threshold_modifier, Modifier, ModifierSpec,
};
pub use properties::{properties, tpsa, PropertyVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescriptorError {
    #[error("fingerprint widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("fingerprint width {0} is not a power of two")]
    InvalidWidth(usize),
    #[error("fingerprint radius {0} is outside 0..=4")]
    InvalidRadius(u32),
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),
    #[error("cannot aggregate an empty score list")]
    EmptyList,
    #[error("score {0} is outside [0, 1]")]
    OutOfRange(f64),
}
