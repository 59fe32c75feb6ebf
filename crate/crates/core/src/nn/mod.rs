//! Small fixed-topology network engine: ReLU MLPs with exact reverse-mode
//! gradients, tanh-squashed Gaussian policy heads, Adam, and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod gaussian;
pub mod mlp;

pub use adam::Adam;
pub use gaussian::{sample_squashed, squashed_backward, GaussianHeadOutput, SquashedSample, LOG_STD_MAX, LOG_STD_MIN};
pub use mlp::{Mlp, Tape};

/// Hidden width used throughout.
pub const HIDDEN: usize = 256;
