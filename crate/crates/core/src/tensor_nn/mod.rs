//! Minimal dense-tensor and reverse-mode differentiation core.
//!
//! Just enough machinery to define, train, and differentiate the small
//! convolutional energy network: 4-D tensors, direct-loop conv kernels,
//! a fixed feed-forward layer graph with forward / vjp / jvp sweeps, a
//! combined reverse sweep over (forward + jvp) for score-matching gradients,
//! bias-corrected Adam, and the `MEN1` checkpoint format.

mod adam;
mod checkpoint;
pub(crate) mod layers;
mod network;
mod tensor;

pub use adam::adam_step;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use network::{
    forward, forward_with_tape, jvp, vjp, vjp_input, vjp_with_tangent, LayerSpec, NetworkSpec,
    ParamGrads, ParamStore, Tape,
};
pub use tensor::Tensor;

/// Element type of network parameters and activations. f32 by default; the
/// `real64` feature switches to f64 for tight gradient-check builds.
#[cfg(not(feature = "real64"))]
pub type Real = f32;
#[cfg(feature = "real64")]
pub type Real = f64;
