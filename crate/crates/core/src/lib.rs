//! Joint multi-contrast MRI reconstruction toolkit.
//!
//! Recovers a stack of contrast-weighted complex volumes from undersampled
//! radial k-space by maximum-a-posteriori estimation. The prior is a learned
//! convolutional energy model trained with multiscale denoising score
//! matching; recovery alternates slice-wise energy-gradient denoising with
//! conjugate-gradient data-consistency solves (majorize-minimize).
//!
//! Modules follow the pipeline order: [`phantom`] generates synthetic
//! multi-contrast anatomy, [`forward_model`] simulates radial multi-coil
//! acquisition, [`tensor_nn`] + [`energy_model`] define the learned prior,
//! [`training`] fits it, [`solver`] and [`baselines`] reconstruct, and
//! [`metrics_io`] scores results and owns the file formats.

pub mod baselines;
pub mod energy_model;
pub mod error;
pub mod forward_model;
mod ioutil;
pub mod metrics_io;
pub mod phantom;
pub mod solver;
pub mod tensor_nn;
pub mod testkit;
pub mod training;
pub mod volume;

pub use error::{Error, Result};
pub use volume::MultiContrastVolume;
