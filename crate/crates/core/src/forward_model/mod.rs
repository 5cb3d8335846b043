//! Radial multi-coil acquisition model.
//!
//! Golden-angle trajectories, simulated coil sensitivities, the exact
//! non-uniform DFT forward/adjoint pair, complex Gaussian noise, inversion
//! block subsetting with TI-window binning, and an FFT-backed Toeplitz
//! embedding of the normal operator A^H A used by the iterative solvers.

mod coils;
mod ndft;
mod noise;
mod toeplitz;
mod trajectory;

pub use coils::{simulate_coil_maps, CoilMaps};
pub use ndft::{apply_a, apply_ah};
pub use noise::{add_noise, simulate_kspace, ContrastData, KSpaceData};
pub use toeplitz::NormalOperator;
pub use trajectory::{
    assign_window, golden_angle_trajectory, golden_angle_trajectory_with_timing, subset_blocks,
    ContrastTraj, Spoke, TrajMode, Trajectory,
};

/// Acquisition constants from the reference protocol.
pub const PAPER_N_BLOCKS: usize = 224;
pub const PAPER_KEEP_BLOCKS: usize = 56;
pub const PAPER_N_ECHOES: usize = 385;
pub const PAPER_N_COILS: usize = 4;
pub const DEFAULT_ECHO_SPACING_MS: f64 = 4.88;
/// First-echo offset that aligns the default echo train with the shipped TI
/// windows: every window boundary equals 2.24 + k * 4.88 for integer k, and
/// echo 385 lands exactly on the end of the last window.
pub const DEFAULT_FIRST_ECHO_MS: f64 = 2.24;
/// The four shipped TI windows in ms, left-closed right-open.
pub const PAPER_TI_WINDOWS_MS: [(f64, f64); 4] = [
    (314.56, 417.04),
    (558.56, 758.64),
    (758.64, 1056.32),
    (1583.36, 1881.04),
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::PAPER_TIS_MS;

    #[test]
    fn shipped_tis_are_window_midpoints() {
        for (w, ti) in PAPER_TI_WINDOWS_MS.iter().zip(PAPER_TIS_MS) {
            assert!(((w.0 + w.1) / 2.0 - ti).abs() < 1e-9, "{w:?} vs {ti}");
        }
    }

    #[test]
    fn window_boundaries_sit_on_the_default_echo_grid() {
        for (lo, hi) in PAPER_TI_WINDOWS_MS {
            for b in [lo, hi] {
                let k = (b - DEFAULT_FIRST_ECHO_MS) / DEFAULT_ECHO_SPACING_MS;
                assert!((k - k.round()).abs() < 1e-9, "boundary {b} -> index {k}");
                assert!(k.round() >= 0.0 && k.round() <= PAPER_N_ECHOES as f64);
            }
        }
    }
}
