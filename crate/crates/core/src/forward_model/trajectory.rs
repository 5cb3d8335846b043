//! Golden-angle radial trajectories and retrospective block subsetting.

use crate::error::{Error, Result};

use super::{DEFAULT_ECHO_SPACING_MS, DEFAULT_FIRST_ECHO_MS};

/// 2D golden-angle increment: pi * (sqrt(5) - 1) / 2 radians (111.2461 deg).
pub const GOLDEN_ANGLE_RAD: f64 = std::f64::consts::PI * 0.618033988749894848;
/// Two-angle Fibonacci (spherical golden means) increments for 3D ordering:
/// PHI2 is the real root of x^3 + x - 1 = 0, PHI1 its square.
const PHI1: f64 = 0.465571231876768;
const PHI2: f64 = 0.682327803828019;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajMode {
    TwoD,
    ThreeD,
}

/// One radial readout: acquisition indices, its time stamp after the
/// inversion pulse, and its unit direction in (kz, ky, kx) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spoke {
    pub block: usize,
    pub echo: usize,
    pub time_ms: f64,
    pub dir: [f64; 3],
}

/// Spokes of one contrast plus the shared radial sample offsets.
/// Sample coordinates are dir * radius with radius (i - n/2) / n, so every
/// spoke passes through k = 0 and all coordinates stay inside [-0.5, 0.5).
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastTraj {
    pub spokes: Vec<Spoke>,
    pub radii: Vec<f64>,
}

impl ContrastTraj {
    pub fn samples_per_spoke(&self) -> usize {
        self.radii.len()
    }

    pub fn n_samples(&self) -> usize {
        self.spokes.len() * self.radii.len()
    }

    /// Flat coordinate list, spoke-major, each (kz, ky, kx).
    pub fn coords(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.n_samples());
        for s in &self.spokes {
            for &r in &self.radii {
                out.push([s.dir[0] * r, s.dir[1] * r, s.dir[2] * r]);
            }
        }
        out
    }
}

/// Full acquisition or its per-contrast subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mode: TrajMode,
    pub n_blocks: usize,
    pub spokes_per_block: usize,
    pub contrasts: Vec<ContrastTraj>,
}

fn radial_offsets(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 - (n / 2) as f64) / n as f64).collect()
}

fn spoke_dir(mode: TrajMode, global_idx: usize) -> [f64; 3] {
    let g = global_idx as f64;
    match mode {
        TrajMode::TwoD => {
            let theta = g * GOLDEN_ANGLE_RAD;
            [0.0, theta.sin(), theta.cos()]
        }
        TrajMode::ThreeD => {
            // hemisphere directions; spokes are full diameters
            let kz = (g * PHI1).fract();
            let psi = std::f64::consts::TAU * (g * PHI2).fract();
            let s = (1.0 - kz * kz).max(0.0).sqrt();
            [kz, s * psi.sin(), s * psi.cos()]
        }
    }
}

/// Golden-angle ordered acquisition with the default echo timing
/// (4.88 ms spacing, 2.24 ms first-echo offset). Returns a single-contrast
/// trajectory holding the full spoke stream in acquisition order.
pub fn golden_angle_trajectory(
    n_blocks: usize,
    spokes_per_block: usize,
    samples_per_spoke: usize,
    mode: TrajMode,
) -> Trajectory {
    golden_angle_trajectory_with_timing(
        n_blocks,
        spokes_per_block,
        samples_per_spoke,
        mode,
        DEFAULT_ECHO_SPACING_MS,
        DEFAULT_FIRST_ECHO_MS,
    )
}

pub fn golden_angle_trajectory_with_timing(
    n_blocks: usize,
    spokes_per_block: usize,
    samples_per_spoke: usize,
    mode: TrajMode,
    echo_spacing_ms: f64,
    first_echo_ms: f64,
) -> Trajectory {
    assert!(n_blocks >= 1 && spokes_per_block >= 1 && samples_per_spoke >= 1);
    let mut spokes = Vec::with_capacity(n_blocks * spokes_per_block);
    for block in 0..n_blocks {
        for echo in 0..spokes_per_block {
            let g = block * spokes_per_block + echo;
            spokes.push(Spoke {
                block,
                echo,
                time_ms: first_echo_ms + echo as f64 * echo_spacing_ms,
                dir: spoke_dir(mode, g),
            });
        }
    }
    Trajectory {
        mode,
        n_blocks,
        spokes_per_block,
        contrasts: vec![ContrastTraj { spokes, radii: radial_offsets(samples_per_spoke) }],
    }
}

/// TI-window membership, left-closed right-open.
pub fn assign_window(time_ms: f64, windows: &[(f64, f64)]) -> Option<usize> {
    windows.iter().position(|&(lo, hi)| time_ms >= lo && time_ms < hi)
}

/// Retain the first `keep_blocks` blocks in acquisition order and bin each
/// retained spoke into the contrast whose TI window contains its time stamp;
/// spokes outside all windows are dropped. A contrast left empty is allowed
/// (callers should warn); it is reported by `ContrastTraj::n_samples() == 0`.
pub fn subset_blocks(
    traj: &Trajectory,
    keep_blocks: usize,
    ti_windows: &[(f64, f64)],
) -> Result<Trajectory> {
    if traj.contrasts.len() != 1 {
        return Err(Error::InvalidConfig(
            "subset_blocks expects the full single-stream acquisition".into(),
        ));
    }
    if keep_blocks > traj.n_blocks {
        return Err(Error::InvalidConfig(format!(
            "keep_blocks {keep_blocks} exceeds acquired blocks {}",
            traj.n_blocks
        )));
    }
    if ti_windows.is_empty() {
        return Err(Error::InvalidConfig("no TI windows given".into()));
    }
    for &(lo, hi) in ti_windows {
        if !(hi > lo) {
            return Err(Error::InvalidConfig(format!("bad TI window ({lo}, {hi})")));
        }
    }
    let full = &traj.contrasts[0];
    let mut contrasts: Vec<ContrastTraj> = (0..ti_windows.len())
        .map(|_| ContrastTraj { spokes: Vec::new(), radii: full.radii.clone() })
        .collect();
    for spoke in &full.spokes {
        if spoke.block >= keep_blocks {
            continue;
        }
        if let Some(w) = assign_window(spoke.time_ms, ti_windows) {
            contrasts[w].spokes.push(spoke.clone());
        }
    }
    Ok(Trajectory {
        mode: traj.mode,
        n_blocks: keep_blocks,
        spokes_per_block: traj.spokes_per_block,
        contrasts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward_model::PAPER_TI_WINDOWS_MS;

    #[test]
    fn golden_increment_matches_published_value() {
        assert!((GOLDEN_ANGLE_RAD.to_degrees() - 111.2461).abs() < 1e-4);
        let t = golden_angle_trajectory(1, 3, 16, TrajMode::TwoD);
        let s = &t.contrasts[0].spokes;
        for pair in s.windows(2) {
            let a0 = pair[0].dir[2].atan2(pair[0].dir[1]);
            let a1 = pair[1].dir[2].atan2(pair[1].dir[1]);
            let mut d = (a1 - a0).abs();
            if d > std::f64::consts::PI {
                d = std::f64::consts::TAU - d;
            }
            assert!((d - GOLDEN_ANGLE_RAD).abs() < 1e-12);
        }
    }

    #[test]
    fn coordinates_stay_in_half_open_box_and_hit_zero() {
        for mode in [TrajMode::TwoD, TrajMode::ThreeD] {
            for n in [33usize, 64] {
                let t = golden_angle_trajectory(3, 5, n, mode);
                let c = &t.contrasts[0];
                let mut has_zero = vec![false; c.spokes.len()];
                for (s, coord) in c.coords().iter().enumerate() {
                    let r = (coord[0].powi(2) + coord[1].powi(2) + coord[2].powi(2)).sqrt();
                    assert!(r <= 0.5 + 1e-12);
                    for v in coord {
                        assert!((-0.5..0.5).contains(v), "{v}");
                    }
                    if r == 0.0 {
                        has_zero[s / n] = true;
                    }
                }
                assert!(has_zero.iter().all(|b| *b), "every spoke passes through k=0");
            }
        }
    }

    #[test]
    fn unit_directions() {
        let t = golden_angle_trajectory(7, 11, 5, TrajMode::ThreeD);
        for s in &t.contrasts[0].spokes {
            let n = (s.dir[0].powi(2) + s.dir[1].powi(2) + s.dir[2].powi(2)).sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn default_timing_constants() {
        assert_eq!(super::super::PAPER_N_BLOCKS, 224);
        assert!((DEFAULT_ECHO_SPACING_MS - 4.88).abs() < 1e-12);
        let t = golden_angle_trajectory(2, 3, 4, TrajMode::TwoD);
        let s = &t.contrasts[0].spokes;
        assert!((s[1].time_ms - s[0].time_ms - 4.88).abs() < 1e-12);
        // timing restarts at each inversion block
        assert_eq!(s[3].echo, 0);
        assert!((s[3].time_ms - s[0].time_ms).abs() < 1e-12);
    }

    #[test]
    fn window_assignment_is_left_closed() {
        let w = &PAPER_TI_WINDOWS_MS;
        assert_eq!(assign_window(600.0, w), Some(1)); // inside TI2
        assert_eq!(assign_window(758.64, w), Some(2)); // shared boundary goes right
        assert_eq!(assign_window(100.0, w), None);
        assert_eq!(assign_window(1881.04, w), None); // right-open end
    }

    #[test]
    fn keep_quarter_blocks_reduces_spokes_exactly_four_times() {
        let full = golden_angle_trajectory(224, 385, 3, TrajMode::ThreeD);
        let all = subset_blocks(&full, 224, &PAPER_TI_WINDOWS_MS).unwrap();
        let kept = subset_blocks(&full, 56, &PAPER_TI_WINDOWS_MS).unwrap();
        for (a, k) in all.contrasts.iter().zip(&kept.contrasts) {
            assert!(a.spokes.len() > 0);
            assert_eq!(a.spokes.len(), 4 * k.spokes.len());
        }
        // echo counts per window from the default echo train: 21/41/61/61
        let per_block: Vec<usize> =
            all.contrasts.iter().map(|c| c.spokes.len() / 224).collect();
        assert_eq!(per_block, vec![21, 41, 61, 61]);
    }

    #[test]
    fn keep_all_with_covering_window_is_identity() {
        let full = golden_angle_trajectory(8, 6, 9, TrajMode::TwoD);
        let sub = subset_blocks(&full, 8, &[(0.0, 1e9)]).unwrap();
        assert_eq!(sub.contrasts.len(), 1);
        assert_eq!(sub.contrasts[0], full.contrasts[0]);
    }

    #[test]
    fn empty_contrast_is_allowed_but_reported() {
        let full = golden_angle_trajectory(4, 2, 5, TrajMode::TwoD);
        // second window can never match the two echoes at 2.24 / 7.12 ms
        let sub = subset_blocks(&full, 4, &[(0.0, 20.0), (100.0, 200.0)]).unwrap();
        assert!(sub.contrasts[0].n_samples() > 0);
        assert_eq!(sub.contrasts[1].n_samples(), 0);
    }
}
