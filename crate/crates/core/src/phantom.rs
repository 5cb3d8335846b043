//! Synthetic multi-contrast 3D phantoms.
//!
//! Shared anatomy (random ellipsoids with piecewise-constant T1 and proton
//! density, plus a smooth phase) produces one volume per inversion time
//! through an ideal inversion-recovery signal model. All contrasts share
//! support and edge locations, which is exactly the redundancy a joint prior
//! is meant to exploit.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::volume::{GridDims, MultiContrastVolume};

/// The four average inversion times reported with the reference acquisition
/// (midpoints of the shipped TI windows), in milliseconds.
pub const PAPER_TIS_MS: [f64; 4] = [365.8, 658.6, 907.48, 1732.2];

#[derive(Debug, Clone)]
pub struct PhantomSpec {
    pub grid: GridDims,
    pub seed: u64,
    pub n_ellipsoids: usize,
    /// T1 range in ms, inclusive.
    pub t1_range_ms: (f64, f64),
    /// Proton-density range, inclusive.
    pub pd_range: (f64, f64),
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("z", self.grid.nz), ("y", self.grid.ny), ("x", self.grid.nx)] {
            if n < 8 || n % 4 != 0 {
                return Err(Error::InvalidConfig(format!(
                    "phantom grid extent {name}={n} must be >= 8 and divisible by 4"
                )));
            }
        }
        let ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo;
        if !ok(self.t1_range_ms) {
            return Err(Error::InvalidConfig(format!(
                "T1 range must be positive: {:?}",
                self.t1_range_ms
            )));
        }
        if !ok(self.pd_range) {
            return Err(Error::InvalidConfig(format!(
                "proton-density range must be positive: {:?}",
                self.pd_range
            )));
        }
        Ok(())
    }
}

/// Piecewise-constant tissue parameters plus a smooth phase map. T1 and
/// proton density are zero outside the support.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueMaps {
    pub grid: GridDims,
    pub t1_ms: Vec<f64>,
    pub pd: Vec<f64>,
    pub phase: Vec<f64>,
}

struct Ellipsoid {
    center: [f64; 3],
    inv_semi: [f64; 3],
    rot: [[f64; 3]; 3],
    t1_ms: f64,
    pd: f64,
}

impl Ellipsoid {
    fn contains(&self, u: [f64; 3]) -> bool {
        let d = [u[0] - self.center[0], u[1] - self.center[1], u[2] - self.center[2]];
        let mut q = 0.0;
        for r in 0..3 {
            let p = self.rot[r][0] * d[0] + self.rot[r][1] * d[1] + self.rot[r][2] * d[2];
            q += (p * self.inv_semi[r]).powi(2);
        }
        q <= 1.0
    }
}

fn rotation_zyx(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    // R = Rz(a) * Ry(b) * Rx(c)
    [
        [ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc],
        [sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc],
        [-sb, cb * sc, cb * cc],
    ]
}

/// Deterministic for a fixed seed. The first ellipsoid is a large head-like
/// support; the rest are interior structures painted in order, later ones
/// overwriting earlier ones.
pub fn generate_tissue_maps(spec: &PhantomSpec) -> Result<TissueMaps> {
    spec.validate()?;
    let n = spec.grid.n_voxels();
    if n == 0 {
        return Err(Error::InvalidConfig("zero-volume grid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut ellipsoids = Vec::with_capacity(spec.n_ellipsoids);
    for k in 0..spec.n_ellipsoids {
        let (center, semi) = if k == 0 {
            (
                [0.0, 0.0, 0.0],
                [
                    rng.gen_range(0.75..0.9),
                    rng.gen_range(0.75..0.9),
                    rng.gen_range(0.75..0.9),
                ],
            )
        } else {
            (
                [
                    rng.gen_range(-0.35..0.35),
                    rng.gen_range(-0.35..0.35),
                    rng.gen_range(-0.35..0.35),
                ],
                [
                    rng.gen_range(0.1..0.4),
                    rng.gen_range(0.1..0.4),
                    rng.gen_range(0.1..0.4),
                ],
            )
        };
        let rot = rotation_zyx(
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(0.0..std::f64::consts::TAU),
        );
        let t1_ms = rng.gen_range(spec.t1_range_ms.0..=spec.t1_range_ms.1);
        let pd = rng.gen_range(spec.pd_range.0..=spec.pd_range.1);
        ellipsoids.push(Ellipsoid {
            center,
            inv_semi: [1.0 / semi[0], 1.0 / semi[1], 1.0 / semi[2]],
            rot,
            t1_ms,
            pd,
        });
    }

    // low-order smooth phase
    let pc: Vec<f64> = (0..7).map(|_| rng.gen_range(-0.8..0.8)).collect();

    let (nz, ny, nx) = (spec.grid.nz, spec.grid.ny, spec.grid.nx);
    let mut t1 = vec![0.0; n];
    let mut pd = vec![0.0; n];
    let mut phase = vec![0.0; n];
    for z in 0..nz {
        let uz = (z as f64 - nz as f64 / 2.0) / (nz as f64 / 2.0);
        for y in 0..ny {
            let uy = (y as f64 - ny as f64 / 2.0) / (ny as f64 / 2.0);
            for x in 0..nx {
                let ux = (x as f64 - nx as f64 / 2.0) / (nx as f64 / 2.0);
                let idx = (z * ny + y) * nx + x;
                let u = [uz, uy, ux];
                for e in &ellipsoids {
                    if e.contains(u) {
                        t1[idx] = e.t1_ms;
                        pd[idx] = e.pd;
                    }
                }
                phase[idx] = pc[0]
                    + pc[1] * ux
                    + pc[2] * uy
                    + pc[3] * uz
                    + pc[4] * ux * uy
                    + pc[5] * uy * uz
                    + pc[6] * ux * uz;
            }
        }
    }
    Ok(TissueMaps { grid: spec.grid, t1_ms: t1, pd, phase })
}

/// Ideal single-inversion recovery: pd * (1 - 2 exp(-TI/T1)).
pub fn ir_signal(ti_ms: f64, t1_ms: f64, pd: f64) -> f64 {
    debug_assert!(t1_ms > 0.0 && ti_ms >= 0.0);
    pd * (1.0 - 2.0 * (-ti_ms / t1_ms).exp())
}

/// One contrast per TI; the signed IR signal is carried in the complex value
/// (no magnitude operation, so the forward model stays linear). The output is
/// normalized jointly across contrasts to max magnitude 1.
pub fn generate_multicontrast(maps: &TissueMaps, tis_ms: &[f64]) -> Result<MultiContrastVolume> {
    if tis_ms.is_empty() {
        return Err(Error::InvalidConfig("empty TI list".into()));
    }
    let n = maps.grid.n_voxels();
    let mut vol = MultiContrastVolume::zeros(tis_ms.len(), maps.grid);
    for (c, &ti) in tis_ms.iter().enumerate() {
        let out = vol.contrast_mut(c);
        for v in 0..n {
            if maps.t1_ms[v] > 0.0 {
                let s = ir_signal(ti, maps.t1_ms[v], maps.pd[v]);
                out[v] = Complex64::from_polar(1.0, maps.phase[v]) * s;
            }
        }
    }
    vol.normalize_max();
    Ok(vol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64, n_ellipsoids: usize) -> PhantomSpec {
        PhantomSpec {
            grid: GridDims::new(16, 16, 16),
            seed,
            n_ellipsoids,
            t1_range_ms: (800.0, 1400.0),
            pd_range: (0.6, 1.0),
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate_tissue_maps(&spec(7, 6)).unwrap();
        let b = generate_tissue_maps(&spec(7, 6)).unwrap();
        assert_eq!(a, b);
        let c = generate_tissue_maps(&spec(8, 6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_ellipsoids_means_zero_support() {
        let m = generate_tissue_maps(&spec(3, 0)).unwrap();
        assert!(m.t1_ms.iter().all(|v| *v == 0.0));
        assert!(m.pd.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn t1_values_stay_in_range() {
        let m = generate_tissue_maps(&spec(11, 8)).unwrap();
        let mut in_support = 0;
        for (&t1, &pd) in m.t1_ms.iter().zip(&m.pd) {
            if t1 != 0.0 {
                in_support += 1;
                assert!((800.0..=1400.0).contains(&t1));
                assert!((0.6..=1.0).contains(&pd));
            }
        }
        assert!(in_support > 0, "head ellipsoid should cover some voxels");
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = spec(0, 1);
        s.grid = GridDims::new(6, 16, 16); // too small
        assert!(generate_tissue_maps(&s).is_err());
        let mut s = spec(0, 1);
        s.grid = GridDims::new(16, 18, 16); // not divisible by 4
        assert!(generate_tissue_maps(&s).is_err());
        let mut s = spec(0, 1);
        s.t1_range_ms = (0.0, 100.0);
        assert!(generate_tissue_maps(&s).is_err());
    }

    #[test]
    fn ir_signal_limits() {
        // full recovery
        assert!((ir_signal(1e12, 1000.0, 0.83) - 0.83).abs() < 1e-12);
        // null point at TI = T1 ln 2
        let null = ir_signal(1000.0 * std::f64::consts::LN_2, 1000.0, 1.0);
        assert!(null.abs() < 1e-12, "{null}");
        // direct evaluation at the first average TI
        let v = ir_signal(365.8, 1000.0, 1.0);
        assert!((v - (-0.38728)).abs() < 1e-5, "{v}");
    }

    #[test]
    fn four_tis_give_four_contrasts_normalized() {
        let m = generate_tissue_maps(&spec(5, 6)).unwrap();
        let vol = generate_multicontrast(&m, &PAPER_TIS_MS).unwrap();
        assert_eq!(vol.n_contrasts, 4);
        assert_eq!(vol.max_abs(), 1.0);
        assert!(vol.is_finite());
    }

    #[test]
    fn uniform_t1_factorizes() {
        // with a uniform T1 map every contrast is a scalar multiple of the
        // PD+phase image
        let mut m = generate_tissue_maps(&spec(9, 5)).unwrap();
        for t1 in m.t1_ms.iter_mut() {
            if *t1 != 0.0 {
                *t1 = 1100.0;
            }
        }
        let vol = generate_multicontrast(&m, &[300.0, 900.0]).unwrap();
        let n = vol.n_voxels();
        let (a, b) = (vol.contrast(0), vol.contrast(1));
        let s0 = ir_signal(300.0, 1100.0, 1.0);
        let s1 = ir_signal(900.0, 1100.0, 1.0);
        let expect_ratio = s1 / s0;
        for v in 0..n {
            if a[v].norm() > 1e-9 {
                let ratio = b[v] / a[v];
                assert!((ratio.re - expect_ratio).abs() < 1e-9 && ratio.im.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn contrasts_share_edge_support() {
        // two-tissue phantom: a T1 step whose edge must appear in every
        // contrast generated away from null points
        let grid = GridDims::new(8, 8, 8);
        let n = grid.n_voxels();
        let mut maps = TissueMaps {
            grid,
            t1_ms: vec![0.0; n],
            pd: vec![0.0; n],
            phase: vec![0.0; n],
        };
        for z in 0..8 {
            for y in 0..8 {
                for x in 0..8 {
                    let idx = (z * 8 + y) * 8 + x;
                    maps.t1_ms[idx] = if x < 4 { 900.0 } else { 1300.0 };
                    maps.pd[idx] = 1.0;
                }
            }
        }
        let vol = generate_multicontrast(&maps, &[400.0, 1700.0]).unwrap();
        // x-gradient magnitude support must match between contrasts
        for c in 0..2 {
            let g = vol.contrast(c);
            for z in 0..8 {
                for y in 0..8 {
                    for x in 0..7 {
                        let idx = (z * 8 + y) * 8 + x;
                        let diff = (g[idx + 1] - g[idx]).norm();
                        let edge = x == 3;
                        assert_eq!(diff > 1e-9, edge, "c={c} x={x} diff={diff}");
                    }
                }
            }
        }
    }
}
