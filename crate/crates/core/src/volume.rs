//! Stacked multi-contrast complex volume.

use num_complex::Complex64;

use crate::error::{shape_err, Result};

/// Voxel grid extents in (z, y, x) order. 2D data uses z = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDims {
    pub nz: usize,
    pub ny: usize,
    pub nx: usize,
}

impl GridDims {
    pub fn new(nz: usize, ny: usize, nx: usize) -> Self {
        GridDims { nz, ny, nx }
    }

    pub fn n_voxels(&self) -> usize {
        self.nz * self.ny * self.nx
    }

    /// Centered voxel coordinate along an axis of extent `n`: idx - n/2.
    pub fn centered(idx: usize, n: usize) -> f64 {
        idx as f64 - (n / 2) as f64
    }
}

/// The stacked complex image matrix: one volume per contrast, C-order
/// (contrast, z, y, x). `scale` records the factor the raw data was divided
/// by at normalization time (1.0 if never normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiContrastVolume {
    pub n_contrasts: usize,
    pub grid: GridDims,
    pub data: Vec<Complex64>,
    pub scale: f64,
}

impl MultiContrastVolume {
    pub fn zeros(n_contrasts: usize, grid: GridDims) -> Self {
        MultiContrastVolume {
            n_contrasts,
            grid,
            data: vec![Complex64::new(0.0, 0.0); n_contrasts * grid.n_voxels()],
            scale: 1.0,
        }
    }

    pub fn from_data(n_contrasts: usize, grid: GridDims, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n_contrasts * grid.n_voxels() {
            return Err(shape_err(
                "MultiContrastVolume::from_data",
                n_contrasts * grid.n_voxels(),
                data.len(),
            ));
        }
        Ok(MultiContrastVolume { n_contrasts, grid, data, scale: 1.0 })
    }

    pub fn n_voxels(&self) -> usize {
        self.grid.n_voxels()
    }

    /// Borrow one contrast as a flat (z, y, x) slice.
    pub fn contrast(&self, c: usize) -> &[Complex64] {
        let n = self.n_voxels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn contrast_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.n_voxels();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn idx(&self, c: usize, z: usize, y: usize, x: usize) -> usize {
        ((c * self.grid.nz + z) * self.grid.ny + y) * self.grid.nx + x
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Divide by the current max magnitude so max |value| == 1 exactly,
    /// jointly over all contrasts. No-op on an all-zero volume.
    pub fn normalize_max(&mut self) {
        let m = self.max_abs();
        if m > 0.0 {
            for v in &mut self.data {
                *v /= m;
            }
            self.scale = m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_hits_exactly_one() {
        let grid = GridDims::new(2, 2, 2);
        let mut v = MultiContrastVolume::zeros(2, grid);
        v.data[3] = Complex64::new(-0.3, 0.4); // |.| = 0.5
        v.data[9] = Complex64::new(0.1, 0.0);
        v.normalize_max();
        assert_eq!(v.max_abs(), 1.0);
        assert_eq!(v.scale, 0.5);
    }

    #[test]
    fn zero_volume_normalize_is_identity() {
        let mut v = MultiContrastVolume::zeros(1, GridDims::new(2, 2, 2));
        v.normalize_max();
        assert_eq!(v.scale, 1.0);
        assert!(v.data.iter().all(|z| z.norm() == 0.0));
    }
}
