use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the number of grid nodes (64 MiB per complex array).
pub const DEFAULT_MAX_POINTS: usize = 1 << 22;

const MIN_POINTS: usize = 8;
const SUM_CHUNK: usize = 4096;

/// Uniform periodic grid with cell-centred nodes `−L/2 + (i + ½)·dx`.
///
/// A one-dimensional grid runs along z; x and y are then fixed at 0.
/// Node `(ix, iy, iz)` is stored at `(ix·ny + iy)·nz + iz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    points: [usize; 3],
    extent: [f64; 3],
    spacing: [f64; 3],
}

impl Grid {
    pub fn new_1d(points: usize, length: f64) -> Result<Self> {
        Self::with_cap(1, [1, 1, points], [0.0, 0.0, length], DEFAULT_MAX_POINTS)
    }

    pub fn new_3d(points: [usize; 3], extent: [f64; 3]) -> Result<Self> {
        Self::with_cap(3, points, extent, DEFAULT_MAX_POINTS)
    }

    /// `dim` = 1 or 3 with the same resolution and length on every axis.
    pub fn cubic(dim: usize, points: usize, length: f64) -> Result<Self> {
        match dim {
            1 => Self::new_1d(points, length),
            3 => Self::new_3d([points; 3], [length; 3]),
            _ => Err(Error::Grid(format!("dimension must be 1 or 3, got {dim}"))),
        }
    }

    pub fn with_cap(dim: usize, points: [usize; 3], extent: [f64; 3], max_points: usize) -> Result<Self> {
        let axes: &[usize] = match dim {
            1 => &[2],
            3 => &[0, 1, 2],
            _ => return Err(Error::Grid(format!("dimension must be 1 or 3, got {dim}"))),
        };
        let mut spacing = [0.0; 3];
        for &a in axes {
            if points[a] < MIN_POINTS {
                return Err(Error::Grid(format!("at least {MIN_POINTS} points per axis required, got {}", points[a])));
            }
            if !(extent[a].is_finite() && extent[a] > 0.0) {
                return Err(Error::Grid(format!("extent must be positive, got {}", extent[a])));
            }
            spacing[a] = extent[a] / points[a] as f64;
        }
        let total = points
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .filter(|&t| t <= max_points)
            .ok_or_else(|| Error::Grid(format!("{points:?} exceeds the cap of {max_points} nodes")))?;
        debug_assert!(total > 0);
        let (points, extent) = if dim == 1 {
            ([1, 1, points[2]], [0.0, 0.0, extent[2]])
        } else {
            (points, extent)
        };
        Ok(Self {
            dim,
            points,
            extent,
            spacing,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> [usize; 3] {
        self.points
    }

    pub fn extent(&self) -> [f64; 3] {
        self.extent
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    /// Spacing along z, the axis shared by both dimensions.
    pub fn dz(&self) -> f64 {
        self.spacing[2]
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn active_axes(&self) -> &'static [usize] {
        if self.dim == 1 {
            &[2]
        } else {
            &[0, 1, 2]
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.active_axes().iter().map(|&a| self.spacing[a]).product()
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        if self.points[axis] == 1 {
            0.0
        } else {
            -0.5 * self.extent[axis] + (i as f64 + 0.5) * self.spacing[axis]
        }
    }

    pub fn indices(&self, index: usize) -> [usize; 3] {
        let [_, ny, nz] = self.points;
        [index / (ny * nz), (index / nz) % ny, index % nz]
    }

    pub fn coords(&self, index: usize) -> [f64; 3] {
        let [ix, iy, iz] = self.indices(index);
        [self.axis_coord(0, ix), self.axis_coord(1, iy), self.axis_coord(2, iz)]
    }

    /// Largest eigenvalue of the negated periodic Laplacian.
    pub fn laplacian_bound(&self) -> f64 {
        self.active_axes().iter().map(|&a| 4.0 / (self.spacing[a] * self.spacing[a])).sum()
    }

    pub fn sample<T: Send>(&self, f: impl Fn([f64; 3]) -> T + Sync) -> Vec<T> {
        (0..self.len()).into_par_iter().map(|i| f(self.coords(i))).collect()
    }

    /// Second-order periodic Laplacian of `f` into `out`.
    pub fn laplacian(&self, f: &[Complex64], out: &mut [Complex64]) {
        let [nx, ny, nz] = self.points;
        assert_eq!(f.len(), self.len());
        assert_eq!(out.len(), self.len());
        let inv = self.spacing.map(|h| if h > 0.0 { 1.0 / (h * h) } else { 0.0 });
        let three = self.dim == 3;
        out.par_chunks_mut(nz).enumerate().for_each(|(row, o)| {
            let (ix, iy) = (row / ny, row % ny);
            let base = row * nz;
            let (xp, xm, yp, ym) = if three {
                (
                    (((ix + 1) % nx) * ny + iy) * nz,
                    (((ix + nx - 1) % nx) * ny + iy) * nz,
                    (ix * ny + (iy + 1) % ny) * nz,
                    (ix * ny + (iy + ny - 1) % ny) * nz,
                )
            } else {
                (0, 0, 0, 0)
            };
            for iz in 0..nz {
                let c = f[base + iz];
                let zp = f[base + (iz + 1) % nz];
                let zm = f[base + (iz + nz - 1) % nz];
                let mut v = (zp + zm - c * 2.0) * inv[2];
                if three {
                    v += (f[xp + iz] + f[xm + iz] - c * 2.0) * inv[0];
                    v += (f[yp + iz] + f[ym + iz] - c * 2.0) * inv[1];
                }
                o[iz] = v;
            }
        });
    }
}

/// Sum of `f(i)` for `i < len` in a fixed order, independent of thread count.
pub(crate) fn ordered_sum(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let partials: Vec<f64> = (0..len.div_ceil(SUM_CHUNK))
        .into_par_iter()
        .map(|c| (c * SUM_CHUNK..((c + 1) * SUM_CHUNK).min(len)).map(&f).sum())
        .collect();
    partials.iter().sum()
}
