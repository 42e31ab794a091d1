use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tpms_field::{AxisTrig, TpmsField, Trig};

/// Tiling and sampling resolution of a printable lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Unit cells along x, y, z.
    pub tiling: [usize; 3],
    /// Physical edge length of one unit cell in µm.
    pub cell_length_um: f64,
    /// Voxels per unit-cell edge.
    pub resolution: usize,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        LatticeSpec {
            tiling: [4, 4, 2],
            cell_length_um: 50.0,
            resolution: 64,
        }
    }
}

impl LatticeSpec {
    pub const MIN_RESOLUTION: usize = 8;

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn with_tiling(mut self, tiling: [usize; 3]) -> Self {
        self.tiling = tiling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < Self::MIN_RESOLUTION {
            return Err(Error::Config(format!(
                "resolution {} below minimum {}",
                self.resolution,
                Self::MIN_RESOLUTION
            )));
        }
        if self.tiling.iter().any(|&n| n == 0) {
            return Err(Error::Config(format!(
                "tiling {:?} must be at least 1 in every direction",
                self.tiling
            )));
        }
        if !(self.cell_length_um > 0.0) {
            return Err(Error::Config(format!(
                "cell length {} µm must be positive",
                self.cell_length_um
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.tiling.map(|n| n * self.resolution)
    }

    /// Voxel edge in implicit units.
    pub fn cell_size(&self) -> f64 {
        std::f64::consts::TAU / self.resolution as f64
    }

    /// Conversion factor from implicit units to µm.
    pub fn um_per_unit(&self) -> f64 {
        self.cell_length_um / std::f64::consts::TAU
    }

    /// Voxel edge in µm.
    pub fn voxel_um(&self) -> f64 {
        self.cell_length_um / self.resolution as f64
    }

    pub fn extent_um(&self) -> [f64; 3] {
        self.tiling.map(|n| n as f64 * self.cell_length_um)
    }
}

/// Occupancy on a regular grid, x-fastest ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    occupancy: Vec<bool>,
    cell_size: f64,
}

impl VoxelGrid {
    pub fn new(dims: [usize; 3], occupancy: Vec<bool>, cell_size: f64) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::Config(format!("grid dims {dims:?} must all be >= 2")));
        }
        if occupancy.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::Config(format!(
                "occupancy has {} cells, dims {dims:?} need {}",
                occupancy.len(),
                dims[0] * dims[1] * dims[2]
            )));
        }
        Ok(VoxelGrid {
            dims,
            occupancy,
            cell_size,
        })
    }

    pub fn from_fn(
        dims: [usize; 3],
        cell_size: f64,
        mut solid: impl FnMut(usize, usize, usize) -> bool,
    ) -> Result<Self> {
        let mut occupancy = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    occupancy.push(solid(i, j, k));
                }
            }
        }
        Self::new(dims, occupancy, cell_size)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: bool) {
        let idx = self.index(i, j, k);
        self.occupancy[idx] = v;
    }

    pub fn solid_count(&self) -> usize {
        self.occupancy.iter().filter(|&&v| v).count()
    }

    pub fn solid_fraction(&self) -> f64 {
        self.solid_count() as f64 / self.len() as f64
    }

    pub(crate) fn with_occupancy(&self, occupancy: Vec<bool>) -> Self {
        debug_assert_eq!(occupancy.len(), self.occupancy.len());
        VoxelGrid {
            dims: self.dims,
            occupancy,
            cell_size: self.cell_size,
        }
    }

    /// Run-length encoded text dump: a header line, then `<count>x<0|1>` tokens.
    pub fn to_rle(&self) -> String {
        let [nx, ny, nz] = self.dims;
        let mut out = format!("voxelgrid {nx} {ny} {nz} {}\n", self.cell_size);
        let mut iter = self.occupancy.iter().copied().peekable();
        let mut first = true;
        while let Some(v) = iter.next() {
            let mut run = 1usize;
            while iter.peek() == Some(&v) {
                iter.next();
                run += 1;
            }
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{run}x{}", u8::from(v));
        }
        out.push('\n');
        out
    }

    pub fn from_rle(text: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Config(format!("bad voxel RLE: {reason}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("missing header"))?
            .split_whitespace()
            .collect();
        if header.len() != 5 || header[0] != "voxelgrid" {
            return Err(bad("header must be `voxelgrid nx ny nz cell_size`"));
        }
        let parse_dim = |s: &str| s.parse::<usize>().map_err(|_| bad("dimension"));
        let dims = [parse_dim(header[1])?, parse_dim(header[2])?, parse_dim(header[3])?];
        let cell_size: f64 = header[4].parse().map_err(|_| bad("cell size"))?;
        let mut occupancy = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for token in lines.flat_map(str::split_whitespace) {
            let (count, value) = token.split_once('x').ok_or_else(|| bad(token))?;
            let count: usize = count.parse().map_err(|_| bad(token))?;
            let value = match value {
                "0" => false,
                "1" => true,
                _ => return Err(bad(token)),
            };
            occupancy.extend(std::iter::repeat_n(value, count));
        }
        Self::new(dims, occupancy, cell_size)
    }

    pub fn write_rle(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_rle()).map_err(|e| Error::io(path, e))
    }
}

/// Membership margins of one unit cell sampled at voxel centers; the lattice
/// repeats them periodically.
#[derive(Clone, Debug)]
pub struct UnitCellSamples<T> {
    pub resolution: usize,
    pub margins: Vec<T>,
}

impl<T: Scalar> UnitCellSamples<T> {
    #[inline]
    pub fn margin(&self, i: usize, j: usize, k: usize) -> T {
        let r = self.resolution;
        self.margins[(i % r) + r * ((j % r) + r * (k % r))]
    }
}

/// Samples the field's membership margin at the `resolution³` voxel centers of one cell.
pub fn sample_unit_cell<T: Scalar>(field: &TpmsField<T>, resolution: usize) -> UnitCellSamples<T> {
    let h = T::TAU() / T::from_usize_lossy(resolution);
    let axis: Vec<AxisTrig<T>> = (0..resolution)
        .map(|i| AxisTrig::at((T::from_usize_lossy(i) + T::lit(0.5)) * h))
        .collect();
    let mut margins = vec![T::zero(); resolution * resolution * resolution];
    margins
        .par_chunks_mut(resolution * resolution)
        .enumerate()
        .for_each(|(k, slab)| {
            for j in 0..resolution {
                for i in 0..resolution {
                    let tr = Trig::from_axes(&axis[i], &axis[j], &axis[k]);
                    slab[i + resolution * j] = field.margin_trig(&tr);
                }
            }
        });
    UnitCellSamples { resolution, margins }
}

/// Samples the sheet solid at every voxel center of the tiled lattice.
pub fn voxelize<T: Scalar>(field: &TpmsField<T>, spec: &LatticeSpec) -> Result<VoxelGrid> {
    spec.validate()?;
    let cell = sample_unit_cell(field, spec.resolution);
    let dims = spec.dims();
    VoxelGrid::from_fn(dims, spec.cell_size(), |i, j, k| cell.margin(i, j, k) <= T::zero())
}
