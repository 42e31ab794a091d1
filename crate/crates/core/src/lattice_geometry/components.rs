use crate::error::{Error, Result};

use super::voxel::VoxelGrid;

/// Component labels for one phase (solid or void) of a grid.
#[derive(Clone, Debug)]
pub struct Labels {
    /// `u32::MAX` marks cells of the other phase.
    pub label: Vec<u32>,
    pub sizes: Vec<usize>,
    /// Whether each component touches the outer faces of the grid.
    pub touches_boundary: Vec<bool>,
}

impl Labels {
    pub const NONE: u32 = u32::MAX;

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Largest component; the earliest label wins ties.
    pub fn largest(&self) -> Option<u32> {
        let mut best: Option<(u32, usize)> = None;
        for (l, &s) in self.sizes.iter().enumerate() {
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((l as u32, s));
            }
        }
        best.map(|(l, _)| l)
    }
}

/// 6-connected labeling of all cells whose occupancy equals `phase`.
pub fn label_components(grid: &VoxelGrid, phase: bool) -> Labels {
    let [nx, ny, nz] = grid.dims();
    let occ = grid.occupancy();
    let mut label = vec![Labels::NONE; occ.len()];
    let mut sizes = Vec::new();
    let mut touches_boundary = Vec::new();
    let mut stack = Vec::new();

    for seed in 0..occ.len() {
        if occ[seed] != phase || label[seed] != Labels::NONE {
            continue;
        }
        let id = sizes.len() as u32;
        let mut size = 0usize;
        let mut boundary = false;
        label[seed] = id;
        stack.push(seed);
        while let Some(idx) = stack.pop() {
            size += 1;
            let [i, j, k] = grid.coords(idx);
            if i == 0 || j == 0 || k == 0 || i + 1 == nx || j + 1 == ny || k + 1 == nz {
                boundary = true;
            }
            let mut visit = |n: usize| {
                if occ[n] == phase && label[n] == Labels::NONE {
                    label[n] = id;
                    stack.push(n);
                }
            };
            if i > 0 {
                visit(idx - 1);
            }
            if i + 1 < nx {
                visit(idx + 1);
            }
            if j > 0 {
                visit(idx - nx);
            }
            if j + 1 < ny {
                visit(idx + nx);
            }
            if k > 0 {
                visit(idx - nx * ny);
            }
            if k + 1 < nz {
                visit(idx + nx * ny);
            }
        }
        sizes.push(size);
        touches_boundary.push(boundary);
    }

    Labels {
        label,
        sizes,
        touches_boundary,
    }
}

/// What [`filter_components`] removed and found.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ComponentReport {
    pub solid_components: usize,
    pub kept_voxels: usize,
    pub discarded_voxels: usize,
    /// Void components of the filtered grid that do not reach the grid boundary.
    pub cavity_count: usize,
    pub cavity_voxels: usize,
}

impl ComponentReport {
    pub fn has_cavities(&self) -> bool {
        self.cavity_count > 0
    }

    /// Nothing was discarded and no cavity exists.
    pub fn is_clean(&self) -> bool {
        self.discarded_voxels == 0 && !self.has_cavities()
    }
}

/// Keeps only the largest 6-connected solid component and reports enclosed voids.
pub fn filter_components(grid: &VoxelGrid) -> Result<(VoxelGrid, ComponentReport)> {
    let solid = label_components(grid, true);
    let keep = solid.largest().ok_or(Error::EmptyStructure)?;
    let occupancy: Vec<bool> = solid.label.iter().map(|&l| l == keep).collect();
    let filtered = grid.with_occupancy(occupancy);

    let voids = label_components(&filtered, false);
    let mut report = ComponentReport {
        solid_components: solid.count(),
        kept_voxels: solid.sizes[keep as usize],
        discarded_voxels: solid.sizes.iter().sum::<usize>() - solid.sizes[keep as usize],
        ..Default::default()
    };
    for (size, boundary) in voids.sizes.iter().zip(&voids.touches_boundary) {
        if !boundary {
            report.cavity_count += 1;
            report.cavity_voxels += size;
        }
    }
    Ok((filtered, report))
}
