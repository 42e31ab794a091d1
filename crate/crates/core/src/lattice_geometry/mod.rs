//! Voxel sampling of TPMS sheets, component filtering, surface extraction and export.

mod components;
mod export;
mod mesh;
mod voxel;
mod wall;

pub use components::{filter_components, label_components, ComponentReport, Labels};
pub use export::{export_mesh, read_stl, write_obj, write_stl, MeshFormat, StlTriangle};
pub use mesh::{extract_surface, SurfaceMesh};
pub use voxel::{sample_unit_cell, voxelize, LatticeSpec, UnitCellSamples, VoxelGrid};
pub use wall::{measure_wall_thickness, project_to_surface};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tpms_field::TpmsField;

/// Voxelizes, keeps the largest solid component and extracts its closed surface.
pub fn design_mesh<T: Scalar>(field: &TpmsField<T>, spec: &LatticeSpec) -> Result<SurfaceMesh> {
    let grid = voxelize(field, spec)?;
    let (kept, _) = filter_components(&grid)?;
    extract_surface(&kept, Some(field), spec)
}

/// Minimum fraction of solid voxels the largest component must keep for a design
/// to count as printable.
pub const MIN_RETAINED_FRACTION: f64 = 0.95;

/// Outcome of the printability check for one design.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidityReport {
    pub solid_fraction: f64,
    pub retained_fraction: f64,
    pub components: ComponentReport,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        !self.components.has_cavities() && self.retained_fraction >= MIN_RETAINED_FRACTION
    }

    pub fn reason(&self) -> Option<String> {
        if self.components.has_cavities() {
            Some(format!(
                "{} enclosed void cavities ({} voxels)",
                self.components.cavity_count, self.components.cavity_voxels
            ))
        } else if self.retained_fraction < MIN_RETAINED_FRACTION {
            Some(format!(
                "largest component keeps only {:.1}% of the solid",
                100.0 * self.retained_fraction
            ))
        } else {
            None
        }
    }
}

/// Voxelizes and filters a design, reporting cavities and floating material.
///
/// A design without any solid voxel is reported as an [`Error::EmptyStructure`].
pub fn check_design<T: Scalar>(field: &TpmsField<T>, spec: &LatticeSpec) -> Result<ValidityReport> {
    let grid = voxelize(field, spec)?;
    let solid = grid.solid_count();
    let (_, components) = filter_components(&grid)?;
    Ok(ValidityReport {
        solid_fraction: solid as f64 / grid.len() as f64,
        retained_fraction: components.kept_voxels as f64 / solid as f64,
        components,
    })
}

/// `true` iff the filtered structure has no enclosed cavities and its largest
/// component retains at least 95% of the solid.
pub fn is_valid_design<T: Scalar>(field: &TpmsField<T>, spec: &LatticeSpec) -> Result<bool> {
    match check_design(field, spec) {
        Ok(report) => Ok(report.is_valid()),
        Err(Error::EmptyStructure) => Ok(false),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tpms_field::{Primitive, WeightVector};

    #[test]
    fn pure_primitives_are_printable() {
        let spec = LatticeSpec::default();
        for prim in Primitive::ALL {
            let field = TpmsField::from_weights(WeightVector::<f64>::unit(prim));
            let report = check_design(&field, &spec).unwrap();
            assert!(report.is_valid(), "{prim}: {report:?}");
        }
    }

    #[test]
    fn hollow_ball_and_split_blobs_are_rejected() {
        let ball = VoxelGrid::from_fn([11, 11, 11], 1.0, |i, j, k| {
            let d2 = [i, j, k].iter().map(|&v| (v as i64 - 5).pow(2)).sum::<i64>();
            (4..=16).contains(&d2)
        })
        .unwrap();
        let (_, report) = filter_components(&ball).unwrap();
        assert!(report.has_cavities());

        let blobs = VoxelGrid::from_fn([12, 12, 12], 1.0, |i, j, k| {
            (i < 3 && j < 3 && k < 3) || (i > 8 && j > 8 && k > 8 && !(i == 11 && j == 11 && k == 11))
        })
        .unwrap();
        let (_, report) = filter_components(&blobs).unwrap();
        let retained = report.kept_voxels as f64 / blobs.solid_count() as f64;
        assert!(retained < MIN_RETAINED_FRACTION);
    }
}
