//! Stress-strain curve processing: denoising, replicate averaging, resampling onto
//! the canonical 120-point grid, and hysteresis (energy dissipation) integration.

mod curve;
mod io;
mod savgol;

pub use curve::{
    average_replicates, canonicalize, energy_dissipation, interp_clamped, loop_dissipation, CanonicalCurve,
    StressStrainCurve, CANONICAL_POINTS, KJ_PER_M3_PER_MPA,
};
pub use io::{parse_replicate_name, read_curve_csv, replicate_file_name, write_curve_csv, Phase};
pub use savgol::{savgol_coefficients, savitzky_golay, SavGolParams};

use crate::error::Result;
use crate::scalar::Scalar;

/// Average replicates, denoise each branch, and resample onto the canonical grid.
pub fn process_replicates<T: Scalar>(
    replicates: &[StressStrainCurve<T>],
    filter: SavGolParams,
) -> Result<CanonicalCurve<T>> {
    let averaged = average_replicates(replicates)?;
    let smoothed = averaged.denoised(filter)?;
    canonicalize(&smoothed)
}
