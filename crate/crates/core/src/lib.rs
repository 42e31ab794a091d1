//! Closed-loop discovery of energy-dissipating TPMS metamaterials.

pub mod acquisition;
pub mod campaign;
pub mod curve_lab;
pub mod error;
pub mod lattice_geometry;
pub mod scalar;
pub mod surrogate;
pub mod tpms_field;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Weights = tpms_field::WeightVector<f64>;
pub type Field = tpms_field::TpmsField<f64>;
pub type Curve = curve_lab::StressStrainCurve<f64>;
pub type Canonical = curve_lab::CanonicalCurve<f64>;
pub type Ensemble = surrogate::EnsembleModel<f64>;
pub type Field32 = tpms_field::TpmsField<f32>;
pub type Ensemble32 = surrogate::EnsembleModel<f32>;
