//! Deep-ensemble surrogate mapping (weights, strain, phase) → stress.
//!
//! Each member is a dual-headed MLP: one head embeds the eight design weights,
//! the other a scalar strain plus a loading/unloading flag; a shared trunk maps
//! the concatenated embeddings to a single standardized stress value.

mod checkpoint;
mod ensemble;
mod gradcheck;
mod network;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use ensemble::{DissipationModel, EnsembleModel, MemberMeta, Normalization};
pub use gradcheck::{backprop_gradient_check, gradient_check, BnMode, GradCheckSample};
pub use network::{Activation, DualHeadMlp, Inputs};
pub use train::{train_ensemble, train_member, TrainReport, TrainingConfig, TrainingRecord, TrainingSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs of the parameter head: the eight primitive weights.
pub const PARAM_INPUTS: usize = crate::tpms_field::NUM_PRIMITIVES;
/// Inputs of the strain head: strain and a phase flag (0 loading, 1 unloading).
pub const STRAIN_INPUTS: usize = 2;

/// Architecture shared by all ensemble members. The output layer always has width 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub param_widths: Vec<usize>,
    pub strain_widths: Vec<usize>,
    pub trunk_widths: Vec<usize>,
    pub dropout: f64,
    pub batch_norm: bool,
    pub activation: Activation,
}

impl Default for MlpSpec {
    fn default() -> Self {
        MlpSpec {
            param_widths: vec![128, 128],
            strain_widths: vec![64, 64],
            trunk_widths: vec![128, 128],
            dropout: 0.1,
            batch_norm: true,
            activation: Activation::Relu,
        }
    }
}

impl MlpSpec {
    /// Reduced widths for desk-scale campaigns on a single core.
    pub fn compact() -> Self {
        MlpSpec {
            param_widths: vec![32, 32],
            strain_widths: vec![16, 16],
            trunk_widths: vec![32],
            ..Self::default()
        }
    }

    /// A network with no hidden layers: one affine map of the 10 inputs.
    pub fn linear() -> Self {
        MlpSpec {
            param_widths: vec![],
            strain_widths: vec![],
            trunk_widths: vec![],
            dropout: 0.0,
            batch_norm: false,
            activation: Activation::Identity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self
            .param_widths
            .iter()
            .chain(&self.strain_widths)
            .chain(&self.trunk_widths)
            .any(|&w| w == 0)
        {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn param_embedding(&self) -> usize {
        *self.param_widths.last().unwrap_or(&PARAM_INPUTS)
    }

    pub fn strain_embedding(&self) -> usize {
        *self.strain_widths.last().unwrap_or(&STRAIN_INPUTS)
    }
}
