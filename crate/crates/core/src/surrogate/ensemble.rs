//! Ensemble statistics over member predictions.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve_lab::{energy_dissipation, CanonicalCurve, Phase, CANONICAL_POINTS, KJ_PER_M3_PER_MPA};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tpms_field::WeightVector;

use super::network::{DualHeadMlp, Inputs};
use super::train::TrainingSet;
use super::MlpSpec;

/// Stress standardization constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization<T> {
    pub stress_mean: T,
    pub stress_std: T,
}

impl<T: Scalar> Normalization<T> {
    /// Mean and population standard deviation of every stress sample; a
    /// degenerate spread falls back to unit scale.
    pub fn fit(data: &TrainingSet<T>) -> Self {
        let n = T::from_usize_lossy(data.stresses().count());
        let mean = data.stresses().sum::<T>() / n;
        let var = data.stresses().map(|s| (s - mean) * (s - mean)).sum::<T>() / n;
        let std = var.sqrt();
        let floor = T::lit(1e-12) * (T::one() + mean.abs());
        Normalization {
            stress_mean: mean,
            stress_std: if std > floor { std } else { T::one() },
        }
    }

    pub fn standardize(&self, stress: T) -> T {
        (stress - self.stress_mean) / self.stress_std
    }

    pub fn restore(&self, z: T) -> T {
        z * self.stress_std + self.stress_mean
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
}

/// Sample mean and unbiased variance.
pub(crate) fn mean_variance<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(xs.len());
    let shift = xs[0];
    let mean = shift + xs.iter().map(|&x| x - shift).sum::<T>() / n;
    if xs.len() < 2 {
        return (mean, T::zero());
    }
    let ss = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>();
    (mean, ss / (n - T::one()))
}

/// Anything that can score candidate designs by predicted dissipation.
pub trait DissipationModel: Sync {
    /// `(mean, variance)` of predicted dissipation in kJ/m³ per candidate.
    fn dissipation_stats(&self, candidates: &[WeightVector<f64>]) -> Vec<(f64, f64)>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel<T> {
    spec: MlpSpec,
    normalization: Normalization<T>,
    strain_max: T,
    members: Vec<DualHeadMlp<T>>,
    meta: Vec<MemberMeta>,
}

fn phase_flag<T: Scalar>(phase: Phase) -> T {
    match phase {
        Phase::Load => T::zero(),
        Phase::Unload => T::one(),
    }
}

const SCORE_CHUNK: usize = 64;

impl<T: Scalar> EnsembleModel<T> {
    pub fn new(
        spec: MlpSpec,
        normalization: Normalization<T>,
        strain_max: T,
        members: Vec<DualHeadMlp<T>>,
        meta: Vec<MemberMeta>,
    ) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::Config(format!(
                "ensemble needs at least 2 members, got {}",
                members.len()
            )));
        }
        if meta.len() != members.len() {
            return Err(Error::Config("member metadata count mismatch".into()));
        }
        if members.iter().any(|m| m.spec() != &spec) {
            return Err(Error::Config("ensemble members must share one architecture".into()));
        }
        if !(strain_max > T::zero()) {
            return Err(Error::Config("reference strain must be positive".into()));
        }
        Ok(EnsembleModel {
            spec,
            normalization,
            strain_max,
            members,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn normalization(&self) -> &Normalization<T> {
        &self.normalization
    }

    /// Strain amplitude used when scoring designs without a measured curve.
    pub fn strain_max(&self) -> T {
        self.strain_max
    }

    pub fn members(&self) -> &[DualHeadMlp<T>] {
        &self.members
    }

    pub fn meta(&self) -> &[MemberMeta] {
        &self.meta
    }

    fn inputs(w: &WeightVector<T>, strains: &[T], phase: Phase) -> Inputs<T> {
        let flag = phase_flag(phase);
        Inputs {
            params: Array2::from_shape_fn((strains.len(), 8), |(_, j)| w.as_array()[j]),
            strain: Array2::from_shape_fn((strains.len(), 2), |(i, j)| if j == 0 { strains[i] } else { flag }),
        }
    }

    /// Stress predicted by every member (rows) at every strain (columns).
    pub fn member_stress(&self, w: &WeightVector<T>, strains: &[T], phase: Phase) -> Vec<Vec<T>> {
        let x = Self::inputs(w, strains, phase);
        self.members
            .iter()
            .map(|m| m.predict(&x).iter().map(|&z| self.normalization.restore(z)).collect())
            .collect()
    }

    /// Elementwise ensemble mean and unbiased variance of the stress.
    pub fn predict_stress(&self, w: &WeightVector<T>, strains: &[T], phase: Phase) -> (Vec<T>, Vec<T>) {
        let outs = self.member_stress(w, strains, phase);
        (0..strains.len())
            .map(|k| {
                let col: Vec<T> = outs.iter().map(|row| row[k]).collect();
                mean_variance(&col)
            })
            .unzip()
    }

    /// Per-member predicted curve on the canonical grid for `strain_max`.
    pub fn member_curves(&self, w: &WeightVector<T>, strain_max: T) -> Vec<CanonicalCurve<T>> {
        let grid = CanonicalCurve::grid_for(strain_max);
        let load = self.member_stress(w, &grid, Phase::Load);
        let unload = self.member_stress(w, &grid, Phase::Unload);
        load.into_iter()
            .zip(unload)
            .map(|(l, u)| CanonicalCurve::new(strain_max, l, u).expect("canonical grid"))
            .collect()
    }

    pub fn member_dissipations(&self, w: &WeightVector<T>, strain_max: T) -> Vec<T> {
        self.member_curves(w, strain_max)
            .iter()
            .map(energy_dissipation)
            .collect()
    }

    /// Mean and unbiased variance of per-member dissipation.
    pub fn predict_dissipation(&self, w: &WeightVector<T>, strain_max: T) -> (T, T) {
        mean_variance(&self.member_dissipations(w, strain_max))
    }

    /// [`predict_dissipation`](Self::predict_dissipation) for many designs at once.
    pub fn score_pool(&self, candidates: &[WeightVector<T>], strain_max: T) -> Vec<(T, T)> {
        let grid = CanonicalCurve::grid_for(strain_max);
        let g = grid.len();
        let strain_in = Array2::from_shape_fn((2 * g, 2), |(r, j)| {
            if j == 0 {
                grid[r % g]
            } else if r < g {
                T::zero()
            } else {
                T::one()
            }
        });
        let strain_embed: Vec<Array2<T>> = self
            .members
            .iter()
            .map(|m| m.eval_blocks(&m.strain_head, strain_in.clone()))
            .collect();
        let q = self.dissipation_weights(strain_max);
        candidates
            .par_chunks(SCORE_CHUNK)
            .flat_map_iter(|chunk| {
                let params = Array2::from_shape_fn((chunk.len(), 8), |(c, j)| chunk[c].as_array()[j]);
                let per_member: Vec<Vec<T>> = self
                    .members
                    .iter()
                    .zip(&strain_embed)
                    .map(|(m, hs)| {
                        let hp = m.eval_blocks(&m.param_head, params.clone());
                        m.reduce_pairs(&hp, hs, &q)
                    })
                    .collect();
                (0..chunk.len())
                    .map(|c| {
                        let ds: Vec<T> = per_member.iter().map(|d| d[c]).collect();
                        mean_variance(&ds)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Weights `q` with `D = Σ q_r·z_r` for standardized outputs `z` on the loading then
    /// unloading grid; the stress offset cancels between the branches.
    fn dissipation_weights(&self, strain_max: T) -> Vec<T> {
        let g = CANONICAL_POINTS;
        let h = strain_max / T::from_usize_lossy(g - 1);
        let k = h * self.normalization.stress_std * T::lit(KJ_PER_M3_PER_MPA);
        (0..2 * g)
            .map(|r| {
                let i = r % g;
                let trap = if i == 0 || i == g - 1 { T::lit(0.5) } else { T::one() };
                if r < g {
                    k * trap
                } else {
                    -k * trap
                }
            })
            .collect()
    }
}

impl<T: Scalar> DissipationModel for EnsembleModel<T> {
    fn dissipation_stats(&self, candidates: &[WeightVector<f64>]) -> Vec<(f64, f64)> {
        let cast: Vec<WeightVector<T>> = candidates.iter().map(|w| w.cast()).collect();
        self.score_pool(&cast, self.strain_max)
            .into_iter()
            .map(|(m, v)| (m.to_f64_lossy(), v.to_f64_lossy()))
            .collect()
    }
}

const _: () = assert!(CANONICAL_POINTS >= 2);
