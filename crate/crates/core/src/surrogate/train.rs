//! Mini-batch Adam training with per-member holdout and early stopping.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve_lab::{CanonicalCurve, CANONICAL_POINTS};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tpms_field::WeightVector;

use super::ensemble::{EnsembleModel, MemberMeta, Normalization};
use super::network::{BnStats, DualHeadMlp, Inputs};
use super::MlpSpec;

/// One measured design.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRecord<T> {
    pub weights: WeightVector<T>,
    pub curve: CanonicalCurve<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet<T> {
    records: Vec<TrainingRecord<T>>,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new(records: Vec<TrainingRecord<T>>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        Ok(TrainingSet { records })
    }

    pub fn records(&self) -> &[TrainingRecord<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mean_strain_max(&self) -> T {
        self.records.iter().map(|r| r.curve.strain_max()).sum::<T>() / T::from_usize_lossy(self.len())
    }

    pub(crate) fn stresses(&self) -> impl Iterator<Item = T> + '_ {
        self.records
            .iter()
            .flat_map(|r| r.curve.loading().iter().chain(r.curve.unloading()).copied())
    }

    /// Canonical grid indices used for training: every `stride`-th point plus the apex.
    fn grid_indices(stride: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..CANONICAL_POINTS).step_by(stride.max(1)).collect();
        if *idx.last().expect("nonempty") != CANONICAL_POINTS - 1 {
            idx.push(CANONICAL_POINTS - 1);
        }
        idx
    }

    /// (design, strain-point) samples with standardized stress targets.
    pub(crate) fn samples(&self, stride: usize, norm: &Normalization<T>) -> (Inputs<T>, Array1<T>) {
        let idx = Self::grid_indices(stride);
        let rows = self.len() * idx.len() * 2;
        let mut params = Array2::zeros((rows, 8));
        let mut strain = Array2::zeros((rows, 2));
        let mut targets = Array1::zeros(rows);
        let mut r = 0;
        for rec in &self.records {
            let grid = rec.curve.grid();
            for (phase, branch) in [(T::zero(), rec.curve.loading()), (T::one(), rec.curve.unloading())] {
                for &k in &idx {
                    for (j, &w) in rec.weights.as_array().iter().enumerate() {
                        params[[r, j]] = w;
                    }
                    strain[[r, 0]] = grid[k];
                    strain[[r, 1]] = phase;
                    targets[r] = norm.standardize(branch[k]);
                    r += 1;
                }
            }
        }
        (Inputs { params, strain }, targets)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub ensemble_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub holdout_fraction: f64,
    /// Use every `strain_stride`-th canonical grid point (plus the apex) for training.
    pub strain_stride: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            ensemble_size: 30,
            max_epochs: 2000,
            patience: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 128,
            holdout_fraction: 0.1,
            strain_stride: 1,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    /// Short schedule and smaller ensemble for quick campaigns.
    pub fn fast() -> Self {
        TrainingConfig {
            ensemble_size: 10,
            max_epochs: 150,
            patience: 20,
            strain_stride: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 2 {
            return Err(Error::Config("an ensemble needs at least two members".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch size and epoch budget must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) || self.learning_rate <= 0.0 {
            return Err(Error::Config(
                "holdout fraction must lie in [0, 1) and the learning rate be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn member_seed(&self, member: usize) -> u64 {
        splitmix64(self.seed ^ splitmix64(member as u64 + 1))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_holdout_loss: f64,
    pub train_losses: Vec<f64>,
}

struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: i32,
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
}

impl<T: Scalar> Adam<T> {
    fn new(net: &DualHeadMlp<T>, config: &TrainingConfig) -> Self {
        let zeros: Vec<Vec<T>> = net.param_slices().iter().map(|s| vec![T::zero(); s.len()]).collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            lr: T::lit(config.learning_rate),
            beta1: T::lit(config.beta1),
            beta2: T::lit(config.beta2),
            eps: T::lit(config.adam_epsilon),
        }
    }

    fn update(&mut self, net: &mut DualHeadMlp<T>, grads: &[Vec<T>]) {
        self.step += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.step);
        let c2 = one - self.beta2.powi(self.step);
        for (((p, g), m), v) in net
            .param_slices_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (one - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (one - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] = p[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

fn mse<T: Scalar>(pred: &Array1<T>, target: &Array1<T>) -> T {
    let n = T::from_usize_lossy(target.len().max(1));
    pred.iter().zip(target).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n
}

/// Trains one member on standardized stress. Returns the best-holdout-epoch network.
pub fn train_member<T: Scalar>(
    spec: &MlpSpec,
    data: &TrainingSet<T>,
    config: &TrainingConfig,
    seed: u64,
) -> Result<(DualHeadMlp<T>, TrainReport)> {
    config.validate()?;
    let norm = Normalization::fit(data);
    let (inputs, targets) = data.samples(config.strain_stride, &norm);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = DualHeadMlp::<T>::new(spec, &mut rng)?;

    let n = targets.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_hold = if n < 2 {
        0
    } else {
        ((n as f64 * config.holdout_fraction).round() as usize).min(n - 1)
    };
    let (hold_idx, train_idx) = order.split_at(n_hold);
    let mut train_idx = train_idx.to_vec();
    let (hold_x, hold_t) = if n_hold == 0 {
        (inputs.select(&train_idx), targets.select(Axis(0), &train_idx))
    } else {
        (inputs.select(hold_idx), targets.select(Axis(0), hold_idx))
    };

    let mut adam = Adam::new(&net, config);
    let mut best = net.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut train_losses = Vec::new();
    let mut epochs_run = 0;
    for epoch in 0..config.max_epochs {
        epochs_run = epoch + 1;
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in train_idx.chunks(config.batch_size) {
            if chunk.len() == 1 && train_idx.len() > 1 {
                continue;
            }
            let x = inputs.select(chunk);
            let t = targets.select(Axis(0), chunk);
            let cache = net.forward_cached(&x, BnStats::Batch, Some(&mut rng));
            let loss = mse(&cache.output, &t);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { seed, epoch });
            }
            let scale = T::lit(2.0) / T::from_usize_lossy(chunk.len());
            let dout: Array1<T> = cache.output.iter().zip(&t).map(|(&y, &tt)| scale * (y - tt)).collect();
            let grads = net.backward(&cache, &dout);
            adam.update(&mut net, &grads);
            net.update_running_stats(&cache);
            total += loss.to_f64_lossy();
            batches += 1;
        }
        train_losses.push(total / batches.max(1) as f64);
        let hold = mse(&net.predict(&hold_x), &hold_t).to_f64_lossy();
        if !hold.is_finite() {
            return Err(Error::TrainingDiverged { seed, epoch });
        }
        if hold < best_loss {
            best_loss = hold;
            best_epoch = epoch;
            best = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    log::debug!("member seed {seed}: {epochs_run} epochs, best {best_epoch} (holdout mse {best_loss:.4e})");
    Ok((
        best,
        TrainReport {
            seed,
            epochs_run,
            best_epoch,
            best_holdout_loss: best_loss,
            train_losses,
        },
    ))
}

/// Trains `config.ensemble_size` members concurrently with seeds derived from `config.seed`.
pub fn train_ensemble<T: Scalar>(
    spec: &MlpSpec,
    data: &TrainingSet<T>,
    config: &TrainingConfig,
) -> Result<EnsembleModel<T>> {
    config.validate()?;
    let trained = (0..config.ensemble_size)
        .into_par_iter()
        .map(|i| train_member(spec, data, config, config.member_seed(i)))
        .collect::<Result<Vec<_>>>()?;
    let (members, meta): (Vec<_>, Vec<_>) = trained
        .into_iter()
        .map(|(net, report)| {
            (
                net,
                MemberMeta {
                    seed: report.seed,
                    epochs_run: report.epochs_run,
                    best_epoch: report.best_epoch,
                },
            )
        })
        .unzip();
    EnsembleModel::new(
        spec.clone(),
        Normalization::fit(data),
        data.mean_strain_max(),
        members,
        meta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve_lab::Phase;
    use crate::tpms_field::Primitive;

    fn constant_set(level: f64) -> TrainingSet<f64> {
        let curve = CanonicalCurve::new(0.5, vec![level; 120], vec![level; 120]).unwrap();
        TrainingSet::new(vec![TrainingRecord {
            weights: WeightVector::unit(Primitive::Gyroid),
            curve,
        }])
        .unwrap()
    }

    #[test]
    fn constant_curve_is_learned() {
        let data = constant_set(40.0);
        let config = TrainingConfig {
            ensemble_size: 2,
            max_epochs: 300,
            patience: 50,
            strain_stride: 4,
            batch_size: 16,
            ..TrainingConfig::default()
        };
        let model = train_ensemble(&MlpSpec::compact(), &data, &config).unwrap();
        let grid = CanonicalCurve::<f64>::grid_for(0.5);
        let (mu, _) = model.predict_stress(&WeightVector::unit(Primitive::Gyroid), &grid, Phase::Load);
        for m in mu {
            assert!((m - 40.0).abs() < 0.05 * 40.0, "{m}");
        }
    }

    #[test]
    fn losses_finite_and_seeds_differ() {
        let data = constant_set(3.0);
        let config = TrainingConfig {
            max_epochs: 5,
            strain_stride: 10,
            ..TrainingConfig::default()
        };
        let (a, ra) = train_member(&MlpSpec::compact(), &data, &config, 1).unwrap();
        let (b, _) = train_member(&MlpSpec::compact(), &data, &config, 2).unwrap();
        assert!(ra.train_losses.iter().all(|l| l.is_finite()));
        assert_eq!(ra.epochs_run, 5);
        assert_ne!(a.flat_parameters(), b.flat_parameters());
    }

    #[test]
    fn training_is_deterministic() {
        let data = constant_set(3.0);
        let config = TrainingConfig {
            max_epochs: 4,
            strain_stride: 10,
            ..TrainingConfig::default()
        };
        let (a, _) = train_member(&MlpSpec::compact(), &data, &config, 9).unwrap();
        let (b, _) = train_member(&MlpSpec::compact(), &data, &config, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported() {
        let data = constant_set(3.0);
        let config = TrainingConfig {
            max_epochs: 3,
            learning_rate: 1e300,
            strain_stride: 10,
            ..TrainingConfig::default()
        };
        let spec = MlpSpec {
            batch_norm: false,
            ..MlpSpec::linear()
        };
        match train_member(&spec, &data, &config, 4) {
            Err(Error::TrainingDiverged { seed: 4, .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn holdout_split_sizes() {
        let data = constant_set(1.0);
        let (x, t) = data.samples(1, &Normalization::fit(&data));
        assert_eq!(x.len(), 240);
        assert_eq!(t.len(), 240);
        let (x, _) = data.samples(10, &Normalization::fit(&data));
        assert_eq!(x.len(), 2 * 13);
    }
}
