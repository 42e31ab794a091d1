//! Finite-difference verification of the backward pass.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::Scalar;

use super::network::{BnStats, DualHeadMlp, Inputs};
use super::MlpSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    /// Running statistics, as at inference.
    Inference,
    /// Statistics of the current batch, as during training (dropout still off).
    Batch,
}

impl BnMode {
    fn stats(self) -> BnStats {
        match self {
            BnMode::Inference => BnStats::Running,
            BnMode::Batch => BnStats::Batch,
        }
    }
}

/// A single regression example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckSample<T> {
    pub weights: [T; 8],
    pub strain: T,
    pub phase: T,
    pub target: T,
}

impl<T: Scalar> GradCheckSample<T> {
    fn inputs(&self) -> Inputs<T> {
        Inputs {
            params: Array2::from_shape_fn((1, 8), |(_, j)| self.weights[j]),
            strain: Array2::from_shape_vec((1, 2), vec![self.strain, self.phase]).expect("1×2"),
        }
    }
}

fn mse<T: Scalar>(net: &DualHeadMlp<T>, inputs: &Inputs<T>, targets: &Array1<T>, stats: BnStats) -> T {
    let y = net.forward_cached(inputs, stats, None).output;
    let n = T::from_usize_lossy(targets.len());
    y.iter().zip(targets).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n
}

/// Worst relative error `|a − n| / max(|a| + |n|, 1e-6)` between the analytic
/// gradient of the mean-squared error and its central difference with step `h`.
pub fn gradient_check<T: Scalar>(
    net: &DualHeadMlp<T>,
    inputs: &Inputs<T>,
    targets: &Array1<T>,
    mode: BnMode,
    h: T,
) -> T {
    let stats = mode.stats();
    let cache = net.forward_cached(inputs, stats, None);
    let n = T::from_usize_lossy(targets.len());
    let two = T::lit(2.0);
    let dout: Array1<T> = cache
        .output
        .iter()
        .zip(targets)
        .map(|(&y, &t)| two * (y - t) / n)
        .collect();
    let analytic = net.backward(&cache, &dout);

    let floor = T::lit(1e-6);
    let mut probe = net.clone();
    let mut worst = T::zero();
    for (ti, grads) in analytic.iter().enumerate() {
        for (j, &a) in grads.iter().enumerate() {
            let orig = net.param_slices()[ti][j];
            probe.param_slices_mut()[ti][j] = orig + h;
            let plus = mse(&probe, inputs, targets, stats);
            probe.param_slices_mut()[ti][j] = orig - h;
            let minus = mse(&probe, inputs, targets, stats);
            probe.param_slices_mut()[ti][j] = orig;
            let numeric = (plus - minus) / (two * h);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(floor);
            if !rel.is_finite() {
                return T::infinity();
            }
            worst = worst.max(rel);
        }
    }
    worst
}

/// Builds a network for `spec` with randomized biases and batch-norm state and
/// checks its gradients on one example in inference mode with `h = 1e-5`.
pub fn backprop_gradient_check<T: Scalar>(spec: &MlpSpec, sample: &GradCheckSample<T>, seed: u64) -> Result<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = DualHeadMlp::<T>::new(spec, &mut rng)?;
    randomize_state(&mut net, &mut rng);
    let inputs = sample.inputs();
    let targets = Array1::from_elem(1, sample.target);
    Ok(gradient_check(&net, &inputs, &targets, BnMode::Inference, T::lit(1e-5)))
}

/// Moves biases and batch-norm affine/running parameters off their initial values.
pub(crate) fn randomize_state<T: Scalar>(net: &mut DualHeadMlp<T>, rng: &mut ChaCha8Rng) {
    let blocks = net
        .param_head
        .iter_mut()
        .chain(net.strain_head.iter_mut())
        .chain(net.trunk.iter_mut());
    for blk in blocks {
        blk.dense.b.mapv_inplace(|_| T::lit(rng.random_range(-0.5..0.5)));
        if let Some(bn) = &mut blk.bn {
            bn.gamma.mapv_inplace(|_| T::lit(rng.random_range(0.5..1.5)));
            bn.beta.mapv_inplace(|_| T::lit(rng.random_range(-0.5..0.5)));
            bn.running_mean.mapv_inplace(|_| T::lit(rng.random_range(-0.5..0.5)));
            bn.running_var.mapv_inplace(|_| T::lit(rng.random_range(0.5..2.0)));
        }
    }
    net.out.b.mapv_inplace(|_| T::lit(rng.random_range(-0.5..0.5)));
}
