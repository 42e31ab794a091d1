//! Dual-headed MLP with batch normalization and dropout, forward and backward passes.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{MlpSpec, PARAM_INPUTS, STRAIN_INPUTS};

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }

    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    #[inline]
    fn derivative<T: Scalar>(self, pre: T) -> T {
        match self {
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                T::one() - t * t
            }
            Activation::Identity => T::one(),
        }
    }
}

/// Batched network inputs: `params` is B×8 weights, `strain` is B×2 (strain, phase flag).
#[derive(Clone, Debug, PartialEq)]
pub struct Inputs<T> {
    pub params: Array2<T>,
    pub strain: Array2<T>,
}

impl<T: Scalar> Inputs<T> {
    pub fn new(params: Array2<T>, strain: Array2<T>) -> Result<Self> {
        if params.ncols() != PARAM_INPUTS || strain.ncols() != STRAIN_INPUTS || params.nrows() != strain.nrows() {
            return Err(Error::Config(format!(
                "inputs must be B×{PARAM_INPUTS} and B×{STRAIN_INPUTS}, got {:?} and {:?}",
                params.dim(),
                strain.dim()
            )));
        }
        Ok(Inputs { params, strain })
    }

    pub fn len(&self) -> usize {
        self.params.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn select(&self, rows: &[usize]) -> Self {
        Inputs {
            params: self.params.select(Axis(0), rows),
            strain: self.strain.select(Axis(0), rows),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Dense<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    fn init(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let bound = match activation {
            Activation::Relu => (6.0 / fan_in as f64).sqrt(),
            _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
        };
        let w = Array2::from_shape_simple_fn((fan_in, fan_out), || T::lit(rng.random_range(-bound..bound)));
        Dense {
            w,
            b: Array1::zeros(fan_out),
        }
    }

    #[inline]
    fn forward(&self, x: &Array2<T>) -> Array2<T> {
        x.dot(&self.w) + &self.b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct BatchNorm<T> {
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
    pub running_mean: Array1<T>,
    pub running_var: Array1<T>,
}

impl<T: Scalar> BatchNorm<T> {
    fn new(width: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }

    /// Inference-mode normalization folded into `z * scale + shift`.
    pub(crate) fn folded(&self) -> (Array1<T>, Array1<T>) {
        let eps = T::lit(BN_EPS);
        let scale: Array1<T> = self
            .gamma
            .iter()
            .zip(&self.running_var)
            .map(|(&g, &v)| g / (v + eps).sqrt())
            .collect();
        let shift: Array1<T> = self
            .beta
            .iter()
            .zip(&self.running_mean)
            .zip(&scale)
            .map(|((&b, &m), &sc)| b - m * sc)
            .collect();
        (scale, shift)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Block<T> {
    pub dense: Dense<T>,
    pub bn: Option<BatchNorm<T>>,
}

/// Which statistics batch normalization uses in a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BnStats {
    Batch,
    Running,
}

pub(crate) struct BlockCache<T> {
    x: Array2<T>,
    xhat: Option<Array2<T>>,
    inv_std: Option<Array1<T>>,
    batch_mean: Option<Array1<T>>,
    batch_var: Option<Array1<T>>,
    pre: Array2<T>,
    mask: Option<Array2<T>>,
}

pub(crate) struct ForwardCache<T> {
    param: Vec<BlockCache<T>>,
    strain: Vec<BlockCache<T>>,
    trunk: Vec<BlockCache<T>>,
    out_x: Array2<T>,
    batch: usize,
    pub output: Array1<T>,
}

struct BlockGrad<T> {
    w: Array2<T>,
    b: Array1<T>,
    bn: Option<(Array1<T>, Array1<T>)>,
}

/// `Σ_g q_g Σ_j wo_j·act(a_cj + b_gj)` for each row `c` of `a`.
fn pair_kernel<T: Scalar>(a: &[T], b: &[T], wo: &[T], q: &[T], act: impl Fn(T) -> T) -> Vec<T> {
    let width = wo.len();
    a.chunks_exact(width)
        .map(|ar| {
            let mut acc = T::zero();
            for (br, &qg) in b.chunks_exact(width).zip(q) {
                let mut s = T::zero();
                for ((&x, &y), &w) in ar.iter().zip(br).zip(wo) {
                    s = s + w * act(x + y);
                }
                acc = acc + qg * s;
            }
            acc
        })
        .collect()
}

/// One ensemble member.
#[derive(Clone, Debug, PartialEq)]
pub struct DualHeadMlp<T> {
    spec: MlpSpec,
    pub(crate) param_head: Vec<Block<T>>,
    pub(crate) strain_head: Vec<Block<T>>,
    pub(crate) trunk: Vec<Block<T>>,
    pub(crate) out: Dense<T>,
}

fn build_blocks<T: Scalar>(
    input: usize,
    widths: &[usize],
    spec: &MlpSpec,
    rng: &mut ChaCha8Rng,
) -> (Vec<Block<T>>, usize) {
    let mut fan_in = input;
    let mut blocks = Vec::with_capacity(widths.len());
    for &w in widths {
        blocks.push(Block {
            dense: Dense::init(fan_in, w, spec.activation, rng),
            bn: spec.batch_norm.then(|| BatchNorm::new(w)),
        });
        fan_in = w;
    }
    (blocks, fan_in)
}

impl<T: Scalar> DualHeadMlp<T> {
    pub fn new(spec: &MlpSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        let (param_head, p) = build_blocks(PARAM_INPUTS, &spec.param_widths, spec, rng);
        let (strain_head, q) = build_blocks(STRAIN_INPUTS, &spec.strain_widths, spec, rng);
        let (trunk, t) = build_blocks(p + q, &spec.trunk_widths, spec, rng);
        let out = Dense::init(t, 1, Activation::Identity, rng);
        Ok(DualHeadMlp {
            spec: spec.clone(),
            param_head,
            strain_head,
            trunk,
            out,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    fn blocks(&self) -> impl Iterator<Item = &Block<T>> {
        self.param_head.iter().chain(&self.strain_head).chain(&self.trunk)
    }

    /// Trainable parameter tensors in canonical order: for every block of the
    /// parameter head, strain head and trunk `W, b[, γ, β]`, then the output `W, b`.
    pub(crate) fn param_slices(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for blk in self.blocks() {
            out.push(blk.dense.w.as_slice().expect("standard layout"));
            out.push(blk.dense.b.as_slice().expect("standard layout"));
            if let Some(bn) = &blk.bn {
                out.push(bn.gamma.as_slice().expect("standard layout"));
                out.push(bn.beta.as_slice().expect("standard layout"));
            }
        }
        out.push(self.out.w.as_slice().expect("standard layout"));
        out.push(self.out.b.as_slice().expect("standard layout"));
        out
    }

    pub(crate) fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for blk in self
            .param_head
            .iter_mut()
            .chain(self.strain_head.iter_mut())
            .chain(self.trunk.iter_mut())
        {
            out.push(blk.dense.w.as_slice_mut().expect("standard layout"));
            out.push(blk.dense.b.as_slice_mut().expect("standard layout"));
            if let Some(bn) = &mut blk.bn {
                out.push(bn.gamma.as_slice_mut().expect("standard layout"));
                out.push(bn.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out.push(self.out.w.as_slice_mut().expect("standard layout"));
        out.push(self.out.b.as_slice_mut().expect("standard layout"));
        out
    }

    /// Parameters followed by batch-norm running statistics.
    pub(crate) fn state_slices(&self) -> Vec<&[T]> {
        let mut out = self.param_slices();
        for bn in self.blocks().filter_map(|b| b.bn.as_ref()) {
            out.push(bn.running_mean.as_slice().expect("standard layout"));
            out.push(bn.running_var.as_slice().expect("standard layout"));
        }
        out
    }

    pub(crate) fn state_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut stats: Vec<&mut [T]> = Vec::new();
        let mut params: Vec<&mut [T]> = Vec::new();
        for blk in self
            .param_head
            .iter_mut()
            .chain(self.strain_head.iter_mut())
            .chain(self.trunk.iter_mut())
        {
            params.push(blk.dense.w.as_slice_mut().expect("standard layout"));
            params.push(blk.dense.b.as_slice_mut().expect("standard layout"));
            if let Some(bn) = &mut blk.bn {
                params.push(bn.gamma.as_slice_mut().expect("standard layout"));
                params.push(bn.beta.as_slice_mut().expect("standard layout"));
                stats.push(bn.running_mean.as_slice_mut().expect("standard layout"));
                stats.push(bn.running_var.as_slice_mut().expect("standard layout"));
            }
        }
        params.push(self.out.w.as_slice_mut().expect("standard layout"));
        params.push(self.out.b.as_slice_mut().expect("standard layout"));
        params.extend(stats);
        params
    }

    pub fn parameter_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// All trainable parameters flattened in canonical order.
    pub fn flat_parameters(&self) -> Vec<T> {
        self.param_slices().concat()
    }

    fn block_forward(
        &self,
        blk: &Block<T>,
        x: Array2<T>,
        stats: BnStats,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> (Array2<T>, BlockCache<T>) {
        let z = blk.dense.forward(&x);
        let mut cache = BlockCache {
            x,
            xhat: None,
            inv_std: None,
            batch_mean: None,
            batch_var: None,
            pre: Array2::zeros((0, 0)),
            mask: None,
        };
        let pre = match &blk.bn {
            None => z,
            Some(bn) => {
                let eps = T::lit(BN_EPS);
                let (mean, var) = match stats {
                    BnStats::Batch => {
                        let mean = z.mean_axis(Axis(0)).expect("nonempty batch");
                        let centered = &z - &mean;
                        let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("nonempty batch");
                        (mean, var)
                    }
                    BnStats::Running => (bn.running_mean.clone(), bn.running_var.clone()),
                };
                let inv_std = var.mapv(|v| T::one() / (v + eps).sqrt());
                let xhat = (&z - &mean) * &inv_std;
                let pre = &xhat * &bn.gamma + &bn.beta;
                cache.xhat = Some(xhat);
                cache.inv_std = Some(inv_std);
                if stats == BnStats::Batch {
                    cache.batch_mean = Some(mean);
                    cache.batch_var = Some(var);
                }
                pre
            }
        };
        let act = self.spec.activation;
        let mut a = pre.mapv(|v| act.apply(v));
        if let Some(rng) = dropout {
            if self.spec.dropout > 0.0 {
                let p = self.spec.dropout;
                let keep = T::lit(1.0 / (1.0 - p));
                let mask =
                    Array2::from_shape_simple_fn(a.dim(), || if rng.random::<f64>() < p { T::zero() } else { keep });
                a = a * &mask;
                cache.mask = Some(mask);
            }
        }
        cache.pre = pre;
        (a, cache)
    }

    fn run_blocks(
        &self,
        blocks: &[Block<T>],
        mut x: Array2<T>,
        stats: BnStats,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> (Array2<T>, Vec<BlockCache<T>>) {
        let mut caches = Vec::with_capacity(blocks.len());
        for blk in blocks {
            let (y, c) = self.block_forward(blk, x, stats, dropout.as_deref_mut());
            caches.push(c);
            x = y;
        }
        (x, caches)
    }

    /// Forward pass retaining intermediates for backpropagation.
    pub(crate) fn forward_cached(
        &self,
        inputs: &Inputs<T>,
        stats: BnStats,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> ForwardCache<T> {
        let (hp, param) = self.run_blocks(&self.param_head, inputs.params.clone(), stats, dropout.as_deref_mut());
        let (hs, strain) = self.run_blocks(&self.strain_head, inputs.strain.clone(), stats, dropout.as_deref_mut());
        let h = concatenate(Axis(1), &[hp.view(), hs.view()]).expect("matching rows");
        let (out_x, trunk) = self.run_blocks(&self.trunk, h, stats, dropout.as_deref_mut());
        let output = self.out.forward(&out_x).column(0).to_owned();
        ForwardCache {
            param,
            strain,
            trunk,
            out_x,
            batch: inputs.len(),
            output,
        }
    }

    /// Inference-mode prediction (running batch-norm statistics, no dropout).
    pub fn predict(&self, inputs: &Inputs<T>) -> Array1<T> {
        let hp = self.eval_blocks(&self.param_head, inputs.params.clone());
        let hs = self.eval_blocks(&self.strain_head, inputs.strain.clone());
        let h = concatenate(Axis(1), &[hp.view(), hs.view()]).expect("matching rows");
        let t = self.eval_blocks(&self.trunk, h);
        self.out.forward(&t).column(0).to_owned()
    }

    pub(crate) fn eval_blocks(&self, blocks: &[Block<T>], mut x: Array2<T>) -> Array2<T> {
        let act = self.spec.activation;
        for blk in blocks {
            let mut z = blk.dense.forward(&x);
            if let Some(bn) = &blk.bn {
                let (scale, shift) = bn.folded();
                z = z * &scale + &shift;
            }
            z.mapv_inplace(|v| act.apply(v));
            x = z;
        }
        x
    }

    /// Inference outputs for every pairing of `hp` rows (C×p parameter-head
    /// embeddings) with `hs` rows (G×s strain-head embeddings), as a C×G matrix.
    pub(crate) fn eval_pairs(&self, hp: &Array2<T>, hs: &Array2<T>) -> Array2<T> {
        let (c, g) = (hp.nrows(), hs.nrows());
        let p = hp.ncols();
        let (first_w, first_b) = match self.trunk.first() {
            Some(blk) => (&blk.dense.w, &blk.dense.b),
            None => (&self.out.w, &self.out.b),
        };
        let a = hp.dot(&first_w.slice(s![..p, ..]));
        let bm = hs.dot(&first_w.slice(s![p.., ..])) + first_b;
        let width = a.ncols();
        let mut z = Array2::from_shape_fn((c * g, width), |(r, j)| a[[r / g, j]] + bm[[r % g, j]]);
        let out = match self.trunk.split_first() {
            None => z,
            Some((first, rest)) => {
                if let Some(bn) = &first.bn {
                    let (scale, shift) = bn.folded();
                    z = z * &scale + &shift;
                }
                let act = self.spec.activation;
                z.mapv_inplace(|v| act.apply(v));
                let t = self.eval_blocks(rest, z);
                self.out.forward(&t)
            }
        };
        out.into_shape_with_order((c, g)).expect("c*g outputs")
    }

    /// `Σ_r q[r]·y(c, r)` for every candidate row `c`, where `y` is the network output
    /// on the pair grid of [`eval_pairs`](Self::eval_pairs).
    pub(crate) fn reduce_pairs(&self, hp: &Array2<T>, hs: &Array2<T>, q: &[T]) -> Vec<T> {
        let (c, g) = (hp.nrows(), hs.nrows());
        assert_eq!(q.len(), g, "one weight per strain input");
        if self.trunk.len() != 1 {
            let y = self.eval_pairs(hp, hs);
            return y
                .outer_iter()
                .map(|row| row.iter().zip(q).map(|(&v, &k)| v * k).sum())
                .collect();
        }
        let first = &self.trunk[0];
        let p = hp.ncols();
        let w1 = &first.dense.w;
        let mut a = hp.dot(&w1.slice(s![..p, ..]));
        let mut b = hs.dot(&w1.slice(s![p.., ..])) + &first.dense.b;
        if let Some(bn) = &first.bn {
            let (scale, shift) = bn.folded();
            a = a * &scale;
            b = b * &scale + &shift;
        }
        let a = a.as_standard_layout().into_owned();
        let b = b.as_standard_layout().into_owned();
        let (a, b) = (a.as_slice().expect("contiguous"), b.as_slice().expect("contiguous"));
        let wo: Vec<T> = self.out.w.column(0).to_vec();
        let bias = self.out.b[0] * q.iter().copied().fold(T::zero(), |s, v| s + v);
        let out: Vec<T> = match self.spec.activation {
            Activation::Relu => pair_kernel(a, b, &wo, q, |v| if v > T::zero() { v } else { T::zero() }),
            Activation::Tanh => pair_kernel(a, b, &wo, q, |v| v.tanh()),
            Activation::Identity => pair_kernel(a, b, &wo, q, |v| v),
        };
        debug_assert_eq!(out.len(), c);
        out.into_iter().map(|v| v + bias).collect()
    }

    fn block_backward(&self, blk: &Block<T>, cache: &BlockCache<T>, dout: Array2<T>) -> (Array2<T>, BlockGrad<T>) {
        let act = self.spec.activation;
        let mut d = dout;
        if let Some(mask) = &cache.mask {
            d = d * mask;
        }
        d.zip_mut_with(&cache.pre, |g, &p| *g = *g * act.derivative(p));
        let (dz, bn_grad) = match &blk.bn {
            None => (d, None),
            Some(bn) => {
                let xhat = cache.xhat.as_ref().expect("bn cache");
                let inv_std = cache.inv_std.as_ref().expect("bn cache");
                let dgamma = (&d * xhat).sum_axis(Axis(0));
                let dbeta = d.sum_axis(Axis(0));
                let dxhat = &d * &bn.gamma;
                let dz = if cache.batch_mean.is_some() {
                    let n = T::from_usize_lossy(d.nrows());
                    let sum_dxhat = dxhat.sum_axis(Axis(0));
                    let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
                    let inner = dxhat.mapv(|v| v * n) - &sum_dxhat - &(xhat * &sum_dxhat_xhat);
                    inner * &inv_std.mapv(|v| v / n)
                } else {
                    dxhat * inv_std
                };
                (dz, Some((dgamma, dbeta)))
            }
        };
        let grad = BlockGrad {
            w: cache.x.t().dot(&dz),
            b: dz.sum_axis(Axis(0)),
            bn: bn_grad,
        };
        let dx = dz.dot(&blk.dense.w.t());
        (dx, grad)
    }

    fn backward_blocks(
        &self,
        blocks: &[Block<T>],
        caches: &[BlockCache<T>],
        mut d: Array2<T>,
    ) -> (Array2<T>, Vec<BlockGrad<T>>) {
        let mut grads = Vec::with_capacity(blocks.len());
        for (blk, cache) in blocks.iter().zip(caches).rev() {
            let (dx, g) = self.block_backward(blk, cache, d);
            grads.push(g);
            d = dx;
        }
        grads.reverse();
        (d, grads)
    }

    /// Gradients of `Σ_i dout_i · output_i` in canonical parameter order.
    pub(crate) fn backward(&self, cache: &ForwardCache<T>, dout: &Array1<T>) -> Vec<Vec<T>> {
        let d_out = dout.view().insert_axis(Axis(1)).to_owned();
        let out_w = cache.out_x.t().dot(&d_out);
        let out_b = d_out.sum_axis(Axis(0));
        let d_t = d_out.dot(&self.out.w.t());
        let (d_h, trunk) = self.backward_blocks(&self.trunk, &cache.trunk, d_t);
        let p = self.spec.param_embedding();
        let d_hp = d_h.slice(s![.., ..p]).to_owned();
        let d_hs = d_h.slice(s![.., p..]).to_owned();
        let (_, param) = self.backward_blocks(&self.param_head, &cache.param, d_hp);
        let (_, strain) = self.backward_blocks(&self.strain_head, &cache.strain, d_hs);

        let mut out = Vec::new();
        for g in param.into_iter().chain(strain).chain(trunk) {
            out.push(g.w.iter().copied().collect());
            out.push(g.b.iter().copied().collect());
            if let Some((dg, db)) = g.bn {
                out.push(dg.iter().copied().collect());
                out.push(db.iter().copied().collect());
            }
        }
        out.push(out_w.iter().copied().collect());
        out.push(out_b.iter().copied().collect());
        debug_assert_eq!(cache.batch, dout.len());
        out
    }

    /// Exponential moving update of batch-norm running statistics from a
    /// batch-statistics forward pass.
    pub(crate) fn update_running_stats(&mut self, cache: &ForwardCache<T>) {
        let m = T::lit(BN_MOMENTUM);
        let n = cache.batch;
        let correction = if n > 1 {
            T::from_usize_lossy(n) / T::from_usize_lossy(n - 1)
        } else {
            T::one()
        };
        let blocks = self
            .param_head
            .iter_mut()
            .chain(self.strain_head.iter_mut())
            .chain(self.trunk.iter_mut());
        let caches = cache.param.iter().chain(&cache.strain).chain(&cache.trunk);
        for (blk, c) in blocks.zip(caches) {
            if let (Some(bn), Some(mean), Some(var)) = (&mut blk.bn, &c.batch_mean, &c.batch_var) {
                bn.running_mean
                    .zip_mut_with(mean, |r, &b| *r = (T::one() - m) * *r + m * b);
                bn.running_var
                    .zip_mut_with(var, |r, &b| *r = (T::one() - m) * *r + m * b * correction);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn inputs(n: usize, rng: &mut ChaCha8Rng) -> Inputs<f64> {
        Inputs::new(
            Array2::from_shape_simple_fn((n, 8), || rng.random::<f64>()),
            Array2::from_shape_fn(
                (n, 2),
                |(i, j)| if j == 0 { rng.random::<f64>() } else { (i % 2) as f64 },
            ),
        )
        .unwrap()
    }

    #[test]
    fn parameter_count_matches_widths() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DualHeadMlp::<f64>::new(&MlpSpec::default(), &mut rng).unwrap();
        let dense = (8 * 128 + 128)
            + (128 * 128 + 128)
            + (2 * 64 + 64)
            + (64 * 64 + 64)
            + (192 * 128 + 128)
            + (128 * 128 + 128)
            + (128 + 1);
        let bn = 2 * (128 + 128 + 64 + 64 + 128 + 128);
        assert_eq!(net.parameter_count(), dense + bn);
        let lin = DualHeadMlp::<f64>::new(&MlpSpec::linear(), &mut rng).unwrap();
        assert_eq!(lin.parameter_count(), 11);
    }

    #[test]
    fn cached_and_plain_inference_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = DualHeadMlp::<f64>::new(&MlpSpec::compact(), &mut rng).unwrap();
        let x = inputs(7, &mut rng);
        let a = net.predict(&x);
        let b = net.forward_cached(&x, BnStats::Running, None).output;
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn pairwise_evaluation_matches_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for spec in [
            MlpSpec::compact(),
            MlpSpec::linear(),
            MlpSpec {
                trunk_widths: vec![],
                ..MlpSpec::compact()
            },
        ] {
            let net = DualHeadMlp::<f64>::new(&spec, &mut rng).unwrap();
            let p = inputs(3, &mut rng);
            let s = inputs(5, &mut rng);
            let hp = net.eval_blocks(&net.param_head, p.params.clone());
            let hs = net.eval_blocks(&net.strain_head, s.strain.clone());
            let grid = net.eval_pairs(&hp, &hs);
            for c in 0..3 {
                let rows = Inputs::new(
                    Array2::from_shape_fn((5, 8), |(_, j)| p.params[[c, j]]),
                    s.strain.clone(),
                )
                .unwrap();
                let direct = net.predict(&rows);
                for k in 0..5 {
                    assert!((grid[[c, k]] - direct[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn running_stats_move_toward_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = DualHeadMlp::<f64>::new(&MlpSpec::compact(), &mut rng).unwrap();
        let x = inputs(16, &mut rng);
        let cache = net.forward_cached(&x, BnStats::Batch, None);
        net.update_running_stats(&cache);
        let bn = net.param_head[0].bn.as_ref().unwrap();
        assert!(bn.running_mean.iter().any(|&m| m != 0.0));
        assert!(bn.running_var.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn dropout_zeroes_some_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = MlpSpec {
            dropout: 0.5,
            ..MlpSpec::compact()
        };
        let net = DualHeadMlp::<f64>::new(&spec, &mut rng).unwrap();
        let x = inputs(8, &mut rng);
        let cache = net.forward_cached(&x, BnStats::Batch, Some(&mut rng));
        let mask = cache.param[0].mask.as_ref().unwrap();
        let zeros = mask.iter().filter(|&&m| m == 0.0).count();
        assert!(zeros > 0 && zeros < mask.len());
        assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));
    }
}
