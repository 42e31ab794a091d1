//! Synthetic stand-in for fabrication and compression testing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::curve_lab::{StressStrainCurve, KJ_PER_M3_PER_MPA};
use crate::error::{Error, Result};
use crate::tpms_field::{WeightVector, NUM_PRIMITIVES};

use super::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualLabConfig {
    /// Relative standard deviation of multiplicative stress noise.
    pub noise: f64,
    pub replicates: usize,
    /// Peak strain of each test is drawn uniformly from this range.
    pub strain_max: (f64, f64),
    pub loading_points: usize,
    pub unloading_points: usize,
    /// Measure the eight pure primitives as an external baseline.
    pub measure_primitives: bool,
}

impl Default for VirtualLabConfig {
    fn default() -> Self {
        VirtualLabConfig {
            noise: 0.02,
            replicates: 2,
            strain_max: (0.55, 0.6),
            loading_points: 150,
            unloading_points: 100,
            measure_primitives: true,
        }
    }
}

impl VirtualLabConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.strain_max;
        if !(self.noise >= 0.0 && self.noise < 0.5) {
            return Err(Error::Config(format!("noise level {} outside [0, 0.5)", self.noise)));
        }
        if self.replicates == 0 || self.loading_points < 2 || self.unloading_points < 2 {
            return Err(Error::Config("need ≥ 1 replicate and ≥ 2 samples per branch".into()));
        }
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!("strain range ({lo}, {hi}) must lie in (0, 1]")));
        }
        Ok(())
    }
}

/// Fixed random Fourier features `Σ c_k cos(ω_k·w + φ_k)`.
#[derive(Clone, Debug)]
struct Features {
    omega: Vec<[f64; NUM_PRIMITIVES]>,
    phase: Vec<f64>,
    amplitude: f64,
}

impl Features {
    fn new(rng: &mut ChaCha8Rng, count: usize, frequency: f64, amplitude: f64) -> Self {
        Features {
            omega: (0..count)
                .map(|_| {
                    std::array::from_fn(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        frequency * z
                    })
                })
                .collect(),
            phase: (0..count)
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect(),
            amplitude: amplitude * (2.0 / count as f64).sqrt(),
        }
    }

    fn eval(&self, w: &[f64; NUM_PRIMITIVES]) -> f64 {
        self.omega
            .iter()
            .zip(&self.phase)
            .map(|(om, ph)| (om.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + ph).cos())
            .sum::<f64>()
            * self.amplitude
    }
}

/// Ground truth: loading `σ_L = a(w)·ε + b(w)·ε³`, unloading `σ_U = γ(w)·σ_L`.
///
/// Dissipation is high on blends dominated by three or fewer primitives and low
/// on the evenly mixed bulk of the simplex.
#[derive(Clone, Debug)]
pub struct VirtualLab {
    config: VirtualLabConfig,
    seed: u64,
    stiffness: [f64; NUM_PRIMITIVES],
    wiggle_a: Features,
    wiggle_b: Features,
    wiggle_gamma: Features,
}

const A0: f64 = 0.2;
const B0: f64 = 0.3;
const GAIN: f64 = 2.0;
const GAMMA_GAIN: f64 = 3.0;
const TILT: f64 = 0.5;
/// Top-three weight sum at the edge of the high-dissipation region (about 10% of the simplex).
const THRESHOLD: f64 = 0.82;
const EDGE: f64 = 0.03;

impl VirtualLab {
    pub fn new(config: VirtualLabConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stiffness: [f64; NUM_PRIMITIVES] = std::array::from_fn(|_| rng.random::<f64>());
        Ok(VirtualLab {
            config,
            seed,
            stiffness,
            wiggle_a: Features::new(&mut rng, 16, 3.0, 0.25),
            wiggle_b: Features::new(&mut rng, 16, 3.0, 0.25),
            wiggle_gamma: Features::new(&mut rng, 16, 3.0, 0.3),
        })
    }

    pub fn config(&self) -> &VirtualLabConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Smooth step from 0 to 1 as the blend concentrates on at most three primitives.
    pub fn quality(w: &WeightVector<f64>) -> f64 {
        let mut v = *w.as_array();
        v.sort_by(|a, b| b.total_cmp(a));
        let top3 = v[0] + v[1] + v[2];
        1.0 / (1.0 + (-(top3 - THRESHOLD) / EDGE).exp())
    }

    /// `(a, b, γ)` for a design.
    pub fn coefficients(&self, w: &WeightVector<f64>) -> (f64, f64, f64) {
        let q = Self::quality(w);
        let w = w.as_array();
        let tilt: f64 = TILT * self.stiffness.iter().zip(w).map(|(s, x)| s * x).sum::<f64>();
        let a = A0 * (GAIN * q + tilt + self.wiggle_a.eval(w)).exp();
        let b = B0 * (GAIN * q + tilt + self.wiggle_b.eval(w)).exp();
        let g = 1.0 / (1.0 + (GAMMA_GAIN * (q - 0.5) - self.wiggle_gamma.eval(w)).exp());
        (a, b, 0.05 + 0.9 * g)
    }

    pub fn loading_stress(&self, w: &WeightVector<f64>, strain: f64) -> f64 {
        let (a, b, _) = self.coefficients(w);
        a * strain + b * strain.powi(3)
    }

    pub fn unloading_stress(&self, w: &WeightVector<f64>, strain: f64) -> f64 {
        let (_, _, g) = self.coefficients(w);
        g * self.loading_stress(w, strain)
    }

    /// Exact noise-free dissipation in kJ/m³ for a test to `strain_max`.
    pub fn true_dissipation(&self, w: &WeightVector<f64>, strain_max: f64) -> f64 {
        let (a, b, g) = self.coefficients(w);
        let e = strain_max;
        (1.0 - g) * (a * e * e / 2.0 + b * e.powi(4) / 4.0) * KJ_PER_M3_PER_MPA
    }

    /// One noisy test of a design; deterministic per (lab seed, design id, replicate).
    pub fn measure(&self, design_id: &str, w: &WeightVector<f64>, replicate: usize) -> StressStrainCurve<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, design_id, replicate as u64));
        let (lo, hi) = self.config.strain_max;
        let e_max = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let nl = self.config.loading_points;
        let nu = self.config.unloading_points;
        let mut strain = Vec::with_capacity(nl + nu);
        let mut stress = Vec::with_capacity(nl + nu);
        let noisy = |s: f64, rng: &mut ChaCha8Rng| {
            let z: f64 = StandardNormal.sample(rng);
            s * (1.0 + self.config.noise * z)
        };
        for i in 0..nl {
            let e = e_max * i as f64 / (nl - 1) as f64;
            strain.push(e);
            stress.push(noisy(self.loading_stress(w, e), &mut rng));
        }
        for i in 0..nu {
            let e = e_max * (1.0 - i as f64 / (nu - 1) as f64);
            strain.push(e);
            stress.push(noisy(self.unloading_stress(w, e), &mut rng));
        }
        StressStrainCurve::with_split(strain, stress, nl).expect("well-formed synthetic curve")
    }
}
