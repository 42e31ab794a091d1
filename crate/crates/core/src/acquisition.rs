//! Candidate sampling on the simplex, UCB scoring and greedy batch selection
//! under a minimum-distance constraint.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surrogate::DissipationModel;
use crate::tpms_field::{WeightVector, NUM_PRIMITIVES};

pub const DEFAULT_POOL_SIZE: usize = 1_000_000;
pub const FAST_POOL_SIZE: usize = 100_000;
pub const DEFAULT_RADIUS: f64 = 0.2;
pub const DEFAULT_PROPOSAL_SIZE: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePool {
    pub seed: u64,
    candidates: Vec<WeightVector<f64>>,
}

impl CandidatePool {
    pub fn from_candidates(candidates: Vec<WeightVector<f64>>, seed: u64) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Config("candidate pool is empty".into()));
        }
        Ok(CandidatePool { seed, candidates })
    }

    pub fn candidates(&self) -> &[WeightVector<f64>] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// One Dirichlet(1, …, 1) draw from normalized unit exponentials.
pub fn sample_dirichlet(rng: &mut ChaCha8Rng) -> WeightVector<f64> {
    loop {
        let raw: [f64; NUM_PRIMITIVES] = std::array::from_fn(|_| Exp1.sample(rng));
        if let Ok(w) = WeightVector::normalized(raw) {
            return w;
        }
    }
}

/// `n` uniform draws from the 8-simplex.
pub fn sample_candidates(n: usize, seed: u64) -> Result<CandidatePool> {
    if n == 0 {
        return Err(Error::Config("pool size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates = (0..n).map(|_| sample_dirichlet(&mut rng)).collect();
    Ok(CandidatePool { seed, candidates })
}

/// How the dissipation variance enters the exploration bonus.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncertaintyForm {
    /// `μ + κ·sqrt(σ²)`
    #[default]
    StdDev,
    /// `μ + κ·σ²`
    Variance,
}

pub fn ucb(mean: f64, variance: f64, kappa: f64, form: UncertaintyForm) -> f64 {
    if kappa == 0.0 {
        return mean;
    }
    let spread = match form {
        UncertaintyForm::StdDev => variance.max(0.0).sqrt(),
        UncertaintyForm::Variance => variance,
    };
    mean + kappa * spread
}

pub fn ucb_score(model: &dyn DissipationModel, w: &WeightVector<f64>, kappa: f64) -> f64 {
    let (mu, var) = model.dissipation_stats(std::slice::from_ref(w))[0];
    ucb(mu, var, kappa, UncertaintyForm::StdDev)
}

/// Adapts a closure `w ↦ (mean, variance)` into a [`DissipationModel`].
pub struct FnModel<F>(pub F);

impl<F> DissipationModel for FnModel<F>
where
    F: Fn(&WeightVector<f64>) -> (f64, f64) + Sync,
{
    fn dissipation_stats(&self, candidates: &[WeightVector<f64>]) -> Vec<(f64, f64)> {
        candidates.iter().map(&self.0).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub kappa: f64,
    pub radius: f64,
    pub batch_size: usize,
    /// Previously selected designs every pick must stay `radius` away from.
    pub exclusion: Vec<WeightVector<f64>>,
    pub uncertainty: UncertaintyForm,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            kappa: 2.0,
            radius: DEFAULT_RADIUS,
            batch_size: DEFAULT_PROPOSAL_SIZE,
            exclusion: Vec::new(),
            uncertainty: UncertaintyForm::StdDev,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) || !(self.radius >= 0.0) || self.batch_size == 0 {
            return Err(Error::Config(format!(
                "need κ ≥ 0, r ≥ 0 and batch size ≥ 1 (got κ = {}, r = {}, size = {})",
                self.kappa, self.radius, self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pick {
    pub pool_index: usize,
    pub weights: WeightVector<f64>,
    pub mean: f64,
    pub variance: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub picks: Vec<Pick>,
    /// The pool ran out before the batch was full.
    pub partial: bool,
}

/// Greedy selection over precomputed `(mean, variance)` scores. `accept` is
/// consulted only for candidates that already satisfy the distance constraint.
pub fn select_from_scores(
    candidates: &[WeightVector<f64>],
    stats: &[(f64, f64)],
    config: &AcquisitionConfig,
    mut accept: impl FnMut(usize, &WeightVector<f64>) -> bool,
) -> Result<Selection> {
    config.validate()?;
    if candidates.is_empty() {
        return Err(Error::Config("candidate pool is empty".into()));
    }
    if stats.len() != candidates.len() {
        return Err(Error::Config("one score per candidate required".into()));
    }
    let scores: Vec<f64> = stats
        .iter()
        .map(|&(m, v)| {
            let s = ucb(m, v, config.kappa, config.uncertainty);
            if s.is_nan() {
                f64::NEG_INFINITY
            } else {
                s
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut picks: Vec<Pick> = Vec::with_capacity(config.batch_size);
    for i in order {
        if picks.len() == config.batch_size {
            break;
        }
        let w = &candidates[i];
        let far = config.exclusion.iter().all(|e| w.distance(e) >= config.radius)
            && picks.iter().all(|p| w.distance(&p.weights) >= config.radius);
        if far && accept(i, w) {
            picks.push(Pick {
                pool_index: i,
                weights: *w,
                mean: stats[i].0,
                variance: stats[i].1,
                score: scores[i],
            });
        }
    }
    let partial = picks.len() < config.batch_size;
    if partial {
        log::warn!(
            "candidate pool exhausted: selected {} of {} designs",
            picks.len(),
            config.batch_size
        );
    }
    Ok(Selection { picks, partial })
}

pub fn select_batch(
    pool: &CandidatePool,
    model: &dyn DissipationModel,
    config: &AcquisitionConfig,
) -> Result<Selection> {
    let stats = model.dissipation_stats(pool.candidates());
    select_from_scores(pool.candidates(), &stats, config, |_, _| true)
}

/// κ per batch: none for the uniformly sampled first batch, `early` for
/// batches 2 and 3, then `steps` in order, then `final_kappa`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaSchedule {
    pub early: f64,
    pub steps: Vec<f64>,
    pub final_kappa: f64,
}

impl Default for KappaSchedule {
    fn default() -> Self {
        KappaSchedule {
            early: 2.0,
            steps: vec![1.0, 0.75, 0.5],
            final_kappa: 0.0,
        }
    }
}

impl KappaSchedule {
    pub fn validate(&self) -> Result<()> {
        let seq: Vec<f64> = std::iter::once(self.early)
            .chain(self.steps.iter().copied())
            .chain(std::iter::once(self.final_kappa))
            .collect();
        if seq.iter().any(|k| !(*k >= 0.0)) || seq.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config(format!(
                "κ schedule must be nonnegative and nonincreasing: {seq:?}"
            )));
        }
        Ok(())
    }

    pub fn kappa(&self, batch: usize) -> Option<f64> {
        match batch {
            0 | 1 => None,
            2 | 3 => Some(self.early),
            b => Some(self.steps.get(b - 4).copied().unwrap_or(self.final_kappa)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProposalRow {
    pub rank: usize,
    pub design_id: String,
    pub weights: WeightVector<f64>,
    pub mean: f64,
    pub variance: f64,
    pub score: f64,
}

pub const PROPOSAL_HEADER: [&str; 13] = [
    "rank",
    "design_id",
    "w1",
    "w2",
    "w3",
    "w4",
    "w5",
    "w6",
    "w7",
    "w8",
    "mu_d",
    "var_d",
    "ucb",
];

/// Writes `rank,design_id,w1..w8,mu_d,var_d,ucb` rows.
pub fn write_proposal_csv(rows: &[ProposalRow], path: &Path) -> Result<()> {
    let mut out = csv::Writer::from_path(path).map_err(|e| Error::malformed(path, e.to_string()))?;
    let wrap = |e: csv::Error| Error::malformed(path, e.to_string());
    out.write_record(PROPOSAL_HEADER).map_err(wrap)?;
    for r in rows {
        let mut rec = vec![r.rank.to_string(), r.design_id.clone()];
        rec.extend(r.weights.as_array().iter().map(|w| w.to_string()));
        rec.extend([r.mean.to_string(), r.variance.to_string(), r.score.to_string()]);
        out.write_record(&rec).map_err(wrap)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_proposal_csv(path: &Path) -> Result<Vec<ProposalRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::malformed(path, e.to_string()))?;
    let header = rdr.headers().map_err(|e| Error::malformed(path, e.to_string()))?;
    if header.iter().ne(PROPOSAL_HEADER) {
        return Err(Error::malformed(path, "unexpected proposal header"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::malformed(path, e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| Error::malformed(path, format!("column {}: {e}", PROPOSAL_HEADER[i])))
        };
        let w: [f64; NUM_PRIMITIVES] = [num(2)?, num(3)?, num(4)?, num(5)?, num(6)?, num(7)?, num(8)?, num(9)?];
        rows.push(ProposalRow {
            rank: rec[0].parse().map_err(|_| Error::malformed(path, "bad rank"))?,
            design_id: rec[1].to_string(),
            weights: WeightVector::new(w).map_err(|e| Error::malformed(path, e.to_string()))?,
            mean: num(10)?,
            variance: num(11)?,
            score: num(12)?,
        });
    }
    Ok(rows)
}
