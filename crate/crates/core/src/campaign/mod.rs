//! Multi-batch discovery campaigns: persistent state, measurement ingestion,
//! retraining and proposal, mesh export, reporting and a closed-loop virtual lab.

mod report;
mod virtual_lab;

pub use report::{
    batch_statistics, curves_csv, report, symmetric_eigen, write_report, BatchStats, CampaignReport, Pca, PcaPoint,
    PRIMITIVES_LABEL,
};
pub use virtual_lab::{VirtualLab, VirtualLabConfig};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    sample_candidates, sample_dirichlet, select_from_scores, AcquisitionConfig, KappaSchedule, ProposalRow,
    UncertaintyForm, DEFAULT_POOL_SIZE, DEFAULT_PROPOSAL_SIZE, DEFAULT_RADIUS, FAST_POOL_SIZE,
};
use crate::curve_lab::{
    energy_dissipation, parse_replicate_name, process_replicates, read_curve_csv, CanonicalCurve, SavGolParams,
    StressStrainCurve,
};
use crate::error::{Error, Result};
use crate::lattice_geometry::{check_design, design_mesh, is_valid_design, write_stl, LatticeSpec};
use crate::surrogate::{
    train_ensemble, DissipationModel, EnsembleModel, MlpSpec, TrainingConfig, TrainingRecord, TrainingSet,
};
use crate::tpms_field::{Primitive, ThicknessMode, TpmsField, WeightVector};

pub const STATE_SCHEMA_VERSION: u32 = 1;
pub const PRIMITIVE_ID_PREFIX: &str = "primitive-";

/// Stable 64-bit seed from a parent seed, a tag and an index.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h.rotate_left(17) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn design_id(batch: usize, rank: usize) -> String {
    format!("b{batch:02}-d{rank:03}")
}

pub fn primitive_id(p: Primitive) -> String {
    format!("{PRIMITIVE_ID_PREFIX}{}", p.slug())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub initial_batch_size: usize,
    pub proposal_size: usize,
    /// Leading proposals measured per batch by the virtual lab.
    pub fabricate_count: usize,
    pub total_batches: usize,
    pub pool_size: usize,
    pub radius: f64,
    pub kappa_schedule: KappaSchedule,
    pub kappa_override: Option<f64>,
    pub uncertainty: UncertaintyForm,
    pub thickness: f64,
    pub thickness_mode: ThicknessMode,
    /// Lattice on which printability is checked during selection.
    pub validity_lattice: LatticeSpec,
    /// Lattice written by mesh export.
    pub export_lattice: LatticeSpec,
    pub filter: SavGolParams,
    pub surrogate: MlpSpec,
    pub training: TrainingConfig,
    pub lab: VirtualLabConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            initial_batch_size: 23,
            proposal_size: DEFAULT_PROPOSAL_SIZE,
            fabricate_count: 25,
            total_batches: 10,
            pool_size: DEFAULT_POOL_SIZE,
            radius: DEFAULT_RADIUS,
            kappa_schedule: KappaSchedule::default(),
            kappa_override: None,
            uncertainty: UncertaintyForm::StdDev,
            thickness: 0.5,
            thickness_mode: ThicknessMode::Normalized,
            validity_lattice: LatticeSpec::default(),
            export_lattice: LatticeSpec::default(),
            filter: SavGolParams::default(),
            surrogate: MlpSpec::default(),
            training: TrainingConfig::default(),
            lab: VirtualLabConfig::default(),
        }
    }
}

impl CampaignConfig {
    /// Desk-scale settings: smaller pool, compact ensemble, coarse validity lattice.
    pub fn fast() -> Self {
        CampaignConfig {
            pool_size: FAST_POOL_SIZE,
            validity_lattice: LatticeSpec::default().with_tiling([2, 2, 2]).with_resolution(32),
            surrogate: MlpSpec::compact(),
            training: TrainingConfig::fast(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_batch_size == 0 || self.proposal_size == 0 || self.total_batches == 0 || self.pool_size == 0 {
            return Err(Error::Config(
                "batch sizes, batch count and pool size must be positive".into(),
            ));
        }
        if self.fabricate_count == 0 || self.fabricate_count > self.proposal_size {
            return Err(Error::Config(format!(
                "fabricate count {} must lie in 1..={}",
                self.fabricate_count, self.proposal_size
            )));
        }
        if !(self.radius >= 0.0) || !(self.thickness > 0.0) {
            return Err(Error::Config("radius must be ≥ 0 and thickness > 0".into()));
        }
        if let Some(k) = self.kappa_override {
            if !(k >= 0.0) {
                return Err(Error::Config(format!("κ override {k} must be ≥ 0")));
            }
        }
        self.kappa_schedule.validate()?;
        self.validity_lattice.validate()?;
        self.export_lattice.validate()?;
        self.filter.validate()?;
        self.surrogate.validate()?;
        self.training.validate()?;
        self.lab.validate()
    }

    pub fn field(&self, w: WeightVector<f64>) -> Result<TpmsField<f64>> {
        TpmsField::with_mode(w, self.thickness, self.thickness_mode)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposedDesign {
    pub id: String,
    pub rank: usize,
    pub weights: WeightVector<f64>,
    pub predicted_mean: Option<f64>,
    pub predicted_variance: Option<f64>,
    pub ucb: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub design_id: String,
    pub weights: WeightVector<f64>,
    pub curve: CanonicalCurve<f64>,
    /// kJ/m³
    pub dissipation: f64,
    pub replicates: usize,
    pub single_replicate: bool,
    pub external: bool,
    pub sources: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub index: usize,
    /// `None` for the uniformly sampled first batch.
    pub kappa: Option<f64>,
    pub pool_seed: Option<u64>,
    pub proposed: Vec<ProposedDesign>,
    pub measured: Vec<Measurement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    pub schema_version: u32,
    /// Incremented by every mutation.
    pub revision: u64,
    pub seed: u64,
    pub config: CampaignConfig,
    pub batches: Vec<Batch>,
    /// Measurements of designs outside the proposal history (the primitive baseline).
    pub external: Vec<Measurement>,
    /// File name of the latest ensemble checkpoint, relative to the state file.
    pub checkpoint: Option<String>,
}

impl CampaignState {
    pub fn new(config: CampaignConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(CampaignState {
            schema_version: STATE_SCHEMA_VERSION,
            revision: 0,
            seed,
            config,
            batches: Vec::new(),
            external: Vec::new(),
            checkpoint: None,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let json_err = |e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        };
        let value: serde_json::Value = serde_json::from_str(&text).map_err(json_err)?;
        let found = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::malformed(path, "missing schema_version"))?;
        if found != STATE_SCHEMA_VERSION as u64 {
            return Err(Error::SchemaVersion {
                found: found.min(u32::MAX as u64) as u32,
                supported: STATE_SCHEMA_VERSION,
            });
        }
        let state: CampaignState = serde_json::from_value(value).map_err(json_err)?;
        state.validate().map_err(|e| Error::malformed(path, e.to_string()))?;
        Ok(state)
    }

    fn validate(&self) -> Result<()> {
        for (i, b) in self.batches.iter().enumerate() {
            if b.index != i + 1 {
                return Err(Error::Campaign(format!(
                    "batch indices must be contiguous from 1 (found {} at position {})",
                    b.index,
                    i + 1
                )));
            }
            for m in &b.measured {
                if !b.proposed.iter().any(|p| p.id == m.design_id) {
                    return Err(Error::Campaign(format!(
                        "measurement {} has no matching proposal",
                        m.design_id
                    )));
                }
            }
        }
        if let Some(m) = self.external.iter().find(|m| !m.external) {
            return Err(Error::Campaign(format!(
                "external measurement {} is not flagged external",
                m.design_id
            )));
        }
        self.config.validate()
    }

    pub fn batch(&self, index: usize) -> Option<&Batch> {
        index.checked_sub(1).and_then(|i| self.batches.get(i))
    }

    pub fn next_batch_index(&self) -> usize {
        self.batches.len() + 1
    }

    /// Appends a batch of designs ranked in the given order and returns its index.
    pub fn push_batch(
        &mut self,
        kappa: Option<f64>,
        pool_seed: Option<u64>,
        designs: Vec<(WeightVector<f64>, Option<(f64, f64, f64)>)>,
    ) -> usize {
        let index = self.next_batch_index();
        let proposed = designs
            .into_iter()
            .enumerate()
            .map(|(i, (weights, pred))| ProposedDesign {
                id: design_id(index, i + 1),
                rank: i + 1,
                weights,
                predicted_mean: pred.map(|p| p.0),
                predicted_variance: pred.map(|p| p.1),
                ucb: pred.map(|p| p.2),
            })
            .collect();
        self.batches.push(Batch {
            index,
            kappa,
            pool_seed,
            proposed,
            measured: Vec::new(),
        });
        self.revision += 1;
        index
    }

    /// All measurements: batches in order, then external ones.
    pub fn measurements(&self) -> impl Iterator<Item = &Measurement> {
        self.batches
            .iter()
            .flat_map(|b| b.measured.iter())
            .chain(&self.external)
    }

    pub fn proposed_weights(&self) -> Vec<WeightVector<f64>> {
        self.batches
            .iter()
            .flat_map(|b| b.proposed.iter().map(|p| p.weights))
            .collect()
    }

    fn find_proposed(&self, id: &str) -> Option<(usize, &ProposedDesign)> {
        self.batches
            .iter()
            .find_map(|b| b.proposed.iter().find(|p| p.id == id).map(|p| (b.index, p)))
    }

    pub fn training_set(&self) -> Result<TrainingSet<f64>> {
        TrainingSet::new(
            self.measurements()
                .map(|m| TrainingRecord {
                    weights: m.weights,
                    curve: m.curve.clone(),
                })
                .collect(),
        )
    }

    /// Resolves a design id to its weights and batch (`None` for the external baseline).
    pub fn resolve(&self, id: &str) -> Result<(WeightVector<f64>, Option<usize>)> {
        if let Some((batch, p)) = self.find_proposed(id) {
            return Ok((p.weights, Some(batch)));
        }
        if let Some(p) = id.strip_prefix(PRIMITIVE_ID_PREFIX).and_then(Primitive::from_slug) {
            return Ok((WeightVector::unit(p), None));
        }
        Err(Error::UnknownDesign(id.to_string()))
    }

    /// Processes replicate curves of one design into a measurement (not yet stored).
    pub fn measurement_from_curves(
        &self,
        id: &str,
        replicates: &[StressStrainCurve<f64>],
        sources: Vec<String>,
    ) -> Result<(Measurement, Option<usize>)> {
        let (weights, batch) = self.resolve(id)?;
        let curve = process_replicates(replicates, self.config.filter)?;
        let dissipation = energy_dissipation(&curve);
        Ok((
            Measurement {
                design_id: id.to_string(),
                weights,
                curve,
                dissipation,
                replicates: replicates.len(),
                single_replicate: replicates.len() == 1,
                external: batch.is_none(),
                sources,
            },
            batch,
        ))
    }

    /// Stores a measurement. Identical re-ingestion is a no-op; conflicting data is rejected.
    fn store(&mut self, m: Measurement, batch: Option<usize>) -> Result<bool> {
        let list = match batch {
            Some(b) => &mut self.batches[b - 1].measured,
            None => &mut self.external,
        };
        if let Some(existing) = list.iter().find(|x| x.design_id == m.design_id) {
            if *existing == m {
                return Ok(false);
            }
            return Err(Error::Campaign(format!(
                "design {} already has a different measurement; history is append-only",
                m.design_id
            )));
        }
        let pos = list.partition_point(|x| x.design_id < m.design_id);
        list.insert(pos, m);
        self.revision += 1;
        Ok(true)
    }
}

/// First batch: Dirichlet-uniform, printable, never a pure primitive.
pub fn init_campaign(config: CampaignConfig, seed: u64) -> Result<CampaignState> {
    let mut state = CampaignState::new(config, seed)?;
    let n = state.config.initial_batch_size;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "initial-batch", 1));
    let mut designs = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while designs.len() < n {
        attempts += 1;
        if attempts > 1000 * n {
            return Err(Error::Campaign(format!(
                "only {} of {n} printable designs after {attempts} draws",
                designs.len()
            )));
        }
        let w = sample_dirichlet(&mut rng);
        if w.as_array().iter().any(|&x| x >= 1.0 - 1e-9) {
            continue;
        }
        if is_valid_design(&state.config.field(w)?, &state.config.validity_lattice)? {
            designs.push((w, None));
        }
    }
    state.push_batch(None, None, designs);
    state.revision = 1;
    Ok(state)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IngestReport {
    pub stored: Vec<String>,
    pub unchanged: Vec<String>,
    pub single_replicate: Vec<String>,
}

/// Groups `<design-id>_rep<k>.csv` files by design and ingests each design.
pub fn ingest_results(state: &mut CampaignState, files: &[PathBuf]) -> Result<IngestReport> {
    let mut groups: BTreeMap<String, Vec<(usize, &PathBuf)>> = BTreeMap::new();
    for f in files {
        let (id, rep) = parse_replicate_name(f)
            .ok_or_else(|| Error::malformed(f, "file name must look like <design-id>_rep<k>.csv"))?;
        groups.entry(id).or_default().push((rep, f));
    }
    let mut prepared = Vec::with_capacity(groups.len());
    for (id, mut reps) in groups {
        reps.sort();
        let mut curves = Vec::with_capacity(reps.len());
        let mut sources = Vec::with_capacity(reps.len());
        for (_, path) in &reps {
            curves.push(read_curve_csv(path)?);
            sources.push(
                path.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            );
        }
        prepared.push(state.measurement_from_curves(&id, &curves, sources)?);
    }
    apply_measurements(state, prepared)
}

/// Ingests in-memory replicate curves keyed by design id.
pub fn ingest_curves(
    state: &mut CampaignState,
    curves: BTreeMap<String, Vec<StressStrainCurve<f64>>>,
) -> Result<IngestReport> {
    let mut prepared = Vec::with_capacity(curves.len());
    for (id, reps) in curves {
        let sources = (1..=reps.len())
            .map(|k| crate::curve_lab::replicate_file_name(&id, k))
            .collect();
        prepared.push(state.measurement_from_curves(&id, &reps, sources)?);
    }
    apply_measurements(state, prepared)
}

fn apply_measurements(state: &mut CampaignState, prepared: Vec<(Measurement, Option<usize>)>) -> Result<IngestReport> {
    for (m, batch) in &prepared {
        let list = match batch {
            Some(b) => &state.batches[b - 1].measured,
            None => &state.external,
        };
        if list.iter().any(|x| x.design_id == m.design_id && x != m) {
            return Err(Error::Campaign(format!(
                "design {} already has a different measurement; history is append-only",
                m.design_id
            )));
        }
    }
    let mut report = IngestReport::default();
    for (m, batch) in prepared {
        if m.single_replicate {
            log::warn!("{}: only one replicate; accepted and flagged", m.design_id);
            report.single_replicate.push(m.design_id.clone());
        }
        let id = m.design_id.clone();
        if state.store(m, batch)? {
            report.stored.push(id);
        } else {
            report.unchanged.push(id);
        }
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct Proposal {
    pub batch_index: usize,
    pub kappa: f64,
    pub rows: Vec<ProposalRow>,
    pub partial: bool,
    pub rejected_unprintable: usize,
    pub model: EnsembleModel<f64>,
}

pub fn kappa_for(state: &CampaignState, batch: usize) -> f64 {
    state
        .config
        .kappa_override
        .or_else(|| state.config.kappa_schedule.kappa(batch))
        .unwrap_or(0.0)
}

/// Retrains the ensemble on every measurement and appends the next ranked batch.
pub fn propose_next_batch(state: &mut CampaignState) -> Result<Proposal> {
    let last = state
        .batches
        .last()
        .ok_or_else(|| Error::Campaign("campaign has no batches; run init first".into()))?;
    if last.measured.is_empty() {
        return Err(Error::Campaign(format!(
            "batch {} has no measurements yet; ingest results before proposing",
            last.index
        )));
    }
    let index = state.next_batch_index();
    let kappa = kappa_for(state, index);
    let data = state.training_set()?;
    let training = TrainingConfig {
        seed: derive_seed(state.seed, "ensemble", index as u64),
        ..state.config.training.clone()
    };
    log::info!(
        "batch {index}: training {} members on {} designs",
        training.ensemble_size,
        data.len()
    );
    let model = train_ensemble(&state.config.surrogate, &data, &training)
        .map_err(|e| Error::Campaign(format!("ensemble training failed: {e}")))?;

    let pool_seed = derive_seed(state.seed, "pool", index as u64);
    let pool = sample_candidates(state.config.pool_size, pool_seed)?;
    log::info!("batch {index}: scoring {} candidates (κ = {kappa})", pool.len());
    let stats = model.dissipation_stats(pool.candidates());
    let config = AcquisitionConfig {
        kappa,
        radius: state.config.radius,
        batch_size: state.config.proposal_size,
        exclusion: state.proposed_weights(),
        uncertainty: state.config.uncertainty,
    };
    let mut rejected = 0usize;
    let mut failure = None;
    let selection = select_from_scores(pool.candidates(), &stats, &config, |_, w| {
        let ok = state
            .config
            .field(*w)
            .and_then(|f| is_valid_design(&f, &state.config.validity_lattice));
        match ok {
            Ok(true) => true,
            Ok(false) => {
                rejected += 1;
                false
            }
            Err(e) => {
                failure.get_or_insert(e);
                false
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    log::info!(
        "batch {index}: selected {} designs, {rejected} unprintable candidates skipped",
        selection.picks.len()
    );
    let designs = selection
        .picks
        .iter()
        .map(|p| (p.weights, Some((p.mean, p.variance, p.score))))
        .collect();
    state.push_batch(Some(kappa), Some(pool_seed), designs);
    let batch = state.batches.last().expect("just pushed");
    let rows = batch
        .proposed
        .iter()
        .zip(&selection.picks)
        .map(|(d, p)| ProposalRow {
            rank: d.rank,
            design_id: d.id.clone(),
            weights: d.weights,
            mean: p.mean,
            variance: p.variance,
            score: p.score,
        })
        .collect();
    Ok(Proposal {
        batch_index: index,
        kappa,
        rows,
        partial: selection.partial,
        rejected_unprintable: rejected,
        model,
    })
}

/// Rows of an existing batch in proposal-file form.
pub fn proposal_rows(state: &CampaignState, batch: usize) -> Result<Vec<ProposalRow>> {
    let b = state
        .batch(batch)
        .ok_or_else(|| Error::Campaign(format!("no batch {batch}")))?;
    Ok(b.proposed
        .iter()
        .map(|d| ProposalRow {
            rank: d.rank,
            design_id: d.id.clone(),
            weights: d.weights,
            mean: d.predicted_mean.unwrap_or(f64::NAN),
            variance: d.predicted_variance.unwrap_or(f64::NAN),
            score: d.ucb.unwrap_or(f64::NAN),
        })
        .collect())
}

/// Designs of `batch` the virtual lab fabricates: all of batch 1, otherwise the top ranks.
pub fn fabricated(state: &CampaignState, batch: usize) -> Vec<ProposedDesign> {
    match state.batch(batch) {
        None => Vec::new(),
        Some(b) if b.index == 1 => b.proposed.clone(),
        Some(b) => b.proposed.iter().take(state.config.fabricate_count).cloned().collect(),
    }
}

fn measure_with(
    lab: &VirtualLab,
    designs: impl IntoIterator<Item = (String, WeightVector<f64>)>,
) -> BTreeMap<String, Vec<StressStrainCurve<f64>>> {
    designs
        .into_iter()
        .map(|(id, w)| {
            let reps = (1..=lab.config().replicates).map(|k| lab.measure(&id, &w, k)).collect();
            (id, reps)
        })
        .collect()
}

/// Virtual measurement of every fabricated, not yet measured design of `batch`.
pub fn measure_batch_virtually(state: &mut CampaignState, lab: &VirtualLab, batch: usize) -> Result<IngestReport> {
    let done: Vec<String> = state
        .batch(batch)
        .map(|b| b.measured.iter().map(|m| m.design_id.clone()).collect())
        .unwrap_or_default();
    let todo = fabricated(state, batch)
        .into_iter()
        .filter(|d| !done.contains(&d.id))
        .map(|d| (d.id, d.weights));
    let curves = measure_with(lab, todo);
    ingest_curves(state, curves)
}

pub fn measure_primitives_virtually(state: &mut CampaignState, lab: &VirtualLab) -> Result<IngestReport> {
    let curves = measure_with(
        lab,
        Primitive::ALL.iter().map(|&p| (primitive_id(p), WeightVector::unit(p))),
    );
    ingest_curves(state, curves)
}

pub fn virtual_lab_for(state: &CampaignState) -> Result<VirtualLab> {
    VirtualLab::new(state.config.lab.clone(), derive_seed(state.seed, "virtual-lab", 0))
}

#[derive(Clone, Debug)]
pub struct VirtualRun {
    pub state: CampaignState,
    pub report: CampaignReport,
}

/// init → (measure → ingest → propose) until `total_batches` batches are measured.
pub fn run_virtual_campaign(config: CampaignConfig, seed: u64) -> Result<VirtualRun> {
    let mut state = init_campaign(config, seed)?;
    let lab = virtual_lab_for(&state)?;
    if state.config.lab.measure_primitives {
        measure_primitives_virtually(&mut state, &lab)?;
    }
    for batch in 1..=state.config.total_batches {
        measure_batch_virtually(&mut state, &lab, batch)?;
        let b = state.batch(batch).expect("batch exists");
        let mean = b.measured.iter().map(|m| m.dissipation).sum::<f64>() / b.measured.len().max(1) as f64;
        log::info!(
            "batch {batch}: {} designs measured, mean dissipation {mean:.2} kJ/m³",
            b.measured.len()
        );
        if batch < state.config.total_batches {
            propose_next_batch(&mut state)?;
        }
    }
    let report = report(&state)?;
    Ok(VirtualRun { state, report })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExportSummary {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<(String, String)>,
}

/// One binary STL per printable proposed design of `batch`, named `<design-id>.stl`.
pub fn export_batch_meshes(state: &CampaignState, batch: usize, dir: &Path) -> Result<ExportSummary> {
    let b = state
        .batch(batch)
        .ok_or_else(|| Error::Campaign(format!("no batch {batch}")))?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let lattice = &state.config.export_lattice;
    let mut summary = ExportSummary::default();
    for d in &b.proposed {
        let field = state.config.field(d.weights)?;
        let reason = match check_design(&field, lattice) {
            Ok(r) => r.reason(),
            Err(Error::EmptyStructure) => Some("no solid voxels".to_string()),
            Err(e) => return Err(e),
        };
        if let Some(reason) = reason {
            log::warn!("skipping {}: {reason}", d.id);
            summary.skipped.push((d.id.clone(), reason));
            continue;
        }
        let mesh = design_mesh(&field, lattice)?;
        let path = dir.join(format!("{}.stl", d.id));
        write_stl(&mesh, &path)?;
        summary.written.push(path);
    }
    Ok(summary)
}
