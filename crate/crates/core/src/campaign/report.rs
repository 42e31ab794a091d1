//! Per-batch dissipation statistics, PCA of the design weights and curve dumps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tpms_field::NUM_PRIMITIVES;

use super::{CampaignState, Measurement};

pub const PRIMITIVES_LABEL: &str = "primitives";

/// Min, max, mean and median dissipation of one batch (kJ/m³).
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub label: String,
    /// `None` for the external baseline row.
    pub batch: Option<usize>,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

impl BatchStats {
    /// Median of an even count is the mean of the two middle values.
    pub fn from_values(label: impl Into<String>, batch: Option<usize>, values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        Some(BatchStats {
            label: label.into(),
            batch,
            count: n,
            min: v[0],
            max: v[n - 1],
            mean: v.iter().sum::<f64>() / n as f64,
            median,
        })
    }
}

/// The primitive baseline row (if measured) followed by one row per measured batch.
pub fn batch_statistics(state: &CampaignState) -> Vec<BatchStats> {
    let values = |ms: &[Measurement]| ms.iter().map(|m| m.dissipation).collect::<Vec<_>>();
    let mut rows = Vec::new();
    rows.extend(BatchStats::from_values(
        PRIMITIVES_LABEL,
        None,
        &values(&state.external),
    ));
    for b in &state.batches {
        rows.extend(BatchStats::from_values(
            b.index.to_string(),
            Some(b.index),
            &values(&b.measured),
        ));
    }
    rows
}

/// Eigenvalues (descending) and unit eigenvectors of a symmetric matrix by cyclic Jacobi rotations.
///
/// Each eigenvector is signed so that its largest-magnitude entry is positive.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut e: Vec<f64> = (0..n).map(|k| v[k][i]).collect();
            let lead = e
                .iter()
                .copied()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() + 1e-12 { x } else { acc });
            if lead < 0.0 {
                e.iter_mut().for_each(|x| *x = -*x);
            }
            e
        })
        .collect();
    (values, vectors)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaPoint {
    pub design_id: String,
    pub batch: Option<usize>,
    pub coords: [f64; 2],
    pub dissipation: f64,
    pub dominant: String,
}

/// Projection of all measured weight vectors onto the top two covariance eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    pub mean: [f64; NUM_PRIMITIVES],
    pub components: [[f64; NUM_PRIMITIVES]; 2],
    /// Eigenvalues of the two components; zero when the data has no spread.
    pub variances: [f64; 2],
    pub points: Vec<PcaPoint>,
}

impl Pca {
    pub fn fit<'a>(measurements: impl IntoIterator<Item = (&'a Measurement, Option<usize>)>) -> Option<Pca> {
        let data: Vec<(&Measurement, Option<usize>)> = measurements.into_iter().collect();
        if data.is_empty() {
            return None;
        }
        let n = data.len() as f64;
        let mut mean = [0.0; NUM_PRIMITIVES];
        for (m, _) in &data {
            for (acc, x) in mean.iter_mut().zip(m.weights.as_array()) {
                *acc += x / n;
            }
        }
        let mut cov = vec![vec![0.0; NUM_PRIMITIVES]; NUM_PRIMITIVES];
        for (m, _) in &data {
            let w = m.weights.as_array();
            for i in 0..NUM_PRIMITIVES {
                for j in 0..NUM_PRIMITIVES {
                    cov[i][j] += (w[i] - mean[i]) * (w[j] - mean[j]) / n;
                }
            }
        }
        let (values, vectors) = symmetric_eigen(&cov);
        let comp = |k: usize| -> [f64; NUM_PRIMITIVES] { std::array::from_fn(|i| vectors[k][i]) };
        let components = [comp(0), comp(1)];
        let points = data
            .iter()
            .map(|(m, batch)| {
                let w = m.weights.as_array();
                let proj =
                    |c: &[f64; NUM_PRIMITIVES]| (0..NUM_PRIMITIVES).map(|i| (w[i] - mean[i]) * c[i]).sum::<f64>();
                PcaPoint {
                    design_id: m.design_id.clone(),
                    batch: *batch,
                    coords: [proj(&components[0]), proj(&components[1])],
                    dissipation: m.dissipation,
                    dominant: m.weights.dominant().name().to_string(),
                }
            })
            .collect();
        Some(Pca {
            mean,
            components,
            variances: [values[0].max(0.0), values[1].max(0.0)],
            points,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignReport {
    pub table: Vec<BatchStats>,
    pub pca: Pca,
    /// Highest measured dissipation over all batches (excluding the baseline).
    pub best: Option<(String, f64)>,
}

impl CampaignReport {
    /// Ratio of the last batch mean to the first batch mean.
    pub fn improvement(&self) -> Option<f64> {
        let batches: Vec<&BatchStats> = self.table.iter().filter(|r| r.batch.is_some()).collect();
        match (batches.first(), batches.last()) {
            (Some(a), Some(b)) if a.mean > 0.0 => Some(b.mean / a.mean),
            _ => None,
        }
    }

    pub fn table_csv(&self) -> String {
        let mut s = String::from("batch,count,min,max,mean,median\n");
        for r in &self.table {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.label, r.count, r.min, r.max, r.mean, r.median);
        }
        s
    }

    pub fn pca_csv(&self) -> String {
        let mut s = String::from("design_id,batch,pc1,pc2,dissipation,dominant\n");
        for p in &self.pca.points {
            let batch = p.batch.map_or_else(|| "external".to_string(), |b| b.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                p.design_id, batch, p.coords[0], p.coords[1], p.dissipation, p.dominant
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("Energy dissipation (kJ/m³) by batch\n");
        let _ = writeln!(
            s,
            "{:>10} {:>5} {:>10} {:>10} {:>10} {:>10}",
            "batch", "n", "min", "max", "mean", "median"
        );
        for r in &self.table {
            let _ = writeln!(
                s,
                "{:>10} {:>5} {:>10.2} {:>10.2} {:>10.2} {:>10.2}",
                r.label, r.count, r.min, r.max, r.mean, r.median
            );
        }
        if let Some(x) = self.improvement() {
            let _ = writeln!(s, "last/first batch mean: {x:.2}x");
        }
        if let Some((id, d)) = &self.best {
            let _ = writeln!(s, "best design: {id} ({d:.2} kJ/m³)");
        }
        let _ = writeln!(
            s,
            "PCA variances: {:.4e}, {:.4e}",
            self.pca.variances[0], self.pca.variances[1]
        );
        s
    }
}

pub fn report(state: &CampaignState) -> Result<CampaignReport> {
    let table = batch_statistics(state);
    if !table.iter().any(|r| r.batch.is_some()) {
        return Err(Error::Campaign("no measured batch to report".into()));
    }
    let measured = state
        .batches
        .iter()
        .flat_map(|b| b.measured.iter().map(move |m| (m, Some(b.index))))
        .chain(state.external.iter().map(|m| (m, None)));
    let pca = Pca::fit(measured).expect("at least one measurement");
    let best = state
        .batches
        .iter()
        .flat_map(|b| &b.measured)
        .max_by(|a, b| a.dissipation.total_cmp(&b.dissipation))
        .map(|m| (m.design_id.clone(), m.dissipation));
    Ok(CampaignReport { table, pca, best })
}

/// Long-format canonical curves of every measurement.
pub fn curves_csv(state: &CampaignState) -> String {
    let mut s = String::from("design_id,phase,strain,stress\n");
    for m in state.measurements() {
        let grid = m.curve.grid();
        for (phase, ys) in [("load", m.curve.loading()), ("unload", m.curve.unloading())] {
            for (e, y) in grid.iter().zip(ys) {
                let _ = writeln!(s, "{},{phase},{e},{y}", m.design_id);
            }
        }
    }
    s
}

/// Writes `summary.csv`, `pca.csv`, `curves.csv` and `report.txt` into `dir`.
pub fn write_report(state: &CampaignState, dir: &Path) -> Result<(CampaignReport, Vec<PathBuf>)> {
    let r = report(state)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("summary.csv", r.table_csv()),
        ("pca.csv", r.pca_csv()),
        ("curves.csv", curves_csv(state)),
        ("report.txt", r.to_text()),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok((r, written))
}
