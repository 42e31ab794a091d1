//! Raw curve CSV: header `strain,stress_mpa,phase`, phase ∈ {load, unload}.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::curve::StressStrainCurve;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Load,
    Unload,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    strain: f64,
    stress_mpa: f64,
    phase: Phase,
}

pub fn read_curve_csv(path: &Path) -> Result<StressStrainCurve<f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::malformed(path, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::malformed(path, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["strain", "stress_mpa", "phase"] {
        return Err(Error::malformed(
            path,
            format!(
                "expected header `strain,stress_mpa,phase`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut strain = Vec::new();
    let mut stress = Vec::new();
    let mut load_len = 0;
    let mut seen_unload = false;
    for (line, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::malformed(path, e.to_string()))?;
        match row.phase {
            Phase::Load if seen_unload => {
                return Err(Error::malformed(
                    path,
                    format!("loading sample on data row {} after unloading began", line + 1),
                ))
            }
            Phase::Load => load_len += 1,
            Phase::Unload => seen_unload = true,
        }
        strain.push(row.strain);
        stress.push(row.stress_mpa);
    }
    StressStrainCurve::with_split(strain, stress, load_len).map_err(|e| Error::malformed(path, e.to_string()))
}

pub fn write_curve_csv(curve: &StressStrainCurve<f64>, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::malformed(path, e.to_string()))?;
    for (i, (&strain, &stress_mpa)) in curve.strain().iter().zip(curve.stress()).enumerate() {
        let phase = if i < curve.load_len() {
            Phase::Load
        } else {
            Phase::Unload
        };
        writer
            .serialize(Row {
                strain,
                stress_mpa,
                phase,
            })
            .map_err(|e| Error::malformed(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// `<design-id>_rep<k>.csv`
pub fn replicate_file_name(design_id: &str, replicate: usize) -> String {
    format!("{design_id}_rep{replicate}.csv")
}

/// Splits a replicate file name into design id and replicate number.
pub fn parse_replicate_name(path: &Path) -> Option<(String, usize)> {
    let stem = path.file_name()?.to_str()?.strip_suffix(".csv")?;
    let (id, rep) = stem.rsplit_once("_rep")?;
    if id.is_empty() {
        return None;
    }
    Some((id.to_string(), rep.parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b01-d003_rep1.csv");
        let c = StressStrainCurve::from_branches(&[(0.0, 0.0), (0.25, 0.4), (0.5, 1.0)], &[(0.25, 0.1), (0.0, 0.0)])
            .unwrap();
        write_curve_csv(&c, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("strain,stress_mpa,phase\n"));
        assert!(text.contains(",unload"));
        assert_eq!(read_curve_csv(&path).unwrap(), c);
        assert_eq!(parse_replicate_name(&path), Some(("b01-d003".to_string(), 1)));
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let bad_header = dir.path().join("a_rep1.csv");
        std::fs::write(&bad_header, "e,s,p\n0,0,load\n").unwrap();
        assert!(matches!(read_curve_csv(&bad_header), Err(Error::Malformed { .. })));

        let order = dir.path().join("b_rep1.csv");
        std::fs::write(&order, "strain,stress_mpa,phase\n0,0,load\n0.1,1,unload\n0.2,1,load\n").unwrap();
        assert!(matches!(read_curve_csv(&order), Err(Error::Malformed { .. })));

        let phase = dir.path().join("c_rep1.csv");
        std::fs::write(&phase, "strain,stress_mpa,phase\n0,0,squeeze\n").unwrap();
        assert!(matches!(read_curve_csv(&phase), Err(Error::Malformed { .. })));

        assert_eq!(parse_replicate_name(Path::new("nope.csv")), None);
        assert_eq!(parse_replicate_name(Path::new("x_repA.csv")), None);
    }
}
