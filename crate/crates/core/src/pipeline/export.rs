use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metadata::ClipMetadata;
use crate::error::Result;
use crate::gmm::GmmModel;
use crate::matrix::RowMatrix;

pub const DISTANCES_FILE: &str = "distances.csv";
pub const ROWS_FILE: &str = "rows.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Sample,
    ClusterCenter,
}

/// Sidecar metadata for one row/column of the distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub index: usize,
    pub kind: RowKind,
    pub machine: String,
    pub section: String,
    pub split: String,
    pub domain: String,
    pub label: String,
    pub clip_id: String,
}

/// Pairwise metric distances between clip features and the mixture means.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceExport {
    pub matrix: RowMatrix,
    pub rows: Vec<DistanceRow>,
}

/// Distance matrix over `features` followed by the `K` component means.
pub fn export_distances(
    model: &GmmModel,
    features: &[(Vec<f64>, ClipMetadata)],
) -> Result<DistanceExport> {
    let mut points: Vec<&[f64]> = features.iter().map(|(v, _)| v.as_slice()).collect();
    let means = model.means();
    points.extend(means.iter().map(Vec::as_slice));
    let matrix = model.distance_matrix(&points)?;

    let mut rows: Vec<DistanceRow> = features
        .iter()
        .enumerate()
        .map(|(index, (_, m))| DistanceRow {
            index,
            kind: RowKind::Sample,
            machine: m.machine.to_string(),
            section: m.section_tag(),
            split: m.split.to_string(),
            domain: m.domain.to_string(),
            label: m.label.to_string(),
            clip_id: m.clip_id.clone(),
        })
        .collect();
    let (machine, section) = features
        .first()
        .map(|(_, m)| (m.machine.to_string(), m.section_tag()))
        .unwrap_or_default();
    for k in 0..model.n_components() {
        rows.push(DistanceRow {
            index: features.len() + k,
            kind: RowKind::ClusterCenter,
            machine: machine.clone(),
            section: section.clone(),
            split: String::new(),
            domain: String::new(),
            label: String::new(),
            clip_id: format!("center_{k}"),
        });
    }
    Ok(DistanceExport { matrix, rows })
}

impl DistanceExport {
    /// Writes the matrix (no header, one line per row) as CSV.
    pub fn write_matrix<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.matrix.iter_rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn write_rows<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `distances.csv` and `rows.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut m = BufWriter::new(File::create(dir.join(DISTANCES_FILE))?);
        self.write_matrix(&mut m)?;
        m.flush()?;
        self.write_rows(BufWriter::new(File::create(dir.join(ROWS_FILE))?))
    }
}
