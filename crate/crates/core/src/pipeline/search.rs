use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{section_seed, MachineConfig};
use super::metadata::{Domain, Label, MachineType};
use super::train::{train_from_vectors, twfr_vectors, RankedClip};
use crate::error::{Error, Result};
use crate::eval::{auc, LabeledScore};

/// `{0.00, 0.01, ..., 1.00}`.
pub fn default_grid() -> Vec<f64> {
    (0..=100).map(|i| f64::from(i) / 100.0).collect()
}

/// Validation AUC for one candidate `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRow {
    pub r: f64,
    pub mean_auc: f64,
    /// (section, AUC) in section order.
    pub section_auc: Vec<(u8, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_r: f64,
    pub table: Vec<SearchRow>,
}

impl SearchResult {
    /// CSV with columns `r,mean_auc,section_NN...`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let sections: Vec<u8> = self
            .table
            .first()
            .map(|row| row.section_auc.iter().map(|s| s.0).collect())
            .unwrap_or_default();
        let mut header = vec!["r".to_owned(), "mean_auc".to_owned()];
        header.extend(sections.iter().map(|s| format!("section_{s:02}")));
        out.write_record(&header)?;
        for row in &self.table {
            let mut rec = vec![row.r.to_string(), row.mean_auc.to_string()];
            rec.extend(row.section_auc.iter().map(|s| s.1.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn machine_of(clips: &[RankedClip]) -> Result<MachineType> {
    let first = clips
        .first()
        .ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    match clips.iter().find(|c| c.meta.machine != first.meta.machine) {
        Some(other) => Err(Error::Parameter(format!(
            "grid search mixes machine types {} and {}",
            first.meta.machine, other.meta.machine
        ))),
        None => Ok(first.meta.machine.clone()),
    }
}

/// Picks `r` from `grid` by mean validation AUC over sections.
///
/// For every candidate, one model per section is trained on the training
/// clips and scored on that section's labeled validation clips. Ties go to
/// the larger `r`.
pub fn grid_search_r(
    train: &[RankedClip],
    validation: &[RankedClip],
    grid: &[f64],
    template: &MachineConfig,
    seed: u64,
) -> Result<SearchResult> {
    if grid.is_empty() {
        return Err(Error::Parameter("r grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Parameter(format!("grid value {bad} outside [0, 1]")));
    }
    let machine = machine_of(train)?;
    if machine_of(validation)? != machine {
        return Err(Error::Parameter(
            "training and validation machines differ".into(),
        ));
    }

    let mut train_by_section: BTreeMap<u8, Vec<&RankedClip>> = BTreeMap::new();
    for c in train {
        train_by_section.entry(c.meta.section).or_default().push(c);
    }
    let mut val_by_section: BTreeMap<u8, Vec<&RankedClip>> = BTreeMap::new();
    for c in validation {
        if c.meta.label == Label::Unknown {
            return Err(Error::Parameter(format!(
                "validation clip {} has no label",
                c.meta.file_name
            )));
        }
        val_by_section.entry(c.meta.section).or_default().push(c);
    }
    for (section, clips) in &val_by_section {
        let anomalies = clips
            .iter()
            .filter(|c| c.meta.label == Label::Anomaly)
            .count();
        if anomalies == 0 || anomalies == clips.len() {
            return Err(Error::SingleClass {
                positives: anomalies,
                negatives: clips.len() - anomalies,
            });
        }
        if !train_by_section.contains_key(section) {
            return Err(Error::Parameter(format!(
                "no training clips for validation section {section:02}"
            )));
        }
    }

    let table = grid
        .par_iter()
        .map(|&r| {
            let cfg = template.clone().with_r(r);
            let mut section_auc = Vec::with_capacity(val_by_section.len());
            for (&section, val) in &val_by_section {
                let train_clips = &train_by_section[&section];
                let vectors = twfr_vectors(train_clips, r)?;
                let tagged: Vec<(Vec<f64>, Domain)> = vectors
                    .into_iter()
                    .zip(train_clips)
                    .map(|(v, c)| (v, c.meta.domain))
                    .collect();
                let seed = section_seed(seed, &machine, section);
                let trained = train_from_vectors(&machine, section, &tagged, &cfg, seed)?;

                let rule = cfg.gmm.scoring_rule();
                let items = twfr_vectors(val, r)?
                    .iter()
                    .zip(val)
                    .map(|(v, c)| {
                        Ok(LabeledScore::new(
                            trained.model.anomaly_score_with(v, rule)?.value(),
                            c.meta.label == Label::Anomaly,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                section_auc.push((section, auc(&items)?));
            }
            let mean_auc = section_auc.iter().map(|s| s.1).sum::<f64>() / section_auc.len() as f64;
            Ok(SearchRow {
                r,
                mean_auc,
                section_auc,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = table
        .iter()
        .fold(None::<&SearchRow>, |best, row| match best {
            Some(b) if row.mean_auc < b.mean_auc => Some(b),
            Some(b) if row.mean_auc == b.mean_auc && row.r <= b.r => Some(b),
            _ => Some(row),
        })
        .expect("grid is nonempty");
    Ok(SearchResult {
        best_r: best.r,
        table,
    })
}
