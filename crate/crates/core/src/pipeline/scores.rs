use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::metadata::{ClipMetadata, Domain, Label, Split};
use crate::error::{Error, Result};
use crate::eval::{LabeledScore, ScoreGroup};
use crate::gmm::AnomalyScore;

/// One line of a score file: `machine,section,domain,split,label,clip_id,score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub machine: String,
    pub section: String,
    pub domain: Domain,
    pub split: Split,
    pub label: Label,
    pub clip_id: String,
    pub score: f64,
}

impl ScoreRecord {
    pub fn new(meta: &ClipMetadata, score: AnomalyScore) -> Self {
        Self {
            machine: meta.machine.to_string(),
            section: meta.section_tag(),
            domain: meta.domain,
            split: meta.split,
            label: meta.label,
            clip_id: meta.clip_id.clone(),
            score: score.value(),
        }
    }

    fn sort_key(&self) -> (&str, &str, Domain, Split, Label, &str) {
        (
            &self.machine,
            &self.section,
            self.domain,
            self.split,
            self.label,
            &self.clip_id,
        )
    }
}

/// Sorts records into the canonical order used for score files.
pub fn sort_records(records: &mut [ScoreRecord]) {
    records.sort_by(|a, b| {
        a.sort_key()
            .cmp(&b.sort_key())
            .then(a.score.total_cmp(&b.score))
    });
}

pub fn write_scores<W: Write>(w: W, records: &[ScoreRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if records.is_empty() {
        out.write_record([
            "machine", "section", "domain", "split", "label", "clip_id", "score",
        ])?;
    }
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_scores<R: Read>(r: R) -> Result<Vec<ScoreRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader.headers()?.clone();
    let expected = [
        "machine", "section", "domain", "split", "label", "clip_id", "score",
    ];
    if headers.iter().ne(expected) {
        return Err(Error::Format(format!(
            "score file header must be {}, got {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Groups labeled records by (machine, section, domain) in sorted order.
pub fn group_scores(records: &[ScoreRecord]) -> Result<Vec<ScoreGroup>> {
    let mut groups: BTreeMap<(String, String, Domain), Vec<LabeledScore>> = BTreeMap::new();
    for r in records {
        let anomalous = match r.label {
            Label::Normal => false,
            Label::Anomaly => true,
            Label::Unknown => {
                return Err(Error::Parameter(format!(
                    "clip {} of {} section {} has no ground-truth label",
                    r.clip_id, r.machine, r.section
                )))
            }
        };
        groups
            .entry((r.machine.clone(), r.section.clone(), r.domain))
            .or_default()
            .push(LabeledScore::new(r.score, anomalous));
    }
    Ok(groups
        .into_iter()
        .map(|((machine, section, domain), items)| ScoreGroup {
            machine,
            section,
            domain: domain.to_string(),
            items,
        })
        .collect())
}
