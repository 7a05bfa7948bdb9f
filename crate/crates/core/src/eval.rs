//! ROC AUC, partial AUC, and per-group reporting.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper false-positive rate for pAUC.
pub const DEFAULT_MAX_FPR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    /// Higher means more anomalous.
    pub score: f64,
    pub anomalous: bool,
}

impl LabeledScore {
    pub fn new(score: f64, anomalous: bool) -> Self {
        Self { score, anomalous }
    }
}

fn class_counts(items: &[LabeledScore]) -> Result<(usize, usize)> {
    if let Some(bad) = items.iter().find(|i| !i.score.is_finite()) {
        return Err(Error::Parameter(format!(
            "score {} is not finite",
            bad.score
        )));
    }
    let positives = items.iter().filter(|i| i.anomalous).count();
    let negatives = items.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass {
            positives,
            negatives,
        });
    }
    Ok((positives, negatives))
}

/// Items sorted by descending score, grouped into runs of equal score.
/// Each run is reported as (positives, negatives).
fn tie_runs_descending(items: &[LabeledScore]) -> Vec<(usize, usize)> {
    let mut sorted: Vec<&LabeledScore> = items.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut last = None;
    for item in sorted {
        if last != Some(item.score) {
            runs.push((0, 0));
            last = Some(item.score);
        }
        let run = runs.last_mut().expect("pushed above");
        if item.anomalous {
            run.0 += 1;
        } else {
            run.1 += 1;
        }
    }
    runs
}

/// Normalized Mann-Whitney U: the fraction of (anomalous, normal) pairs
/// ordered correctly, with ties counted as one half.
pub fn auc(items: &[LabeledScore]) -> Result<f64> {
    let (pos, neg) = class_counts(items)?;
    // Counted in half-pairs so the sum stays an exact integer.
    let mut half_pairs: u64 = 0;
    let mut neg_below = neg as u64;
    for (p, n) in tie_runs_descending(items) {
        let (p, n) = (p as u64, n as u64);
        neg_below -= n;
        half_pairs += p * (2 * neg_below + n);
    }
    Ok(half_pairs as f64 * 0.5 / (pos as f64 * neg as f64))
}

/// ROC vertices (fpr, tpr) from a descending threshold sweep.
pub fn roc_curve(items: &[LabeledScore]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = class_counts(items)?;
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (p, n) in tie_runs_descending(items) {
        tp += p;
        fp += n;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Trapezoidal area under the ROC curve for `fpr <= max_fpr`, not normalized.
pub fn partial_roc_area(items: &[LabeledScore], max_fpr: f64) -> Result<f64> {
    let points = roc_curve(items)?;
    let mut area = 0.0;
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 >= max_fpr {
            break;
        }
        if x1 <= max_fpr {
            area += (x1 - x0) * (y0 + y1) * 0.5;
        } else {
            let y_cut = y0 + (y1 - y0) * (max_fpr - x0) / (x1 - x0);
            area += (max_fpr - x0) * (y0 + y_cut) * 0.5;
            break;
        }
    }
    Ok(area)
}

/// Partial AUC over `fpr in [0, max_fpr]`, divided by `max_fpr`.
pub fn pauc(items: &[LabeledScore], max_fpr: f64) -> Result<f64> {
    if !(max_fpr > 0.0 && max_fpr <= 1.0) {
        return Err(Error::Parameter(format!(
            "max_fpr must be in (0, 1], got {max_fpr}"
        )));
    }
    if max_fpr == 1.0 {
        // Full-range area is the Mann-Whitney statistic; use the exact count.
        return auc(items);
    }
    Ok(partial_roc_area(items, max_fpr)? / max_fpr)
}

/// Scores of one (machine, section, domain) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGroup {
    pub machine: String,
    pub section: String,
    pub domain: String,
    pub items: Vec<LabeledScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub machine: String,
    pub section: String,
    pub domain: String,
    pub auc: f64,
    pub pauc: f64,
    pub n_normal: usize,
    pub n_anomaly: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    pub auc: f64,
    pub pauc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineSummary {
    pub machine: String,
    pub auc: f64,
    pub pauc: f64,
    pub n_normal: usize,
    pub n_anomaly: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub max_fpr: f64,
    pub rows: Vec<EvalRow>,
    /// Per machine: arithmetic mean over that machine's rows.
    pub machines: Vec<MachineSummary>,
    /// Mean over every (machine, section, domain) row.
    pub average_over_rows: MeanScores,
    /// Mean over machine summaries.
    pub average_over_machines: MeanScores,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Evaluates every group and averages the results.
pub fn aggregate(groups: &[ScoreGroup], max_fpr: f64) -> Result<EvalReport> {
    if groups.is_empty() {
        return Err(Error::EmptyGroup("no groups to evaluate".into()));
    }
    let rows = groups
        .par_iter()
        .map(|g| {
            if g.items.is_empty() {
                return Err(Error::EmptyGroup(format!(
                    "{}/{}/{}",
                    g.machine, g.section, g.domain
                )));
            }
            let n_anomaly = g.items.iter().filter(|i| i.anomalous).count();
            Ok(EvalRow {
                machine: g.machine.clone(),
                section: g.section.clone(),
                domain: g.domain.clone(),
                auc: auc(&g.items)?,
                pauc: pauc(&g.items, max_fpr)?,
                n_normal: g.items.len() - n_anomaly,
                n_anomaly,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_rows(rows, max_fpr))
}

impl EvalReport {
    /// Builds summaries and averages from already computed rows.
    pub fn from_rows(rows: Vec<EvalRow>, max_fpr: f64) -> Self {
        let mut names: Vec<&str> = Vec::new();
        for r in &rows {
            if !names.contains(&r.machine.as_str()) {
                names.push(&r.machine);
            }
        }
        let machines: Vec<MachineSummary> = names
            .iter()
            .map(|&name| {
                let mine: Vec<&EvalRow> = rows.iter().filter(|r| r.machine == name).collect();
                MachineSummary {
                    machine: name.to_owned(),
                    auc: mean(mine.iter().map(|r| r.auc)),
                    pauc: mean(mine.iter().map(|r| r.pauc)),
                    n_normal: mine.iter().map(|r| r.n_normal).sum(),
                    n_anomaly: mine.iter().map(|r| r.n_anomaly).sum(),
                }
            })
            .collect();
        let average_over_rows = MeanScores {
            auc: mean(rows.iter().map(|r| r.auc)),
            pauc: mean(rows.iter().map(|r| r.pauc)),
        };
        let average_over_machines = MeanScores {
            auc: mean(machines.iter().map(|m| m.auc)),
            pauc: mean(machines.iter().map(|m| m.pauc)),
        };
        Self {
            max_fpr,
            rows,
            machines,
            average_over_rows,
            average_over_machines,
        }
    }

    /// CSV with header `machine,section,domain,auc,pauc,n_normal,n_anomaly`.
    ///
    /// Group rows come first, then one `<machine>,all,all` row per machine,
    /// then `average_over_rows` and `average_over_machines`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        for m in &self.machines {
            out.serialize(EvalRow {
                machine: m.machine.clone(),
                section: "all".into(),
                domain: "all".into(),
                auc: m.auc,
                pauc: m.pauc,
                n_normal: m.n_normal,
                n_anomaly: m.n_anomaly,
            })?;
        }
        let n_normal = self.rows.iter().map(|r| r.n_normal).sum::<usize>();
        let n_anomaly = self.rows.iter().map(|r| r.n_anomaly).sum::<usize>();
        for (label, avg) in [
            ("average_over_rows", self.average_over_rows),
            ("average_over_machines", self.average_over_machines),
        ] {
            out.serialize(EvalRow {
                machine: label.into(),
                section: "all".into(),
                domain: "all".into(),
                auc: avg.auc,
                pauc: avg.pauc,
                n_normal,
                n_anomaly,
            })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn items(scores: &[f64], labels: &[u8]) -> Vec<LabeledScore> {
        scores
            .iter()
            .zip(labels)
            .map(|(&s, &l)| LabeledScore::new(s, l == 1))
            .collect()
    }

    fn brute_auc(items: &[LabeledScore]) -> f64 {
        let (mut good, mut ties, mut pairs) = (0u64, 0u64, 0u64);
        for p in items.iter().filter(|i| i.anomalous) {
            for n in items.iter().filter(|i| !i.anomalous) {
                pairs += 1;
                if p.score > n.score {
                    good += 1;
                } else if p.score == n.score {
                    ties += 1;
                }
            }
        }
        (good as f64 + 0.5 * ties as f64) / pairs as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(
            auc(&items(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1])).unwrap(),
            1.0
        );
        assert_eq!(
            auc(&items(&[0.9, 0.8, 0.2, 0.1], &[0, 0, 1, 1])).unwrap(),
            0.0
        );
        assert_eq!(
            auc(&items(&[1.0, 2.0, 3.0, 4.0], &[0, 1, 0, 1])).unwrap(),
            0.75
        );
        assert_eq!(auc(&items(&[1.0, 1.0], &[0, 1])).unwrap(), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(
            auc(&items(&[1.0, 2.0], &[1, 1])),
            Err(Error::SingleClass {
                positives: 2,
                negatives: 0
            })
        ));
        assert!(pauc(&items(&[1.0, 2.0], &[0, 0]), 0.1).is_err());
    }

    #[test]
    fn pauc_examples() {
        let perfect = items(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]);
        for p in [0.05, 0.1, 0.5, 1.0] {
            assert!((pauc(&perfect, p).unwrap() - 1.0).abs() < 1e-15);
        }
        let x = items(&[4.0, 3.0, 2.0, 1.0], &[1, 0, 1, 0]);
        assert!((pauc(&x, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(pauc(&x, 1.0).unwrap(), auc(&x).unwrap());
        assert!(pauc(&x, 0.0).is_err());
        assert!(pauc(&x, 1.5).is_err());
    }

    #[test]
    fn pauc_interpolates_inside_a_tie_run() {
        // One normal and one anomaly tied at the top: the ROC jumps diagonally
        // from (0,0) to (0.5,0.5); at fpr = 0.25 the curve is at 0.25.
        let x = items(&[5.0, 5.0, 1.0, 0.0], &[1, 0, 1, 0]);
        let area = partial_roc_area(&x, 0.25).unwrap();
        assert!((area - 0.5 * 0.25 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn aggregate_examples() {
        let g = |m: &str, s: &str, scores: &[f64], labels: &[u8]| ScoreGroup {
            machine: m.into(),
            section: s.into(),
            domain: "source".into(),
            items: items(scores, labels),
        };
        let one = aggregate(&[g("fan", "00", &[1.0, 2.0, 3.0, 4.0], &[0, 1, 0, 1])], 0.1).unwrap();
        assert_eq!(one.average_over_rows.auc, one.rows[0].auc);
        assert_eq!(one.average_over_machines.pauc, one.rows[0].pauc);

        let rows = vec![
            EvalRow {
                machine: "a".into(),
                section: "00".into(),
                domain: "source".into(),
                auc: 0.6,
                pauc: 0.5,
                n_normal: 1,
                n_anomaly: 1,
            },
            EvalRow {
                machine: "b".into(),
                section: "00".into(),
                domain: "source".into(),
                auc: 0.8,
                pauc: 0.5,
                n_normal: 1,
                n_anomaly: 1,
            },
        ];
        let r = EvalReport::from_rows(rows, 0.1);
        assert!((r.average_over_rows.auc - 0.7).abs() < 1e-12);

        let empty = ScoreGroup {
            machine: "x".into(),
            section: "00".into(),
            domain: "source".into(),
            items: vec![],
        };
        assert!(matches!(
            aggregate(&[empty], 0.1),
            Err(Error::EmptyGroup(_))
        ));
        assert!(aggregate(&[], 0.1).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![EvalRow {
            machine: "valve".into(),
            section: "02".into(),
            domain: "target".into(),
            auc: 0.9,
            pauc: 0.7,
            n_normal: 50,
            n_anomaly: 50,
        }];
        let mut buf = Vec::new();
        EvalReport::from_rows(rows, 0.1)
            .write_csv(&mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "machine,section,domain,auc,pauc,n_normal,n_anomaly"
        );
        assert_eq!(lines[1], "valve,02,target,0.9,0.7,50,50");
        assert_eq!(lines[2], "valve,all,all,0.9,0.7,50,50");
        assert!(lines[3].starts_with("average_over_rows,all,all,0.9,0.7"));
        assert!(lines[4].starts_with("average_over_machines,all,all,0.9,0.7"));
    }

    fn scored_set() -> impl Strategy<Value = Vec<LabeledScore>> {
        proptest::collection::vec((-5i32..5, any::<bool>()), 2..200).prop_map(|v| {
            let mut out: Vec<LabeledScore> = v
                .into_iter()
                .map(|(s, l)| LabeledScore::new(s as f64 * 0.5, l))
                .collect();
            out[0].anomalous = true;
            out[1].anomalous = false;
            out
        })
    }

    proptest! {
        #[test]
        fn auc_equals_pair_counting(set in scored_set()) {
            prop_assert_eq!(auc(&set).unwrap(), brute_auc(&set));
            let trapezoid = partial_roc_area(&set, 1.0).unwrap();
            prop_assert!((trapezoid - auc(&set).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn rank_invariance(set in scored_set(), p in 0.01f64..1.0) {
            let moved: Vec<LabeledScore> = set.iter().map(|i| LabeledScore::new((i.score * 0.3).exp() + 7.0, i.anomalous)).collect();
            prop_assert!((auc(&set).unwrap() - auc(&moved).unwrap()).abs() < 1e-12);
            prop_assert!((pauc(&set, p).unwrap() - pauc(&moved, p).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn negation_complements(set in scored_set()) {
            let neg: Vec<LabeledScore> = set.iter().map(|i| LabeledScore::new(-i.score, i.anomalous)).collect();
            prop_assert!((auc(&neg).unwrap() - (1.0 - auc(&set).unwrap())).abs() < 1e-12);
        }
    }
}
