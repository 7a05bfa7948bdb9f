//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Set `TWFR_DCASE_ROOT` to a directory with the DCASE 2022 Task 2
//! development data (`<root>/<machine>/{train,test}`) to run the dataset check.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use twfr_gmm::dsp::LogMelSpectrogram;
use twfr_gmm::eval::{aggregate, auc, pauc, LabeledScore};
use twfr_gmm::gmm::{fit_gmm_traced, FitOptions, GmmModel};
use twfr_gmm::matrix::RowMatrix;
use twfr_gmm::pipeline::*;
use twfr_gmm::synth::{write_dataset, SyntheticLayout, SyntheticMachine};
use twfr_gmm::twfr::{gwrp, pooling_vector};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::*;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn timed(f: impl FnOnce() -> Outcome, limit: Option<Duration>) -> Outcome {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    match (out, limit) {
        (Pass(d), Some(l)) if took >= l => Fail(format!("{d}; took {took:.2?}, limit {l:?}")),
        (Pass(d), _) => Pass(format!("{d}; {took:.2?}")),
        (other, _) => other,
    }
}

fn identity(n: usize) -> RowMatrix {
    let mut m = RowMatrix::zeros(n, n);
    for i in 0..n {
        m.set(i, i, 1.0);
    }
    m
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn pooling_degeneracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = rng.random_range(1..=64);
        let n = rng.random_range(1..=512);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..n)
                    .map(|_| -100.0 + 100.0 * rng.random::<f64>())
                    .collect()
            })
            .collect();
        let spec = LogMelSpectrogram::from_rows(&rows).unwrap();
        let max = gwrp(&spec, 0.0).unwrap();
        let mean = gwrp(&spec, 1.0).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let want_max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let want_mean = row.iter().sum::<f64>() / n as f64;
            worst = worst
                .max((max.values()[i] - want_max).abs())
                .max((mean.values()[i] - want_mean).abs());
        }
    }
    let mut worst_sum: f64 = 0.0;
    for n in [1, 2, 7, 64, 311, 512] {
        for i in 0..=100 {
            let w = pooling_vector(f64::from(i) / 100.0, n).unwrap();
            worst_sum = worst_sum.max((w.weights().iter().sum::<f64>() - 1.0).abs());
        }
    }
    check(
        worst <= 1e-9 && worst_sum <= 1e-12,
        format!("max/mean error {worst:.1e}, weight-sum error {worst_sum:.1e}"),
    )
}

fn closed_form_scoring() -> Outcome {
    let model = GmmModel::new(vec![1.0], vec![vec![0.0, 0.0]], vec![identity(2)]).unwrap();
    let at_mean = model.anomaly_score(&[0.0, 0.0]).unwrap().value();
    let log_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut worst: f64 = 0.0;
    for i in 1..=10 {
        let t = f64::from(i) * 0.7;
        let angle = f64::from(i);
        let s = model
            .anomaly_score(&[t * angle.cos(), t * angle.sin()])
            .unwrap()
            .value();
        worst = worst.max((s - at_mean - t * t / 2.0).abs());
    }
    check(
        (at_mean - log_2pi).abs() <= 1e-9 && worst <= 1e-9,
        format!("score at mean {at_mean:.9}, growth error {worst:.1e}"),
    )
}

fn em_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let truth = [[0.0, 0.0], [8.0, 8.0]];
    let data: Vec<Vec<f64>> = (0..500)
        .map(|i| {
            let c = truth[i % 2];
            vec![c[0] + normal(&mut rng), c[1] + normal(&mut rng)]
        })
        .collect();
    let opts = FitOptions {
        k: 2,
        tol: 1e-8,
        seed: 3,
        ..FitOptions::default()
    };
    let out = fit_gmm_traced(&data, &opts).unwrap();
    let mut err: f64 = 0.0;
    for t in truth {
        let nearest = (0..2)
            .map(|k| {
                let m = out.model.mean(k);
                ((m[0] - t[0]).powi(2) + (m[1] - t[1]).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        err = err.max(nearest);
    }
    let decreases = |ll: &[f64]| ll.windows(2).filter(|w| w[1] < w[0]).count();
    let drops = decreases(&out.log_likelihood);

    // Overlapping components take many more iterations to settle.
    let overlap: Vec<Vec<f64>> = (0..500)
        .map(|i| {
            let c = if i % 2 == 0 { 0.0 } else { 1.5 };
            vec![c + normal(&mut rng), c + normal(&mut rng)]
        })
        .collect();
    let slow = fit_gmm_traced(
        &overlap,
        &FitOptions {
            tol: 1e-10,
            max_iter: 500,
            ..opts
        },
    )
    .unwrap();
    let slow_drops = decreases(&slow.log_likelihood);
    check(
        err < 0.5 && drops == 0 && slow_drops == 0,
        format!(
            "mean error {err:.3}, {} iterations, {drops} decreases; overlapping mixture {} iterations, {slow_drops} decreases",
            out.iterations, slow.iterations
        ),
    )
}

fn metric_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let models: Vec<GmmModel> = [1usize, 2, 5, 16]
        .iter()
        .map(|&d| {
            GmmModel::new(
                vec![0.5, 0.5],
                vec![vec![0.0; d], vec![1.0; d]],
                vec![identity(d), identity(d)],
            )
            .unwrap()
        })
        .collect();
    for i in 0..10_000 {
        let model = &models[i % models.len()];
        let d = model.dim();
        let a: Vec<f64> = (0..d).map(|_| 10.0 * normal(&mut rng)).collect();
        let b: Vec<f64> = (0..d).map(|_| 10.0 * normal(&mut rng)).collect();
        let e = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max((model.mahalanobis_metric(&a, &b).unwrap() - e).abs());
    }

    let d = 6;
    let mut cov = RowMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            cov.set(i, j, if i == j { 2.0 + i as f64 } else { 0.3 });
        }
    }
    let model = GmmModel::new(
        vec![0.3, 0.7],
        vec![vec![0.0; d], vec![2.0; d]],
        vec![cov, identity(d)],
    )
    .unwrap();
    let points: Vec<Vec<f64>> = (0..40)
        .map(|_| (0..d).map(|_| normal(&mut rng)).collect())
        .collect();
    let matrix = model.distance_matrix(&points).unwrap();
    let mut exact = true;
    for i in 0..points.len() {
        for j in 0..points.len() {
            let want = if i == j {
                0.0
            } else if i < j {
                model.mahalanobis_metric(&points[i], &points[j]).unwrap()
            } else {
                model.mahalanobis_metric(&points[j], &points[i]).unwrap()
            };
            exact &= matrix.get(i, j) == want;
        }
    }
    check(
        worst <= 1e-10 && exact,
        format!("euclidean error {worst:.1e}, matrix exact: {exact}"),
    )
}

fn brute_force_auc(items: &[LabeledScore]) -> f64 {
    let (mut wins, mut ties) = (0u64, 0u64);
    let pos = items.iter().filter(|x| x.anomalous).count() as u64;
    let neg = items.len() as u64 - pos;
    for a in items.iter().filter(|x| x.anomalous) {
        for b in items.iter().filter(|x| !x.anomalous) {
            if a.score > b.score {
                wins += 1;
            } else if a.score == b.score {
                ties += 1;
            }
        }
    }
    (wins as f64 + 0.5 * ties as f64) / (pos * neg) as f64
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut mismatches, mut pauc_mismatches) = (0, 0);
    let mut worst_rank: f64 = 0.0;
    for set in 0..200 {
        let n = rng.random_range(2..=200);
        let tied = set % 3 == 0;
        let mut items: Vec<LabeledScore> = (0..n)
            .map(|_| {
                let score = if tied {
                    f64::from(rng.random_range(0..8u8))
                } else {
                    normal(&mut rng)
                };
                LabeledScore::new(score, rng.random_bool(0.3))
            })
            .collect();
        items[0].anomalous = true;
        items[1].anomalous = false;
        let a = auc(&items).unwrap();
        if a != brute_force_auc(&items) {
            mismatches += 1;
        }
        if pauc(&items, 1.0).unwrap() != a {
            pauc_mismatches += 1;
        }
        let warped: Vec<LabeledScore> = items
            .iter()
            .map(|x| LabeledScore::new(x.score.powi(3) + 2.0 * x.score - 1.0, x.anomalous))
            .collect();
        worst_rank = worst_rank.max((auc(&warped).unwrap() - a).abs());
    }
    check(
        mismatches == 0 && pauc_mismatches == 0 && worst_rank <= 1e-12,
        format!("{mismatches} auc mismatches, {pauc_mismatches} pauc(1) mismatches, rank error {worst_rank:.1e}"),
    )
}

fn synthetic_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let validation = dir.path().join("validation");
    let machine = MachineType::Other("synthetic".into());
    let gen = SyntheticMachine::default();
    let layout = SyntheticLayout {
        sections: vec![0, 1],
        train_source: 100,
        train_target: 10,
        test_per_class: 20,
    };
    write_dataset(&data, &machine, &gen, &layout, 10).unwrap();
    let val_layout = SyntheticLayout {
        train_source: 0,
        train_target: 0,
        ..layout.clone()
    };
    write_dataset(&validation, &machine, &gen, &val_layout, 11).unwrap();

    let template = MachineConfig::for_machine(&machine);
    let seed = 42;
    let rank = |root: &Path, split| {
        load_split_map(root, &machine, split, |c| {
            rank_clip(&c, &template.spectrogram)
        })
        .unwrap()
        .clips
    };
    let train = rank(&data, Split::Train);
    let val = rank(&validation, Split::Test);
    let search = grid_search_r(&train, &val, &default_grid(), &template, seed).unwrap();

    let cfg = template.clone().with_r(search.best_r);
    let featured = |clips: &[RankedClip]| -> Vec<FeaturedClip> {
        clips
            .iter()
            .map(|c| FeaturedClip {
                meta: c.meta.clone(),
                twfr: c.twfr(cfg.r).unwrap(),
            })
            .collect()
    };
    let models = train_machine(&featured(&train), &cfg, seed).unwrap();
    let test = featured(&rank(&data, Split::Test));
    let records: Vec<ScoreRecord> = score_featured(&models, &test, &cfg)
        .unwrap()
        .iter()
        .map(|(m, s)| ScoreRecord::new(m, *s))
        .collect();
    let report = aggregate(&group_scores(&records).unwrap(), 0.1).unwrap();
    let worst = report
        .rows
        .iter()
        .map(|r| r.auc)
        .fold(f64::INFINITY, f64::min);
    let mean = report.average_over_rows.auc;
    check(
        mean >= 0.95 && search.best_r < 1.0,
        format!(
            "held-out AUC {mean:.4} (worst cell {worst:.4}), best r {:.2}",
            search.best_r
        ),
    )
}

fn dcase_dataset() -> Outcome {
    let Some(root) = std::env::var_os("TWFR_DCASE_ROOT") else {
        return Skip("TWFR_DCASE_ROOT not set".into());
    };
    let root = Path::new(&root);
    let mut groups = Vec::new();
    for machine in MachineType::KNOWN {
        let cfg = MachineConfig::for_machine(&machine);
        let load = |split| {
            let loaded = load_split_map(root, &machine, split, |c| featurize(&c, &cfg)).unwrap();
            if loaded.warning_count() > 0 {
                eprintln!(
                    "{machine} {split}: {} files skipped",
                    loaded.warning_count()
                );
            }
            loaded.clips
        };
        let models = train_machine(&load(Split::Train), &cfg, 0).unwrap();
        let records: Vec<ScoreRecord> = score_featured(&models, &load(Split::Test), &cfg)
            .unwrap()
            .iter()
            .map(|(m, s)| ScoreRecord::new(m, *s))
            .collect();
        groups.extend(group_scores(&records).unwrap());
    }
    let report = aggregate(&groups, 0.1).unwrap();
    let avg = report.average_over_machines;
    let valve = report
        .machines
        .iter()
        .find(|m| m.machine == MachineType::Valve.as_str())
        .map_or(0.0, |m| m.auc);
    check(
        (avg.auc * 100.0 - 78.59).abs() <= 2.0
            && (avg.pauc * 100.0 - 63.19).abs() <= 2.0
            && valve >= 0.90,
        format!(
            "average AUC {:.2}, pAUC {:.2}, valve AUC {:.2}",
            avg.auc * 100.0,
            avg.pauc * 100.0,
            valve * 100.0
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, Outcome)> = vec![
        (
            "pooling degeneracy",
            timed(pooling_degeneracy, Some(Duration::from_secs(5))),
        ),
        (
            "closed-form gaussian scoring",
            timed(closed_form_scoring, None),
        ),
        (
            "em correctness",
            timed(em_correctness, Some(Duration::from_secs(2))),
        ),
        ("metric reduction", timed(metric_reduction, None)),
        ("auc oracle", timed(auc_oracle, None)),
        (
            "synthetic end-to-end",
            timed(synthetic_end_to_end, Some(Duration::from_secs(60))),
        ),
        ("dcase development set", timed(dcase_dataset, None)),
    ];
    let mut failed = 0;
    for (name, outcome) in &criteria {
        match outcome {
            Pass(d) => println!("PASS  {name}: {d}"),
            Skip(d) => println!("SKIP  {name}: {d}"),
            Fail(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
