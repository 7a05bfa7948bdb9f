use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use twfr_gmm::eval::{aggregate, DEFAULT_MAX_FPR};
use twfr_gmm::pipeline::{
    default_grid, export_distances, featurize, grid_search_r, group_scores, load_split_map,
    rank_clip, read_scores, score_featured, sort_records, train_machine, write_scores, Bundle,
    LoadedSplit, MachineType, PipelineConfig, ScoreRecord, Split,
};

#[derive(Parser)]
#[command(
    name = "twfr-gmm",
    version,
    about = "Anomalous sound detection with TWFR features and GMMs"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; overrides the one in the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one bundle per machine into <out>/<machine>/.
    Fit {
        #[arg(long)]
        dataset_root: PathBuf,
        #[arg(long, required = true)]
        machine: Vec<MachineType>,
        /// Pooling weight for every machine given, instead of the configured one.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score clips with trained bundles and write a score CSV.
    Score {
        /// Directory written by `fit`.
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        dataset_root: PathBuf,
        #[arg(long, required = true)]
        machine: Vec<MachineType>,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute AUC and pAUC from a labeled score CSV.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        /// Maximum false positive rate for pAUC.
        #[arg(long, default_value_t = DEFAULT_MAX_FPR)]
        p: f64,
        /// Directory for report.csv and report.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-search the pooling weight on a labeled validation split.
    SearchR {
        #[arg(long)]
        dataset_root: PathBuf,
        #[arg(long)]
        machine: MachineType,
        /// Root whose test split is used for validation. Defaults to the dataset root.
        #[arg(long)]
        validation_root: Option<PathBuf>,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export pairwise metric distances of one section's clips and the mixture means.
    ExportDist {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        dataset_root: PathBuf,
        #[arg(long)]
        machine: MachineType,
        #[arg(long)]
        section: u8,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .with_context(|| format!("bad number {s:?} in grid"))
    };
    let values = if let Some((start, rest)) = text.split_once(':') {
        let Some((stop, step)) = rest.split_once(':') else {
            bail!("grid range must be start:stop:step, got {text:?}");
        };
        let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
        if step.is_nan() || step <= 0.0 || stop < start {
            bail!("grid range needs step > 0 and stop >= start, got {text:?}");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // Rounded so that 0:1:0.01 yields 0.07 rather than 0.07000000000000001.
        (0..=n)
            .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
            .collect()
    } else {
        text.split(',').map(parse).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        bail!("grid is empty");
    }
    Ok(values)
}

fn load_config(common: &Common) -> Result<(PipelineConfig, u64)> {
    let cfg = match &common.config {
        Some(path) => {
            PipelineConfig::load(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    let seed = common.seed.unwrap_or(cfg.seed);
    Ok((cfg, seed))
}

fn report_skipped<T>(machine: &MachineType, split: Split, loaded: &LoadedSplit<T>) {
    if loaded.warning_count() > 0 {
        eprintln!(
            "warning: {machine} {split}: {} file(s) skipped",
            loaded.warning_count()
        );
        for s in &loaded.skipped {
            eprintln!("  {}: {}", s.path.display(), s.error);
        }
    }
}

fn bundle_dir(root: &Path, machine: &MachineType) -> PathBuf {
    root.join(machine.as_str())
}

fn fit(
    common: &Common,
    dataset_root: &Path,
    machines: &[MachineType],
    r: Option<f64>,
    out: &Path,
) -> Result<()> {
    let (cfg, seed) = load_config(common)?;
    for machine in machines {
        let mut mcfg = cfg.machine(machine);
        if let Some(r) = r {
            mcfg = mcfg.with_r(r);
        }
        mcfg.validate()?;
        let train = load_split_map(dataset_root, machine, Split::Train, |c| {
            featurize(&c, &mcfg)
        })?;
        report_skipped(machine, Split::Train, &train);
        info!(
            "{machine}: training on {} clips with r = {}",
            train.clips.len(),
            mcfg.r
        );
        let models = train_machine(&train.clips, &mcfg, seed)?;
        let n_sections = models.len();
        let dir = bundle_dir(out, machine);
        Bundle::new(machine.clone(), seed, mcfg, models)?.save(&dir)?;
        println!("{machine}: {n_sections} section(s) -> {}", dir.display());
    }
    Ok(())
}

fn score(
    bundle: &Path,
    dataset_root: &Path,
    machines: &[MachineType],
    split: Split,
    out: &Path,
) -> Result<()> {
    let mut records = Vec::new();
    for machine in machines {
        let dir = bundle_dir(bundle, machine);
        let b = Bundle::load(&dir).with_context(|| format!("loading bundle {}", dir.display()))?;
        let clips = load_split_map(dataset_root, machine, split, |c| featurize(&c, &b.config))?;
        report_skipped(machine, split, &clips);
        let scored = score_featured(&b.sections, &clips.clips, &b.config)?;
        records.extend(scored.iter().map(|(meta, s)| ScoreRecord::new(meta, *s)));
    }
    sort_records(&mut records);
    let w =
        BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    write_scores(w, &records)?;
    println!("{} score(s) -> {}", records.len(), out.display());
    Ok(())
}

fn eval(scores: &Path, p: f64, out: &Path) -> Result<()> {
    let file = File::open(scores).with_context(|| format!("opening {}", scores.display()))?;
    let records = read_scores(std::io::BufReader::new(file))?;
    let report = aggregate(&group_scores(&records)?, p)?;
    std::fs::create_dir_all(out)?;
    report.write_csv(BufWriter::new(File::create(out.join("report.csv"))?))?;
    report.write_json(BufWriter::new(File::create(out.join("report.json"))?))?;
    for m in &report.machines {
        println!(
            "{:<10} AUC {:6.2}  pAUC {:6.2}",
            m.machine,
            m.auc * 100.0,
            m.pauc * 100.0
        );
    }
    let avg = report.average_over_machines;
    println!(
        "{:<10} AUC {:6.2}  pAUC {:6.2}",
        "average",
        avg.auc * 100.0,
        avg.pauc * 100.0
    );
    Ok(())
}

fn search_r(
    common: &Common,
    dataset_root: &Path,
    machine: &MachineType,
    validation_root: Option<&Path>,
    grid: Option<&str>,
    out: &Path,
) -> Result<()> {
    let (cfg, seed) = load_config(common)?;
    let grid = match grid {
        Some(g) => parse_grid(g)?,
        None => default_grid(),
    };
    let template = cfg.machine(machine);
    template.validate()?;
    let rank = |root: &Path, split| -> Result<_> {
        let loaded = load_split_map(root, machine, split, |c| {
            rank_clip(&c, &template.spectrogram)
        })?;
        report_skipped(machine, split, &loaded);
        Ok(loaded.clips)
    };
    let train = rank(dataset_root, Split::Train)?;
    let validation = rank(validation_root.unwrap_or(dataset_root), Split::Test)?;
    let result = grid_search_r(&train, &validation, &grid, &template, seed)?;
    result.write_csv(BufWriter::new(File::create(out)?))?;
    let best = result
        .table
        .iter()
        .find(|row| row.r == result.best_r)
        .map_or(f64::NAN, |row| row.mean_auc);
    println!("{machine}: best r = {} (mean AUC {best:.4})", result.best_r);
    Ok(())
}

fn export_dist(
    bundle: &Path,
    dataset_root: &Path,
    machine: &MachineType,
    section: u8,
    split: Split,
    out: &Path,
) -> Result<()> {
    let dir = bundle_dir(bundle, machine);
    let b = Bundle::load(&dir).with_context(|| format!("loading bundle {}", dir.display()))?;
    let model = &b
        .section(section)
        .with_context(|| format!("bundle {} has no section {section:02}", dir.display()))?
        .model;
    let clips = load_split_map(dataset_root, machine, split, |c| featurize(&c, &b.config))?;
    report_skipped(machine, split, &clips);
    let features: Vec<_> = clips
        .clips
        .into_iter()
        .filter(|c| c.meta.section == section)
        .map(|c| (c.twfr, c.meta))
        .collect();
    if features.is_empty() {
        bail!("no {split} clips for {machine} section {section:02}");
    }
    let export = export_distances(model, &features)?;
    export.save(out)?;
    println!(
        "{} x {} distance matrix -> {}",
        export.matrix.rows(),
        export.matrix.cols(),
        out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Fit {
            dataset_root,
            machine,
            r,
            out,
        } => fit(&cli.common, dataset_root, machine, *r, out),
        Command::Score {
            bundle,
            dataset_root,
            machine,
            split,
            out,
        } => score(bundle, dataset_root, machine, *split, out),
        Command::Eval { scores, p, out } => eval(scores, *p, out),
        Command::SearchR {
            dataset_root,
            machine,
            validation_root,
            grid,
            out,
        } => search_r(
            &cli.common,
            dataset_root,
            machine,
            validation_root.as_deref(),
            grid.as_deref(),
            out,
        ),
        Command::ExportDist {
            bundle,
            dataset_root,
            machine,
            section,
            split,
            out,
        } => export_dist(bundle, dataset_root, machine, *section, *split, out),
    }
}
