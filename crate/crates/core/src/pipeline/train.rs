use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{section_seed, smote_seed, MachineConfig};
use super::dataset::Clip;
use super::metadata::{ClipMetadata, Domain, MachineType};
use crate::dsp::{log_mel, SpectrogramConfig};
use crate::error::{Error, Result};
use crate::gmm::{fit_gmm, AnomalyScore, GmmModel};
use crate::smote::{smote_oversample, SmoteOptions};
use crate::twfr::{PoolingVector, RankedSpectrogram};

/// A clip reduced to its band-sorted log-Mel spectrogram.
#[derive(Debug, Clone)]
pub struct RankedClip {
    pub meta: ClipMetadata,
    pub ranked: RankedSpectrogram,
}

impl RankedClip {
    pub fn twfr(&self, r: f64) -> Result<Vec<f64>> {
        Ok(self.ranked.twfr(r)?.into_vec())
    }
}

/// Log-Mel spectrogram of one clip with its bands sorted.
pub fn rank_clip(clip: &Clip, cfg: &SpectrogramConfig) -> Result<RankedClip> {
    let spec = log_mel(&clip.audio, cfg).map_err(|e| match e {
        Error::ClipTooShort { .. } => Error::Parameter(format!("{}: {e}", clip.meta.file_name)),
        other => other,
    })?;
    Ok(RankedClip {
        meta: clip.meta.clone(),
        ranked: RankedSpectrogram::new(&spec),
    })
}

/// [`rank_clip`] over many clips, in parallel.
pub fn rank_clips(clips: &[Clip], cfg: &SpectrogramConfig) -> Result<Vec<RankedClip>> {
    clips.par_iter().map(|c| rank_clip(c, cfg)).collect()
}

/// A clip reduced to its TWFR vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturedClip {
    pub meta: ClipMetadata,
    pub twfr: Vec<f64>,
}

/// TWFR vector of one clip at the configured `r`.
pub fn featurize(clip: &Clip, cfg: &MachineConfig) -> Result<FeaturedClip> {
    Ok(FeaturedClip {
        twfr: rank_clip(clip, &cfg.spectrogram)?.twfr(cfg.r)?,
        meta: clip.meta.clone(),
    })
}

/// TWFR vectors of ranked clips for one `r`, sharing pooling weights between
/// clips of equal length.
pub fn twfr_vectors<C: Borrow<RankedClip> + Sync>(clips: &[C], r: f64) -> Result<Vec<Vec<f64>>> {
    let mut pools: HashMap<usize, PoolingVector> = HashMap::new();
    for c in clips {
        let n = c.borrow().ranked.n_frames();
        if let std::collections::hash_map::Entry::Vacant(e) = pools.entry(n) {
            e.insert(PoolingVector::new(r, n)?);
        }
    }
    clips
        .par_iter()
        .map(|c| {
            let ranked = &c.borrow().ranked;
            Ok(ranked.pool(&pools[&ranked.n_frames()])?.into_vec())
        })
        .collect()
}

/// Provenance of one trained section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionInfo {
    pub seed: u64,
    pub r: f64,
    pub k: usize,
    pub n_source: usize,
    pub n_target: usize,
    pub n_synthetic: usize,
}

/// The mixture trained for one (machine, section).
#[derive(Debug, Clone, PartialEq)]
pub struct SectionModel {
    pub machine: MachineType,
    pub section: u8,
    pub model: GmmModel,
    pub info: SectionInfo,
}

/// Fits one section from precomputed TWFR vectors tagged with their domain.
///
/// When SMOTE is enabled, target-domain vectors are oversampled before the
/// fit. Source vectors always precede target vectors in the training set.
pub fn train_from_vectors(
    machine: &MachineType,
    section: u8,
    vectors: &[(Vec<f64>, Domain)],
    cfg: &MachineConfig,
    seed: u64,
) -> Result<SectionModel> {
    let source: Vec<Vec<f64>> = vectors
        .iter()
        .filter(|v| v.1 == Domain::Source)
        .map(|v| v.0.clone())
        .collect();
    let target: Vec<Vec<f64>> = vectors
        .iter()
        .filter(|v| v.1 == Domain::Target)
        .map(|v| v.0.clone())
        .collect();
    let (n_source, n_target) = (source.len(), target.len());

    let target = match cfg.smote_enabled() {
        Some(s) if n_target >= 2 => {
            let target_count = s.target_count.unwrap_or(n_source.max(n_target));
            smote_oversample(
                &target,
                &SmoteOptions {
                    k_neighbors: s.k_neighbors,
                    target_count,
                    seed: smote_seed(seed),
                },
            )?
        }
        Some(_) if n_target > 0 => {
            log::warn!("{machine} section {section:02}: one target clip, SMOTE skipped");
            target
        }
        _ => target,
    };
    let n_synthetic = target.len() - n_target;
    let mut features = source;
    features.extend(target);
    let model = fit_gmm(&features, &cfg.gmm.fit_options(cfg.k, seed))?;
    Ok(SectionModel {
        machine: machine.clone(),
        section,
        model,
        info: SectionInfo {
            seed,
            r: cfg.r,
            k: cfg.k,
            n_source,
            n_target,
            n_synthetic,
        },
    })
}

fn single_section(clips: &[Clip]) -> Result<(MachineType, u8)> {
    let first = clips
        .first()
        .ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    let key = (first.meta.machine.clone(), first.meta.section);
    if let Some(other) = clips
        .iter()
        .find(|c| (c.meta.machine.clone(), c.meta.section) != key)
    {
        return Err(Error::Parameter(format!(
            "clips from more than one section: {} and {}",
            first.meta.file_name, other.meta.file_name
        )));
    }
    Ok(key)
}

/// Trains the mixture of one section from its training clips.
pub fn train_section(clips: &[Clip], cfg: &MachineConfig, seed: u64) -> Result<SectionModel> {
    cfg.validate()?;
    let (machine, section) = single_section(clips)?;
    let ranked = rank_clips(clips, &cfg.spectrogram)?;
    let vectors = twfr_vectors(&ranked, cfg.r)?;
    let tagged: Vec<(Vec<f64>, Domain)> = vectors
        .into_iter()
        .zip(&ranked)
        .map(|(v, c)| (v, c.meta.domain))
        .collect();
    train_from_vectors(&machine, section, &tagged, cfg, seed)
}

/// Trains one model per section with seeds derived from `global_seed`.
///
/// Sections are independent and trained in parallel; the result is sorted
/// by section.
pub fn train_machine(
    clips: &[FeaturedClip],
    cfg: &MachineConfig,
    global_seed: u64,
) -> Result<Vec<SectionModel>> {
    cfg.validate()?;
    type Tagged = Vec<(Vec<f64>, Domain)>;
    let mut by_section: BTreeMap<(MachineType, u8), Tagged> = BTreeMap::new();
    for c in clips {
        by_section
            .entry((c.meta.machine.clone(), c.meta.section))
            .or_default()
            .push((c.twfr.clone(), c.meta.domain));
    }
    by_section
        .into_par_iter()
        .map(|((machine, section), vectors)| {
            let seed = section_seed(global_seed, &machine, section);
            train_from_vectors(&machine, section, &vectors, cfg, seed)
        })
        .collect()
}

/// Scores each clip against `model`, preserving input order.
pub fn score_clips(
    model: &GmmModel,
    clips: &[Clip],
    cfg: &MachineConfig,
) -> Result<Vec<(ClipMetadata, AnomalyScore)>> {
    if model.dim() != cfg.spectrogram.n_mels {
        return Err(Error::DimensionMismatch {
            expected: cfg.spectrogram.n_mels,
            actual: model.dim(),
        });
    }
    let rule = cfg.gmm.scoring_rule();
    clips
        .par_iter()
        .map(|clip| {
            let f = featurize(clip, cfg)?;
            Ok((f.meta, model.anomaly_score_with(&f.twfr, rule)?))
        })
        .collect()
}

/// Scores featured clips with the model of their own section.
pub fn score_featured(
    sections: &[SectionModel],
    clips: &[FeaturedClip],
    cfg: &MachineConfig,
) -> Result<Vec<(ClipMetadata, AnomalyScore)>> {
    let rule = cfg.gmm.scoring_rule();
    clips
        .par_iter()
        .map(|c| {
            let section = sections
                .iter()
                .find(|s| s.section == c.meta.section && s.machine == c.meta.machine)
                .ok_or_else(|| {
                    Error::Parameter(format!(
                        "no model for {} section {:02} ({})",
                        c.meta.machine, c.meta.section, c.meta.file_name
                    ))
                })?;
            Ok((
                c.meta.clone(),
                section.model.anomaly_score_with(&c.twfr, rule)?,
            ))
        })
        .collect()
}
