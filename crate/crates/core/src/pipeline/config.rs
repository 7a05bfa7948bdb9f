use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metadata::MachineType;
use crate::dsp::SpectrogramConfig;
use crate::error::{Error, Result};
use crate::gmm::{FitOptions, ScoringRule};

/// Pooling weight for machine types without a tuned value.
pub const FALLBACK_R: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteConfig {
    pub enabled: bool,
    pub k_neighbors: usize,
    /// Total target-domain vectors wanted per section. `None` balances the
    /// target domain up to the source-domain count.
    pub target_count: Option<usize>,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            k_neighbors: 5,
            target_count: None,
        }
    }
}

/// EM and scoring settings shared by every section of a machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmSettings {
    pub reg_covar: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub n_init: usize,
    /// Add `log pi_k` to each component's log-density before taking the max.
    pub include_component_weight: bool,
}

impl Default for GmmSettings {
    fn default() -> Self {
        let d = FitOptions::default();
        Self {
            reg_covar: d.reg_covar,
            tol: d.tol,
            max_iter: d.max_iter,
            n_init: d.n_init,
            include_component_weight: false,
        }
    }
}

impl GmmSettings {
    pub fn fit_options(&self, k: usize, seed: u64) -> FitOptions {
        FitOptions {
            k,
            reg_covar: self.reg_covar,
            tol: self.tol,
            max_iter: self.max_iter,
            n_init: self.n_init,
            seed,
        }
    }

    pub fn scoring_rule(&self) -> ScoringRule {
        ScoringRule::from_flag(self.include_component_weight)
    }
}

/// Fully resolved settings for one machine type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConfig {
    pub r: f64,
    pub k: usize,
    pub smote: Option<SmoteConfig>,
    pub spectrogram: SpectrogramConfig,
    pub gmm: GmmSettings,
}

impl MachineConfig {
    /// Tuned `r`, one component, SMOTE off, default front end.
    pub fn for_machine(machine: &MachineType) -> Self {
        Self {
            r: machine.tuned_r().unwrap_or(FALLBACK_R),
            k: 1,
            smote: None,
            spectrogram: SpectrogramConfig::default(),
            gmm: GmmSettings::default(),
        }
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::Config(format!(
                "r must be in [0, 1], got {}",
                self.r
            )));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if let Some(s) = &self.smote {
            if s.k_neighbors == 0 {
                return Err(Error::Config("smote.k_neighbors must be at least 1".into()));
            }
        }
        self.spectrogram.validate()?;
        self.gmm.fit_options(self.k, 0).validate()
    }

    pub fn smote_enabled(&self) -> Option<&SmoteConfig> {
        self.smote.as_ref().filter(|s| s.enabled)
    }
}

/// Per-machine overrides; anything left out falls back to the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineOverrides {
    pub r: Option<f64>,
    pub k: Option<usize>,
    pub smote: Option<SmoteConfig>,
    pub spectrogram: Option<SpectrogramConfig>,
}

/// Top-level configuration file.
///
/// ```toml
/// seed = 0
///
/// [spectrogram]
/// n_mels = 128
///
/// [gmm]
/// reg_covar = 1e-6
///
/// [machines.valve]
/// r = 0.45
/// k = 2
///
/// [machines.ToyCar.smote]
/// k_neighbors = 5
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub spectrogram: SpectrogramConfig,
    pub gmm: GmmSettings,
    pub machines: BTreeMap<String, MachineOverrides>,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.spectrogram.validate()?;
        for name in cfg.machines.keys() {
            cfg.machine(&name.parse()?).validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable in TOML")
    }

    fn overrides(&self, machine: &MachineType) -> Option<&MachineOverrides> {
        self.machines
            .iter()
            .find(|(name, _)| name.parse::<MachineType>().ok().as_ref() == Some(machine))
            .map(|(_, o)| o)
    }

    /// Resolved settings for `machine`.
    pub fn machine(&self, machine: &MachineType) -> MachineConfig {
        let mut cfg = MachineConfig::for_machine(machine);
        cfg.spectrogram = self.spectrogram.clone();
        cfg.gmm = self.gmm.clone();
        if let Some(o) = self.overrides(machine) {
            if let Some(r) = o.r {
                cfg.r = r;
            }
            if let Some(k) = o.k {
                cfg.k = k;
            }
            if let Some(s) = &o.smote {
                cfg.smote = Some(s.clone());
            }
            if let Some(s) = &o.spectrogram {
                cfg.spectrogram = s.clone();
            }
        }
        cfg
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Per-section seed derived from the global seed, the machine and the section.
pub fn section_seed(global: u64, machine: &MachineType, section: u8) -> u64 {
    let key = format!("{}/{section:02}", machine.as_str());
    splitmix64(global ^ fnv1a(key.as_bytes()))
}

/// Seed for the SMOTE stream of a section, distinct from its EM seed.
pub fn smote_seed(section_seed: u64) -> u64 {
    splitmix64(section_seed ^ 0x5a5a_5a5a_5a5a_5a5a)
}
