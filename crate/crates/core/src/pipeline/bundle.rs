use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::MachineConfig;
use super::metadata::MachineType;
use super::train::{SectionInfo, SectionModel};
use crate::error::{Error, Result};
use crate::gmm::{read_model, write_model, FORMAT_VERSION};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionEntry {
    pub section: u8,
    pub file: String,
    #[serde(flatten)]
    pub info: SectionInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub artifact_version: String,
    pub model_format_version: u32,
    pub machine: String,
    pub seed: u64,
    pub config: MachineConfig,
    pub sections: Vec<SectionEntry>,
}

/// All section models of one machine plus the settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub machine: MachineType,
    pub seed: u64,
    pub config: MachineConfig,
    pub sections: Vec<SectionModel>,
}

fn model_file(section: u8) -> String {
    format!("section_{section:02}.gmm")
}

impl Bundle {
    pub fn new(
        machine: MachineType,
        seed: u64,
        config: MachineConfig,
        mut sections: Vec<SectionModel>,
    ) -> Result<Self> {
        sections.sort_by_key(|s| s.section);
        if let Some(w) = sections.windows(2).find(|w| w[0].section == w[1].section) {
            return Err(Error::Parameter(format!(
                "two models for section {:02}",
                w[0].section
            )));
        }
        if let Some(s) = sections.iter().find(|s| s.machine != machine) {
            return Err(Error::Parameter(format!(
                "section {:02} belongs to {}, not {machine}",
                s.section, s.machine
            )));
        }
        Ok(Self {
            machine,
            seed,
            config,
            sections,
        })
    }

    pub fn section(&self, section: u8) -> Option<&SectionModel> {
        self.sections.iter().find(|s| s.section == section)
    }

    /// Writes `manifest.json` and one `section_NN.gmm` per section into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for s in &self.sections {
            let file = model_file(s.section);
            let echo = serde_json::json!({
                "machine": self.machine.as_str(),
                "section": s.section,
                "config": self.config,
                "info": s.info,
            });
            let mut w = BufWriter::new(File::create(dir.join(&file))?);
            write_model(&mut w, &s.model, echo)?;
            std::io::Write::flush(&mut w)?;
            entries.push(SectionEntry {
                section: s.section,
                file,
                info: s.info.clone(),
            });
        }
        let manifest = Manifest {
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            model_format_version: FORMAT_VERSION,
            machine: self.machine.to_string(),
            seed: self.seed,
            config: self.config.clone(),
            sections: entries,
        };
        let w = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
        serde_json::to_writer_pretty(w, &manifest)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(Error::MissingDirectory(dir.to_owned()));
        }
        let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(&path)?))?;
        if manifest.model_format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "bundle uses model format {}, expected {FORMAT_VERSION}",
                manifest.model_format_version
            )));
        }
        let machine: MachineType = manifest.machine.parse()?;
        let sections = manifest
            .sections
            .iter()
            .map(|e| {
                let (model, _) = read_model(BufReader::new(File::open(dir.join(&e.file))?))?;
                Ok(SectionModel {
                    machine: machine.clone(),
                    section: e.section,
                    model,
                    info: e.info.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(machine, manifest.seed, manifest.config, sections)
    }
}
