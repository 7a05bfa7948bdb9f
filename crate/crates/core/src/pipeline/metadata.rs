use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EXPECTED_NAME: &str =
    "section_<NN>_<source|target>_<train|test>_<normal|anomaly>_<id>[_...].wav";

/// Machine type; the seven DCASE 2022 types are known by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MachineType {
    ToyCar,
    ToyTrain,
    Fan,
    Gearbox,
    Bearing,
    Slider,
    Valve,
    Other(String),
}

impl MachineType {
    pub const KNOWN: [MachineType; 7] = [
        MachineType::ToyCar,
        MachineType::ToyTrain,
        MachineType::Fan,
        MachineType::Gearbox,
        MachineType::Bearing,
        MachineType::Slider,
        MachineType::Valve,
    ];

    /// Tuned pooling weight for the known machine types.
    pub fn tuned_r(&self) -> Option<f64> {
        Some(match self {
            MachineType::ToyCar => 0.99,
            MachineType::ToyTrain => 0.81,
            MachineType::Fan => 1.00,
            MachineType::Gearbox => 0.99,
            MachineType::Bearing => 1.00,
            MachineType::Slider => 0.88,
            MachineType::Valve => 0.45,
            MachineType::Other(_) => return None,
        })
    }

    /// Directory name used by the dataset layout.
    pub fn as_str(&self) -> &str {
        match self {
            MachineType::ToyCar => "ToyCar",
            MachineType::ToyTrain => "ToyTrain",
            MachineType::Fan => "fan",
            MachineType::Gearbox => "gearbox",
            MachineType::Bearing => "bearing",
            MachineType::Slider => "slider",
            MachineType::Valve => "valve",
            MachineType::Other(name) => name,
        }
    }
}

impl FromStr for MachineType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Parameter("machine type must not be empty".into()));
        }
        Ok(Self::KNOWN
            .iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .cloned()
            .unwrap_or_else(|| MachineType::Other(s.to_owned())))
    }
}

impl fmt::Display for MachineType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! token_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Parameter(format!(
                        concat!("unknown ", stringify!($name), " {:?}"), other
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

token_enum!(Domain { Source => "source", Target => "target" });
token_enum!(Split { Train => "train", Test => "test" });
token_enum!(Label { Normal => "normal", Anomaly => "anomaly", Unknown => "unknown" });

/// Fields encoded in a dataset file name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClipName {
    pub section: u8,
    pub domain: Domain,
    pub split: Split,
    pub label: Label,
    pub clip_id: String,
}

/// Parses `section_<NN>_<domain>_<split>_<label>_<id>*.wav`.
///
/// Test files may omit the label token; they parse with [`Label::Unknown`].
pub fn parse_filename(name: &str) -> Result<ClipName> {
    let fail = || Error::FileName {
        name: name.to_owned(),
        expected: EXPECTED_NAME,
    };
    let stem = name
        .strip_suffix(".wav")
        .or_else(|| name.strip_suffix(".WAV"))
        .ok_or_else(fail)?;
    let tokens: Vec<&str> = stem.split('_').collect();
    if tokens.len() < 5 || tokens[0] != "section" {
        return Err(fail());
    }
    let nn = tokens[1];
    if nn.len() != 2 || !nn.bytes().all(|b| b.is_ascii_digit()) {
        return Err(fail());
    }
    let section: u8 = nn.parse().map_err(|_| fail())?;
    let domain: Domain = tokens[2].parse().map_err(|_| fail())?;
    let split: Split = tokens[3].parse().map_err(|_| fail())?;
    let (label, id) = match tokens[4] {
        "normal" => (Label::Normal, tokens.get(5)),
        "anomaly" => (Label::Anomaly, tokens.get(5)),
        _ if split == Split::Test => (Label::Unknown, tokens.get(4)),
        _ => return Err(fail()),
    };
    let clip_id = id.filter(|s| !s.is_empty()).ok_or_else(fail)?;
    if split == Split::Train && label != Label::Normal {
        return Err(Error::FileName {
            name: name.to_owned(),
            expected: "training clips labeled normal",
        });
    }
    Ok(ClipName {
        section,
        domain,
        split,
        label,
        clip_id: (*clip_id).to_owned(),
    })
}

/// Everything known about one clip besides its audio.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClipMetadata {
    pub machine: MachineType,
    pub section: u8,
    pub domain: Domain,
    pub split: Split,
    pub label: Label,
    pub clip_id: String,
    pub file_name: String,
}

impl ClipMetadata {
    pub fn parse(machine: MachineType, file_name: &str) -> Result<Self> {
        let n = parse_filename(file_name)?;
        Ok(Self {
            machine,
            section: n.section,
            domain: n.domain,
            split: n.split,
            label: n.label,
            clip_id: n.clip_id,
            file_name: file_name.to_owned(),
        })
    }

    pub fn section_tag(&self) -> String {
        format!("{:02}", self.section)
    }
}
