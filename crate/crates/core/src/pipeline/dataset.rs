use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::metadata::{ClipMetadata, MachineType, Split};
use crate::dsp::{load_wav, AudioClip};
use crate::error::{Error, Result};

/// A clip with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub audio: AudioClip,
    pub meta: ClipMetadata,
}

/// A file that was skipped while loading a split.
#[derive(Debug)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub error: Error,
}

/// Result of [`load_split`]: items in lexicographic file order plus skipped files.
#[derive(Debug)]
pub struct LoadedSplit<T = Clip> {
    pub clips: Vec<T>,
    pub skipped: Vec<SkippedFile>,
}

impl<T> LoadedSplit<T> {
    pub fn warning_count(&self) -> usize {
        self.skipped.len()
    }
}

/// `<root>/<machine>/<split>`.
pub fn split_dir(root: &Path, machine: &MachineType, split: Split) -> PathBuf {
    root.join(machine.as_str()).join(split.as_str())
}

/// Sorted `*.wav` files of a directory.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingDirectory(dir.to_owned()));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::ZeroFiles(dir.to_owned()));
    }
    Ok(files)
}

fn load_one(path: &Path, machine: &MachineType) -> Result<Clip> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::FileName {
            name: path.display().to_string(),
            expected: "a UTF-8 file name",
        })?;
    let meta = ClipMetadata::parse(machine.clone(), name)?;
    let audio = load_wav(path)?;
    Ok(Clip { audio, meta })
}

/// Loads every WAV file of `<root>/<machine>/<split>`.
///
/// Files that fail to parse or decode are collected in
/// [`LoadedSplit::skipped`] and logged; the rest still load.
pub fn load_split(root: &Path, machine: &MachineType, split: Split) -> Result<LoadedSplit> {
    load_split_map(root, machine, split, Ok)
}

/// Like [`load_split`], but passes each decoded clip through `map` right
/// away so that only the mapped values are kept in memory.
///
/// Errors from `map` are not skipped; the first one is returned.
pub fn load_split_map<T, F>(
    root: &Path,
    machine: &MachineType,
    split: Split,
    map: F,
) -> Result<LoadedSplit<T>>
where
    T: Send,
    F: Fn(Clip) -> Result<T> + Sync,
{
    let files = list_wavs(&split_dir(root, machine, split))?;
    let results: Vec<(PathBuf, Result<Result<T>>)> = files
        .into_par_iter()
        .map(|p| {
            let loaded = load_one(&p, machine).and_then(|c| {
                if c.meta.split == split {
                    Ok(c)
                } else {
                    Err(Error::FileName {
                        name: c.meta.file_name,
                        expected: "a clip of the directory's split",
                    })
                }
            });
            // Outer error: skip the file. Inner error: abort.
            let mapped = loaded.map(&map);
            (p, mapped)
        })
        .collect();
    let mut clips = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for (path, result) in results {
        match result {
            Ok(mapped) => clips.push(mapped?),
            Err(error) => {
                log::warn!("skipping {}: {error}", path.display());
                skipped.push(SkippedFile { path, error });
            }
        }
    }
    Ok(LoadedSplit { clips, skipped })
}
