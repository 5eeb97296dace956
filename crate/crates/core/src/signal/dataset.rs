//! Labelled clip collections loaded from `<root>/<class>/*.wav`.

use std::path::Path;

use log::warn;

use super::preprocess::Preprocessor;
use super::wav::read_wav;
use super::{AudioClip, SignalError};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub clips: Vec<AudioClip>,
    /// Sorted; a clip's label index is its position here.
    pub class_names: Vec<String>,
    pub labels: Vec<usize>,
    pub warnings: Vec<String>,
    pub skipped: usize,
}

impl Dataset {
    /// Labels are taken from each clip's `label`, which must be one of `class_names`.
    pub fn from_clips(clips: Vec<AudioClip>, class_names: &[String]) -> Result<Self, SignalError> {
        let mut names = class_names.to_vec();
        names.sort();
        let labels = clips
            .iter()
            .map(|c| {
                let l = c.label.as_deref().unwrap_or("");
                names
                    .iter()
                    .position(|n| n == l)
                    .ok_or_else(|| SignalError::UnknownClass(l.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Dataset {
            clips,
            class_names: names,
            labels,
            warnings: Vec::new(),
            skipped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.class_names.len()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Clips at `indices` stacked into `[B × L]`.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor, TensorError> {
        let len = indices.first().map_or(0, |&i| self.clips[i].samples.len());
        let mut data = Vec::with_capacity(indices.len() * len);
        for &i in indices {
            let s = &self.clips[i].samples;
            if s.len() != len {
                return Err(TensorError::Shape {
                    op: "batch",
                    detail: format!("clip {i} has {} samples, expected {len}", s.len()),
                });
            }
            data.extend_from_slice(s);
        }
        Tensor::new(vec![indices.len(), len], data)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            clips: indices.iter().map(|&i| self.clips[i].clone()).collect(),
            class_names: self.class_names.clone(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            warnings: Vec::new(),
            skipped: 0,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SignalError + '_ {
    move |source| SignalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Every clip goes through `pre`. Undecodable or too-short files are
/// skipped with a warning; an empty class directory yields a warning.
pub fn load_dataset(
    root: impl AsRef<Path>,
    expected_classes: Option<&[String]>,
    pre: &Preprocessor,
) -> Result<Dataset, SignalError> {
    let root = root.as_ref();
    let mut dirs: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(root).map_err(io_err(root))? {
        let entry = entry.map_err(io_err(root))?;
        if entry.file_type().map_err(io_err(root))?.is_dir() {
            dirs.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    dirs.sort();
    let mut warnings = Vec::new();
    let class_names = match expected_classes {
        Some(expected) => {
            if let Some(d) = dirs.iter().find(|d| !expected.contains(d)) {
                return Err(SignalError::UnexpectedClassDir(d.clone()));
            }
            let mut names = expected.to_vec();
            names.sort();
            for n in names.iter().filter(|n| !dirs.contains(n)) {
                warnings.push(format!("class `{n}` has no directory"));
            }
            names
        }
        None => dirs.clone(),
    };
    if class_names.is_empty() {
        return Err(SignalError::NoClasses(root.to_path_buf()));
    }

    let mut clips = Vec::new();
    let mut labels = Vec::new();
    let mut skipped = 0;
    for (label, name) in class_names.iter().enumerate() {
        let dir = root.join(name);
        if !dir.is_dir() {
            continue;
        }
        let mut files: Vec<_> = std::fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            warnings.push(format!("class `{name}` has no .wav files"));
        }
        for path in files {
            match read_wav(&path).and_then(|c| pre.run(&c)) {
                Ok(n) => {
                    if n.silent {
                        warnings.push(format!("{}: silent clip", path.display()));
                    }
                    let mut clip = n.clip;
                    clip.label = Some(name.clone());
                    clips.push(clip);
                    labels.push(label);
                }
                Err(e) => {
                    warnings.push(format!("{}: skipped: {e}", path.display()));
                    skipped += 1;
                }
            }
        }
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(Dataset {
        clips,
        class_names,
        labels,
        warnings,
        skipped,
    })
}
