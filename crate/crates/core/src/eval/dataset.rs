//! Labelled image collections and stratified fold assignment.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::pgm::read_pgm_file;

#[derive(Debug, Clone)]
pub enum ImageSource {
    File(PathBuf),
    Memory(Arc<Image<f64>>),
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub label: usize,
    pub source: ImageSource,
}

impl Sample {
    pub fn load(&self) -> Result<Image<f64>> {
        match &self.source {
            ImageSource::File(p) => read_pgm_file(p),
            ImageSource::Memory(img) => Ok(img.as_ref().clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<Sample>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Needs at least two classes; every label must index `class_names`.
    pub fn new(samples: Vec<Sample>, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::Dataset(format!(
                "need at least 2 classes, got {}",
                class_names.len()
            )));
        }
        if let Some(s) = samples.iter().find(|s| s.label >= class_names.len()) {
            return Err(Error::Dataset(format!(
                "sample {} has label {} but only {} classes exist",
                s.id,
                s.label,
                class_names.len()
            )));
        }
        Ok(Dataset { samples, class_names })
    }

    /// `root/<class>/*.pgm`; classes and files are taken in sorted order.
    pub fn from_dir(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        let mut class_dirs: Vec<PathBuf> = read_dir_sorted(root)?.into_iter().filter(|p| p.is_dir()).collect();
        class_dirs.retain(|p| !file_name(p).starts_with('.'));
        let mut samples = Vec::new();
        let mut class_names = Vec::new();
        for dir in class_dirs {
            let files: Vec<PathBuf> = read_dir_sorted(&dir)?
                .into_iter()
                .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
                .collect();
            if files.is_empty() {
                continue;
            }
            let label = class_names.len();
            let class = file_name(&dir);
            for f in files {
                samples.push(Sample {
                    id: format!("{class}/{}", file_name(&f)),
                    label,
                    source: ImageSource::File(f),
                });
            }
            class_names.push(class);
        }
        if class_names.is_empty() {
            return Err(Error::Dataset(format!(
                "{} holds no class directories with .pgm files",
                root.display()
            )));
        }
        Dataset::new(samples, class_names)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
    let mut paths = entries
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
    paths.sort();
    Ok(paths)
}

/// Stratified fold index per sample. Each class is shuffled, then dealt
/// round-robin starting where the previous class stopped, so per-fold class
/// counts differ by at most one and fold sizes stay balanced.
pub fn kfold_split(labels: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    if let Some((c, members)) = by_class.iter().enumerate().find(|(_, m)| !m.is_empty() && m.len() < k) {
        return Err(Error::InsufficientSamples(format!(
            "class {c} has {} samples, fewer than k = {k}",
            members.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(folds)
}
