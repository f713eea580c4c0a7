//! Experiment harness: synthetic corpus, dataset ingestion, k-fold
//! cross-validation, noise and scale-range sweeps, invariance tables.

pub mod cv;
pub mod dataset;
pub mod invariance;
pub mod synth;

pub use cv::{
    cross_validate, cross_validate_features, derive_seed, extract_dataset_features, noise_sweep, rmax_sweep,
    EvalReport, RmaxOutcome,
};
pub use dataset::{kfold_split, Dataset, ImageSource, Sample};
pub use invariance::{invariance_csv, invariance_report, InvarianceRow, Transform};
pub use synth::{
    synth_texture, synth_transformed, texture_suite, ClassSpec, CorpusSpec, Jitter, JitterRange, TextureSpec,
};

use std::sync::Arc;

use crate::error::Result;

/// Renders a corpus into an in-memory dataset; sample ids are
/// `<class>/<index>`.
pub fn corpus_dataset(spec: &CorpusSpec) -> Result<Dataset> {
    use rayon::prelude::*;
    let records = spec.records();
    let images = records.par_iter().map(|r| spec.render(r)).collect::<Result<Vec<_>>>()?;
    let samples = records
        .iter()
        .zip(images)
        .map(|(r, img)| Sample {
            id: format!("{}/{:03}", spec.classes[r.class].name, r.index),
            label: r.class,
            source: ImageSource::Memory(Arc::new(img)),
        })
        .collect();
    Dataset::new(samples, spec.classes.iter().map(|c| c.name.clone()).collect())
}
