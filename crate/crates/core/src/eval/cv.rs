//! k-fold cross-validation and the noise and scale-range sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{kfold_split, Dataset};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::pipeline::{extract_features, FittedPipeline, NoiseSpec, PipelineConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Free-form tag such as `clean`, `snr=30` or `r_max=5`.
    pub condition: String,
    /// Fractions in `[0, 1]`, in fold order.
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold accuracies.
    pub std: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub class_names: Vec<String>,
    pub config: PipelineConfig,
}

impl EvalReport {
    /// Plain-text summary: accuracy line, per-fold line, confusion matrix.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{}: mean accuracy {:.2}% (std {:.2})\nfolds:",
            self.condition,
            100.0 * self.mean,
            100.0 * self.std
        );
        for a in &self.fold_accuracies {
            s.push_str(&format!(" {:.1}", 100.0 * a));
        }
        s.push('\n');
        let width = self.class_names.iter().map(String::len).max().unwrap_or(0).max(5);
        s.push_str(&format!("{:width$}", ""));
        for name in &self.class_names {
            s.push_str(&format!(" {name:>width$}"));
        }
        s.push('\n');
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            s.push_str(&format!("{name:width$}"));
            for v in row {
                s.push_str(&format!(" {v:>width$}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Deterministic 64-bit mix of a base seed and two indices.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Feature rows for every sample, in dataset order. `noise` is
/// `(snr_db, stream)`; each sample gets its own seed from the stream.
pub fn extract_dataset_features(
    ds: &Dataset,
    config: &PipelineConfig,
    noise: Option<(f64, u64)>,
) -> Result<Vec<Vec<f64>>> {
    ds.samples()
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let img = s.load()?;
            let spec = noise.map(|(snr_db, stream)| NoiseSpec {
                snr_db,
                seed: derive_seed(config.seed, stream, i as u64),
            });
            extract_features(&img, config, spec).map_err(|e| match e {
                Error::Io { .. } => e,
                other => Error::Dataset(format!("{}: {other}", s.id)),
            })
        })
        .collect()
}

/// CV over precomputed features. PCA and NSC of each fold are fit on that
/// fold's training rows only.
pub fn cross_validate_features(
    train_rows: &[Vec<f64>],
    test_rows: &[Vec<f64>],
    labels: &[usize],
    class_names: &[String],
    config: &PipelineConfig,
    condition: &str,
) -> Result<EvalReport> {
    if train_rows.len() != labels.len() || test_rows.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} train rows, {} test rows, {} labels",
            train_rows.len(),
            test_rows.len(),
            labels.len()
        )));
    }
    let classes = class_names.len();
    if labels.iter().any(|&l| l >= classes) {
        return Err(Error::Dataset("label outside class list".into()));
    }
    let folds = kfold_split(labels, config.folds, config.seed)?;
    let outcomes = (0..config.folds)
        .into_par_iter()
        .map(|f| {
            let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| folds[i] != f);
            let rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| train_rows[i].clone()).collect();
            let train = FeatureMatrix::from_rows(&rows)?.with_labels(train_idx.iter().map(|&i| labels[i]).collect())?;
            let fitted = FittedPipeline::fit(&train, config)?;
            test_idx
                .iter()
                .map(|&i| fitted.predict(&test_rows[i]).map(|p| (labels[i], p)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut fold_accuracies = Vec::with_capacity(outcomes.len());
    for pairs in &outcomes {
        let correct = pairs.iter().filter(|(t, p)| t == p).count();
        fold_accuracies.push(correct as f64 / pairs.len() as f64);
        for &(t, p) in pairs {
            confusion[t][p] += 1;
        }
    }
    let k = fold_accuracies.len() as f64;
    let mean = fold_accuracies.iter().sum::<f64>() / k;
    let std = (fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / k).sqrt();
    Ok(EvalReport {
        condition: condition.to_string(),
        fold_accuracies,
        mean,
        std,
        confusion,
        class_names: class_names.to_vec(),
        config: config.clone(),
    })
}

/// normalize → FWLBP → sqrt → PCA → NSC, k-fold.
pub fn cross_validate(ds: &Dataset, config: &PipelineConfig) -> Result<EvalReport> {
    config.validate()?;
    let features = extract_dataset_features(ds, config, None)?;
    cross_validate_features(&features, &features, &ds.labels(), ds.class_names(), config, "clean")
}

/// One report per SNR level. Test images are corrupted; training images stay
/// clean unless `config.noisy_train` is set. Folds are identical across
/// levels.
pub fn noise_sweep(ds: &Dataset, snr_levels: &[f64], config: &PipelineConfig) -> Result<Vec<EvalReport>> {
    config.validate()?;
    let labels = ds.labels();
    let clean = if config.noisy_train {
        None
    } else {
        Some(extract_dataset_features(ds, config, None)?)
    };
    snr_levels
        .iter()
        .enumerate()
        .map(|(level, &snr)| {
            let noisy = extract_dataset_features(ds, config, Some((snr, level as u64)))?;
            let train = clean.as_ref().unwrap_or(&noisy);
            cross_validate_features(train, &noisy, &labels, ds.class_names(), config, &format!("snr={snr}"))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmaxOutcome {
    pub r_max: usize,
    pub report: Option<EvalReport>,
    /// Set when this scale range cannot be evaluated.
    pub error: Option<String>,
}

/// One full CV per `r_max`, with `r_min` from the config.
pub fn rmax_sweep(ds: &Dataset, rmax_values: &[usize], config: &PipelineConfig) -> Result<Vec<RmaxOutcome>> {
    let mut out = Vec::with_capacity(rmax_values.len());
    for &r_max in rmax_values {
        let cfg = PipelineConfig {
            r_max,
            ..config.clone()
        };
        let result = cfg.validate().and_then(|_| {
            let features = extract_dataset_features(ds, &cfg, None)?;
            cross_validate_features(
                &features,
                &features,
                &ds.labels(),
                ds.class_names(),
                &cfg,
                &format!("r_max={r_max}"),
            )
        });
        match result {
            Ok(report) => out.push(RmaxOutcome {
                r_max,
                report: Some(report),
                error: None,
            }),
            Err(e @ (Error::InvalidParameter(_) | Error::InsufficientLayers(_))) => {
                log::warn!("r_max = {r_max}: {e}");
                out.push(RmaxOutcome {
                    r_max,
                    report: None,
                    error: Some(e.to_string()),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
