//! End-to-end configuration and the fit/predict path shared by the
//! evaluation harness and the command-line tool.

use serde::{Deserialize, Serialize};

use crate::classifier::{nsc_fit, nsc_residuals, NscModel, SubspaceDimPolicy};
use crate::error::{Error, Result};
use crate::features::{pca_fit, pca_transform, FeatureMatrix, PcaModel};
use crate::fractal::{FdConfig, RegressionMode};
use crate::fwlbp::{default_radii, extract_fwlbp, DescriptorConfig, LbpRadius};
use crate::image::{add_gaussian_noise, normalize_intensity, Image};
use crate::linalg::dot;

/// Where the square-root transform is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqrtPlacement {
    #[default]
    BeforePca,
    /// Signed square root of the PCA coordinates.
    AfterPca,
    None,
}

impl std::str::FromStr for SqrtPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "before_pca" | "before-pca" => Ok(SqrtPlacement::BeforePca),
            "after_pca" | "after-pca" => Ok(SqrtPlacement::AfterPca),
            "none" => Ok(SqrtPlacement::None),
            other => Err(Error::InvalidParameter(format!("unknown sqrt placement {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub r_min: usize,
    pub r_max: usize,
    pub radii: Vec<LbpRadius>,
    pub pca_k: usize,
    pub subspace: SubspaceDimPolicy,
    pub norm_mean: f64,
    pub norm_std: f64,
    pub seed: u64,
    pub regression: RegressionMode,
    pub sqrt: SqrtPlacement,
    pub folds: usize,
    /// Corrupt training images too in noise sweeps.
    pub noisy_train: bool,
    /// Add noise to the raw image instead of the normalized one.
    pub noise_before_normalize: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            r_min: 2,
            r_max: 7,
            radii: default_radii(),
            pca_k: 300,
            subspace: SubspaceDimPolicy::default(),
            norm_mean: 128.0,
            norm_std: 20.0,
            seed: 0,
            regression: RegressionMode::LogLog,
            sqrt: SqrtPlacement::BeforePca,
            folds: 10,
            noisy_train: false,
            noise_before_normalize: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_min < 2 {
            return Err(Error::InvalidParameter(format!(
                "r_min must be >= 2, got {}",
                self.r_min
            )));
        }
        if self.r_max <= self.r_min {
            return Err(Error::InvalidParameter(format!(
                "r_max ({}) must exceed r_min ({})",
                self.r_max, self.r_min
            )));
        }
        if self.pca_k == 0 {
            return Err(Error::InvalidParameter("pca_k must be >= 1".into()));
        }
        if self.radii.is_empty() {
            return Err(Error::InvalidParameter("at least one LBP radius is required".into()));
        }
        if !(self.norm_std > 0.0) || !self.norm_mean.is_finite() || !self.norm_std.is_finite() {
            return Err(Error::InvalidParameter(
                "normalization targets must be finite with std > 0".into(),
            ));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "folds must be >= 2, got {}",
                self.folds
            )));
        }
        Ok(())
    }

    pub fn descriptor(&self) -> DescriptorConfig {
        DescriptorConfig {
            radii: self.radii.clone(),
            fd: FdConfig {
                r_min: self.r_min,
                r_max: self.r_max,
                regression: self.regression,
            },
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.descriptor().dimension()
    }
}

/// Optional corruption applied during feature extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

/// Normalize, extract the FWLBP descriptor and apply the square root when it
/// precedes PCA.
pub fn extract_features(img: &Image<f64>, config: &PipelineConfig, noise: Option<NoiseSpec>) -> Result<Vec<f64>> {
    let prepared = match (noise, config.noise_before_normalize) {
        (Some(n), true) => {
            let noisy = add_gaussian_noise(img, n.snr_db, n.seed)?;
            normalize_intensity(&noisy, config.norm_mean, config.norm_std)?
        }
        (Some(n), false) => {
            let norm = normalize_intensity(img, config.norm_mean, config.norm_std)?;
            add_gaussian_noise(&norm, n.snr_db, n.seed)?
        }
        (None, _) => normalize_intensity(img, config.norm_mean, config.norm_std)?,
    };
    let mut descriptor = extract_fwlbp(&prepared, &config.descriptor())?.into_values();
    if config.sqrt == SqrtPlacement::BeforePca {
        // A bin can dip below zero when a rare code only lands on pixels
        // with a negative slope estimate; keep its sign.
        signed_sqrt(&mut descriptor);
    }
    Ok(descriptor)
}

fn signed_sqrt(z: &mut [f64]) {
    for v in z {
        *v = v.signum() * v.abs().sqrt();
    }
}

/// Trained PCA + NSC pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub pca: PcaModel<f64>,
    pub nsc: NscModel<f64>,
    pub sqrt: SqrtPlacement,
}

/// Number of PCA components actually used for `rows` training samples of
/// dimension `cols`.
pub fn effective_pca_k(requested: usize, rows: usize, cols: usize) -> usize {
    requested.min(rows.saturating_sub(1)).min(cols)
}

impl FittedPipeline {
    /// Fits PCA then NSC on labelled training features.
    pub fn fit(train: &FeatureMatrix<f64>, config: &PipelineConfig) -> Result<Self> {
        let labels = train
            .labels()
            .ok_or_else(|| Error::InvalidParameter("training features carry no labels".into()))?
            .to_vec();
        let k = effective_pca_k(config.pca_k, train.rows(), train.cols());
        if k < config.pca_k {
            log::debug!(
                "PCA k reduced from {} to {k} ({} training samples)",
                config.pca_k,
                train.rows()
            );
        }
        let pca = pca_fit(train, k)?;
        let projected = FeatureMatrix::from_rows(
            &(0..train.rows())
                .map(|i| project(&pca, config.sqrt, train.row(i)))
                .collect::<Result<Vec<_>>>()?,
        )?
        .with_labels(labels)?;
        let nsc = nsc_fit(&projected, config.subspace)?;
        Ok(FittedPipeline {
            pca,
            nsc,
            sqrt: config.sqrt,
        })
    }

    /// Coordinates handed to the classifier.
    pub fn transform(&self, features: &[f64]) -> Result<Vec<f64>> {
        project(&self.pca, self.sqrt, features)
    }

    /// Per-class residuals, in class order.
    pub fn residuals(&self, features: &[f64]) -> Result<Vec<(usize, f64)>> {
        let z = project(&self.pca, self.sqrt, features)?;
        nsc_residuals(&self.nsc, &z)
    }

    /// Smallest-residual class; ties go to the lowest label.
    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        let residuals = self.residuals(features)?;
        let mut best = residuals[0];
        for &(c, r) in &residuals[1..] {
            if r < best.1 {
                best = (c, r);
            }
        }
        Ok(best.0)
    }
}

// Uncentered projection `U^T x`. Descriptors live in the positive orthant,
// so class subspaces through the origin stay apart; after centering, two
// class means can become antipodal and span the same line.
fn project(pca: &PcaModel<f64>, sqrt: SqrtPlacement, x: &[f64]) -> Result<Vec<f64>> {
    let mut z = pca_transform(pca, x)?;
    for (i, v) in z.iter_mut().enumerate() {
        *v += dot(pca.component(i), pca.mean());
    }
    if sqrt == SqrtPlacement::AfterPca {
        signed_sqrt(&mut z);
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.feature_dim(), 768);
    }

    #[test]
    fn rejects_bad_scale_range() {
        let c = PipelineConfig {
            r_max: 2,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            r_min: 1,
            r_max: 7,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_round_trip_and_partial() {
        let c = PipelineConfig {
            seed: 7,
            sqrt: SqrtPlacement::AfterPca,
            ..Default::default()
        };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&s).unwrap(), c);
        let partial: PipelineConfig = serde_json::from_str(r#"{"r_max": 5}"#).unwrap();
        assert_eq!(partial.r_max, 5);
        assert_eq!(partial.pca_k, 300);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"rmax": 5}"#).is_err());
    }

    #[test]
    fn effective_k_clamps() {
        assert_eq!(effective_pca_k(300, 72, 768), 71);
        assert_eq!(effective_pca_k(300, 1000, 768), 300);
        assert_eq!(effective_pca_k(5, 3, 2), 2);
    }

    #[test]
    fn separable_toy_fit_predicts_training_rows() {
        let rows = vec![
            vec![1.0, 0.8, 0.0, 0.0],
            vec![0.8, 1.0, 0.0, 0.0],
            vec![0.9, 0.9, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.8],
            vec![0.0, 0.0, 0.8, 1.0],
            vec![0.0, 0.0, 0.9, 0.9],
        ];
        let fm = FeatureMatrix::from_rows(&rows)
            .unwrap()
            .with_labels(vec![0, 0, 0, 1, 1, 1])
            .unwrap();
        for sqrt in [SqrtPlacement::BeforePca, SqrtPlacement::AfterPca, SqrtPlacement::None] {
            let config = PipelineConfig {
                sqrt,
                ..Default::default()
            };
            let fitted = FittedPipeline::fit(&fm, &config).unwrap();
            for (i, row) in rows.iter().enumerate() {
                assert_eq!(fitted.predict(row).unwrap(), i / 3, "{sqrt:?} row {i}");
            }
        }
    }

    #[test]
    fn signed_sqrt_keeps_sign() {
        let mut z = vec![-4.0, 0.0, 9.0];
        signed_sqrt(&mut z);
        assert_eq!(z, vec![-2.0, 0.0, 3.0]);
    }
}
