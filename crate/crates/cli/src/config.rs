use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use fwlbp::{LbpRadius, PipelineConfig, RegressionMode, SqrtPlacement, SubspaceDimPolicy};

use crate::commands::Usage;

/// Pipeline settings. A flag overrides `--config`, which overrides the
/// built-in default.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file with any subset of the fields below
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Smallest box size of the fractal-dimension estimate [default: 2]
    #[arg(long)]
    pub r_min: Option<usize>,
    /// Largest box size of the fractal-dimension estimate [default: 7]
    #[arg(long)]
    pub r_max: Option<usize>,
    /// LBP rings as R:N, comma separated [default: 1:8,2:8,3:8]
    #[arg(long, value_delimiter = ',', value_name = "R:N")]
    pub radii: Option<Vec<LbpRadius>>,
    /// PCA components kept, clamped to samples - 1 [default: 300]
    #[arg(long)]
    pub pca_k: Option<usize>,
    /// Class subspace keeps this fraction of energy [default: 0.95]
    #[arg(long, conflicts_with = "subspace_dim")]
    pub energy: Option<f64>,
    /// Class subspace keeps a fixed number of directions
    #[arg(long)]
    pub subspace_dim: Option<usize>,
    /// Target mean of intensity normalization [default: 128]
    #[arg(long)]
    pub norm_mean: Option<f64>,
    /// Target standard deviation of intensity normalization [default: 20]
    #[arg(long)]
    pub norm_std: Option<f64>,
    /// Seed for folds and noise [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fractal-dimension regression: loglog or linear [default: loglog]
    #[arg(long)]
    pub regression: Option<RegressionMode>,
    /// Square-root placement: before_pca, after_pca or none [default: before_pca]
    #[arg(long, conflicts_with_all = ["no_sqrt", "sqrt_after_pca"])]
    pub sqrt: Option<SqrtPlacement>,
    /// Same as --sqrt none
    #[arg(long)]
    pub no_sqrt: bool,
    /// Same as --sqrt after_pca
    #[arg(long, conflicts_with = "no_sqrt")]
    pub sqrt_after_pca: bool,
    /// Cross-validation folds [default: 10]
    #[arg(long)]
    pub folds: Option<usize>,
    /// Corrupt training images as well in noise sweeps
    #[arg(long)]
    pub noisy_train: bool,
    /// Add noise before intensity normalization instead of after
    #[arg(long)]
    pub noise_before_normalize: bool,
}

pub fn read_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => read_config(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.r_min {
            c.r_min = v;
        }
        if let Some(v) = self.r_max {
            c.r_max = v;
        }
        if let Some(v) = &self.radii {
            c.radii = v.clone();
        }
        if let Some(v) = self.pca_k {
            c.pca_k = v;
        }
        if let Some(v) = self.energy {
            c.subspace = SubspaceDimPolicy::Energy(v);
        }
        if let Some(v) = self.subspace_dim {
            c.subspace = SubspaceDimPolicy::Fixed(v);
        }
        if let Some(v) = self.norm_mean {
            c.norm_mean = v;
        }
        if let Some(v) = self.norm_std {
            c.norm_std = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.regression {
            c.regression = v;
        }
        if let Some(v) = self.sqrt {
            c.sqrt = v;
        }
        if self.no_sqrt {
            c.sqrt = SqrtPlacement::None;
        }
        if self.sqrt_after_pca {
            c.sqrt = SqrtPlacement::AfterPca;
        }
        if let Some(v) = self.folds {
            c.folds = v;
        }
        c.noisy_train |= self.noisy_train;
        c.noise_before_normalize |= self.noise_before_normalize;
        c.validate().map_err(|e| Usage(e.to_string()))?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"r_max": 5, "pca_k": 40}"#).unwrap();
        let args = ConfigArgs {
            config: Some(path),
            r_max: Some(6),
            no_sqrt: true,
            ..Default::default()
        };
        let c = args.resolve().unwrap();
        assert_eq!(c.r_max, 6);
        assert_eq!(c.pca_k, 40);
        assert_eq!(c.norm_std, 20.0);
        assert_eq!(c.sqrt, SqrtPlacement::None);
    }

    #[test]
    fn invalid_result_is_rejected() {
        let args = ConfigArgs {
            r_min: Some(4),
            r_max: Some(3),
            ..Default::default()
        };
        assert!(args.resolve().is_err());
    }
}
