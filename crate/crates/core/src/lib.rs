//! Fractal weighted local binary pattern (FWLBP) texture descriptors.
//!
//! The pipeline runs grayscale image → per-pixel fractal dimension (Gaussian
//! scale space + differential box counting + log-log regression) →
//! multi-radius LBP codes → fractal-weighted histograms → square root → PCA
//! → nearest subspace classification. The [`eval`] module holds the
//! cross-validation, noise, scale-range and invariance experiments.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, which is what the pipeline and the CLI use.

pub mod classifier;
pub mod error;
pub mod eval;
pub mod export;
pub mod features;
pub mod fractal;
pub mod fwlbp;
pub mod image;
pub mod lbp;
pub mod linalg;
pub mod pgm;
pub mod pipeline;
pub mod scalar;
pub mod scale_space;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use classifier::{nsc_fit, nsc_predict, nsc_residual, nsc_residuals, SubspaceDimPolicy};
pub use features::{pca_fit, pca_inverse_transform, pca_transform, sqrt_transform};
pub use fractal::{compute_fd_image, FdConfig, RegressionMode};
pub use fwlbp::{chi_square_distance, extract_fwlbp, DescriptorConfig, LbpRadius};
pub use image::{add_gaussian_noise, normalize_intensity, resample, rotate};
pub use lbp::{lbp_image, LbpImage};
pub use pgm::{load_pgm, read_pgm_file, write_pgm, write_pgm_file, PgmEncoding};
pub use pipeline::{extract_features, FittedPipeline, PipelineConfig, SqrtPlacement};

/// Double-precision grayscale image.
pub type GrayImage = image::Image<f64>;
pub type GrayImageF32 = image::Image<f32>;
pub type FdImage = fractal::FdImage<f64>;
pub type FdImageF32 = fractal::FdImage<f32>;
pub type Histogram = fwlbp::Histogram<f64>;
pub type FwlbpDescriptor = fwlbp::FwlbpDescriptor<f64>;
pub type FeatureMatrix = features::FeatureMatrix<f64>;
pub type PcaModel = features::PcaModel<f64>;
pub type NscModel = classifier::NscModel<f64>;
pub type Matrix = linalg::Matrix<f64>;
