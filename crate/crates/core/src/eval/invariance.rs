//! Descriptor distances between an image and its rescaled or rotated copies.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fwlbp::{chi_square_distance, extract_descriptor_pair, DescriptorPair};
use crate::image::{normalize_intensity, resample, rotate, Image};
use crate::pipeline::PipelineConfig;

pub const ROTATIONS_DEG: [f64; 9] = [0.0, 5.0, 10.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0];

/// Nine geometrically spaced factors from 0.5 to 2.0, including 1.0.
pub fn scale_factors() -> [f64; 9] {
    std::array::from_fn(|i| 2f64.powf((i as f64 - 4.0) / 4.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Scale,
    Rotation,
}

impl std::fmt::Display for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Transform::Scale => "scale",
            Transform::Rotation => "rotation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceRow {
    pub transform: Transform,
    pub param: f64,
    pub chi2_fwlbp: f64,
    pub chi2_lbp: f64,
}

fn descriptors(img: &Image<f64>, config: &PipelineConfig) -> Result<DescriptorPair<f64>> {
    let norm = normalize_intensity(img, config.norm_mean, config.norm_std)?;
    extract_descriptor_pair(&norm, &config.descriptor())
}

fn distances(a: &DescriptorPair<f64>, b: &DescriptorPair<f64>) -> Result<(f64, f64)> {
    Ok((
        chi_square_distance(a.fwlbp.values(), b.fwlbp.values())?,
        chi_square_distance(a.lbp.values(), b.lbp.values())?,
    ))
}

/// Side of the largest square that stays inside the source after any
/// rotation about the center, less a safety pixel on each side.
pub fn rotation_crop_side(width: usize, height: usize) -> usize {
    ((width.min(height) as f64 / std::f64::consts::SQRT_2).floor() as usize).saturating_sub(2)
}

/// Scale rows compare the whole image with `resample(img, s)`. Rotation rows
/// compare central crops of the image and of `rotate(img, theta)`.
pub fn scale_distances(img: &Image<f64>, factors: &[f64], config: &PipelineConfig) -> Result<Vec<InvarianceRow>> {
    let base = descriptors(img, config)?;
    factors
        .iter()
        .map(|&s| {
            let (f, l) = distances(&base, &descriptors(&resample(img, s)?, config)?)?;
            Ok(InvarianceRow {
                transform: Transform::Scale,
                param: s,
                chi2_fwlbp: f,
                chi2_lbp: l,
            })
        })
        .collect()
}

pub fn rotation_distances(img: &Image<f64>, angles_deg: &[f64], config: &PipelineConfig) -> Result<Vec<InvarianceRow>> {
    let side = rotation_crop_side(img.width(), img.height());
    let base = descriptors(&img.crop_center(side, side)?, config)?;
    angles_deg
        .iter()
        .map(|&theta| {
            let turned = rotate(img, theta).crop_center(side, side)?;
            let (f, l) = distances(&base, &descriptors(&turned, config)?)?;
            Ok(InvarianceRow {
                transform: Transform::Rotation,
                param: theta,
                chi2_fwlbp: f,
                chi2_lbp: l,
            })
        })
        .collect()
}

/// Nine scale rows followed by nine rotation rows.
pub fn invariance_report(img: &Image<f64>, config: &PipelineConfig) -> Result<Vec<InvarianceRow>> {
    let mut rows = scale_distances(img, &scale_factors(), config)?;
    rows.extend(rotation_distances(img, &ROTATIONS_DEG, config)?);
    Ok(rows)
}

pub fn invariance_csv(rows: &[InvarianceRow]) -> String {
    let mut s = String::from("transform,param,chi2_fwlbp,chi2_lbp\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:.16e},{:.16e}\n",
            r.transform, r.param, r.chi2_fwlbp, r.chi2_lbp
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::synth::{synth_texture, TextureSpec};

    #[test]
    fn factors_span_half_to_two() {
        let f = scale_factors();
        assert!((f[0] - 0.5).abs() < 1e-15);
        assert_eq!(f[4], 1.0);
        assert!((f[8] - 2.0).abs() < 1e-15);
        assert!(f.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn report_shape_and_identity_rows() {
        let img = synth_texture(&TextureSpec::FractalNoise { beta: 2.5 }, 64, 4).unwrap();
        let rows = invariance_report(&img, &PipelineConfig::default()).unwrap();
        assert_eq!(rows.len(), 18);
        let identity: Vec<_> = rows
            .iter()
            .filter(|r| {
                (r.transform == Transform::Scale && r.param == 1.0)
                    || (r.transform == Transform::Rotation && r.param == 0.0)
            })
            .collect();
        assert_eq!(identity.len(), 2);
        for r in identity {
            assert_eq!((r.chi2_fwlbp, r.chi2_lbp), (0.0, 0.0));
        }
        let csv = invariance_csv(&rows);
        assert_eq!(csv.lines().count(), 19);
        assert!(csv.starts_with("transform,param,chi2_fwlbp,chi2_lbp\n"));
    }

    #[test]
    fn crop_side() {
        assert_eq!(rotation_crop_side(128, 128), 88);
        assert_eq!(rotation_crop_side(64, 100), 43);
    }
}
