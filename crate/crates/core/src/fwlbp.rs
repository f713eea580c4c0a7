//! Fractal-weighted LBP histograms, the multi-radius descriptor, the
//! plain-count LBP baseline and the chi-square histogram distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractal::{compute_fd_image, FdConfig, FdImage};
use crate::image::Image;
use crate::lbp::{lbp_image, LbpImage};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramKind {
    FractalWeighted,
    Count,
}

/// Histogram over the `2^N` LBP codes of one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    bins: Vec<T>,
    samples: usize,
    kind: HistogramKind,
}

impl<T: Scalar> Histogram<T> {
    pub fn bins(&self) -> &[T] {
        &self.bins
    }

    pub fn into_bins(self) -> Vec<T> {
        self.bins
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn kind(&self) -> HistogramKind {
        self.kind
    }

    pub fn total(&self) -> T {
        self.bins.iter().copied().sum()
    }
}

/// Each bin accumulates the fractal dimension of every valid pixel whose
/// code equals the bin index.
pub fn fractal_weighted_histogram<T: Scalar>(lbp: &LbpImage, fd: &FdImage<T>) -> Result<Histogram<T>> {
    if lbp.dims() != fd.dims() {
        return Err(Error::ShapeMismatch(format!(
            "LBP image {:?} vs FD image {:?}",
            lbp.dims(),
            fd.dims()
        )));
    }
    let mut bins = vec![T::zero(); lbp.code_count()];
    for (x, y, code) in lbp.valid_codes() {
        bins[code as usize] += fd.get(x, y);
    }
    Ok(Histogram {
        bins,
        samples: lbp.samples(),
        kind: HistogramKind::FractalWeighted,
    })
}

pub fn lbp_count_histogram<T: Scalar>(lbp: &LbpImage) -> Histogram<T> {
    let mut counts = vec![0usize; lbp.code_count()];
    for (_, _, code) in lbp.valid_codes() {
        counts[code as usize] += 1;
    }
    Histogram {
        bins: counts.into_iter().map(T::from_usize_lossy).collect(),
        samples: lbp.samples(),
        kind: HistogramKind::Count,
    }
}

/// One `(R, N)` sampling configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbpRadius {
    pub radius: f64,
    pub samples: usize,
}

impl LbpRadius {
    pub fn new(radius: f64, samples: usize) -> Self {
        LbpRadius { radius, samples }
    }

    pub fn bins(&self) -> usize {
        1usize << self.samples
    }
}

impl std::fmt::Display for LbpRadius {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.radius, self.samples)
    }
}

impl std::str::FromStr for LbpRadius {
    type Err = Error;

    /// Parses `R:N`, e.g. `2:8`.
    fn from_str(s: &str) -> Result<Self> {
        let (r, n) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("radius spec {s:?} is not R:N")))?;
        let radius = r
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad radius in {s:?}")))?;
        let samples = n
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad sample count in {s:?}")))?;
        Ok(LbpRadius { radius, samples })
    }
}

pub fn default_radii() -> Vec<LbpRadius> {
    vec![LbpRadius::new(1.0, 8), LbpRadius::new(2.0, 8), LbpRadius::new(3.0, 8)]
}

/// Descriptor extraction settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorConfig {
    pub radii: Vec<LbpRadius>,
    pub fd: FdConfig,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            radii: default_radii(),
            fd: FdConfig::default(),
        }
    }
}

impl DescriptorConfig {
    pub fn dimension(&self) -> usize {
        self.radii.iter().map(LbpRadius::bins).sum()
    }
}

/// Concatenated per-radius histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct FwlbpDescriptor<T> {
    values: Vec<T>,
    radii: Vec<LbpRadius>,
    normalized: bool,
}

impl<T: Scalar> FwlbpDescriptor<T> {
    /// Concatenates histograms in the given order without normalizing.
    pub fn concat(histograms: Vec<Histogram<T>>, radii: Vec<LbpRadius>) -> Result<Self> {
        if histograms.len() != radii.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} histograms for {} radii",
                histograms.len(),
                radii.len()
            )));
        }
        let mut values = Vec::with_capacity(radii.iter().map(LbpRadius::bins).sum());
        for (h, r) in histograms.into_iter().zip(&radii) {
            if h.bins().len() != r.bins() {
                return Err(Error::ShapeMismatch(format!(
                    "histogram for {r} has {} bins",
                    h.bins().len()
                )));
            }
            values.extend(h.into_bins());
        }
        Ok(FwlbpDescriptor {
            values,
            radii,
            normalized: false,
        })
    }

    /// Scales the whole concatenation to unit L1 norm. An all-zero vector is
    /// left as is.
    pub fn l1_normalized(mut self) -> Self {
        let total: T = self.values.iter().copied().sum();
        if total > T::zero() {
            for v in &mut self.values {
                *v /= total;
            }
            self.normalized = true;
        }
        self
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn radii(&self) -> &[LbpRadius] {
        &self.radii
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Slice holding the histogram of the `i`-th radius.
    pub fn block(&self, i: usize) -> &[T] {
        let start: usize = self.radii[..i].iter().map(LbpRadius::bins).sum();
        &self.values[start..start + self.radii[i].bins()]
    }
}

/// Both descriptors of one image, sharing the LBP images.
#[derive(Debug, Clone)]
pub struct DescriptorPair<T> {
    pub fwlbp: FwlbpDescriptor<T>,
    pub lbp: FwlbpDescriptor<T>,
}

fn lbp_images<T: Scalar>(img: &Image<T>, radii: &[LbpRadius]) -> Result<Vec<LbpImage>> {
    if radii.is_empty() {
        return Err(Error::InvalidParameter("at least one LBP radius is required".into()));
    }
    radii.iter().map(|r| lbp_image(img, r.radius, r.samples)).collect()
}

/// Computes the FD image once, then one fractal-weighted histogram per
/// radius, concatenated in radius order and L1-normalized as a whole.
pub fn extract_fwlbp<T: Scalar>(img: &Image<T>, config: &DescriptorConfig) -> Result<FwlbpDescriptor<T>> {
    let fd = compute_fd_image(img, config.fd)?;
    let lbps = lbp_images(img, &config.radii)?;
    fwlbp_from_parts(&lbps, &fd, &config.radii)
}

pub fn fwlbp_from_parts<T: Scalar>(
    lbps: &[LbpImage],
    fd: &FdImage<T>,
    radii: &[LbpRadius],
) -> Result<FwlbpDescriptor<T>> {
    let hists = lbps
        .iter()
        .map(|l| fractal_weighted_histogram(l, fd))
        .collect::<Result<Vec<_>>>()?;
    Ok(FwlbpDescriptor::concat(hists, radii.to_vec())?.l1_normalized())
}

/// Plain multi-radius LBP count histogram, L1-normalized over the
/// concatenation.
pub fn extract_lbp_descriptor<T: Scalar>(img: &Image<T>, radii: &[LbpRadius]) -> Result<FwlbpDescriptor<T>> {
    let lbps = lbp_images(img, radii)?;
    let hists = lbps.iter().map(lbp_count_histogram).collect();
    Ok(FwlbpDescriptor::concat(hists, radii.to_vec())?.l1_normalized())
}

pub fn extract_descriptor_pair<T: Scalar>(img: &Image<T>, config: &DescriptorConfig) -> Result<DescriptorPair<T>> {
    let fd = compute_fd_image(img, config.fd)?;
    let lbps = lbp_images(img, &config.radii)?;
    let fwlbp = fwlbp_from_parts(&lbps, &fd, &config.radii)?;
    let hists = lbps.iter().map(lbp_count_histogram).collect();
    let lbp = FwlbpDescriptor::concat(hists, config.radii.clone())?.l1_normalized();
    Ok(DescriptorPair { fwlbp, lbp })
}

/// `1/2 * sum (a_i - b_i)^2 / (a_i + b_i)`, skipping bins where both are zero.
pub fn chi_square_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "chi-square on vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut acc = T::zero();
    for (&p, &q) in a.iter().zip(b) {
        let s = p + q;
        if s != T::zero() {
            let d = p - q;
            acc += d * d / s;
        }
    }
    Ok(acc * T::lit(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lcg_image(w: usize, h: usize, seed: u64) -> Image<f64> {
        let mut s = seed;
        Image::from_fn(w, h, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 40) % 256) as f64
        })
        .unwrap()
    }

    #[test]
    fn constant_image_single_code() {
        let img = Image::filled(10, 10, 50.0).unwrap();
        let lbp = lbp_image(&img, 1.0, 8).unwrap();
        let fd = FdImage::new(Image::filled(10, 10, 2.0).unwrap());
        let h = fractal_weighted_histogram(&lbp, &fd).unwrap();
        assert_abs_diff_eq!(h.bins()[255], 2.0 * 64.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.total(), 128.0, epsilon = 1e-12);
        let c = lbp_count_histogram::<f64>(&lbp);
        assert_eq!(c.bins()[255], 64.0);
        assert_eq!(c.total(), 64.0);
    }

    #[test]
    fn unit_weights_reduce_to_counts() {
        for seed in 0..5 {
            let img = lcg_image(12, 12, seed);
            let lbp = lbp_image(&img, 2.0, 8).unwrap();
            let ones = FdImage::new(Image::filled(12, 12, 1.0).unwrap());
            let w = fractal_weighted_histogram(&lbp, &ones).unwrap();
            let c = lbp_count_histogram::<f64>(&lbp);
            assert_eq!(w.bins(), c.bins());
            assert_eq!(w.kind(), HistogramKind::FractalWeighted);
            assert_eq!(c.kind(), HistogramKind::Count);
        }
    }

    #[test]
    fn shape_mismatch() {
        let img = lcg_image(8, 8, 1);
        let lbp = lbp_image(&img, 1.0, 8).unwrap();
        let fd = FdImage::new(Image::filled(8, 9, 1.0).unwrap());
        assert!(matches!(
            fractal_weighted_histogram(&lbp, &fd),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(chi_square_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn weight_conservation() {
        let img = lcg_image(24, 24, 3);
        let fd = compute_fd_image(&img, FdConfig::default()).unwrap();
        for r in [1.0, 2.0, 3.0] {
            let lbp = lbp_image(&img, r, 8).unwrap();
            let h = fractal_weighted_histogram(&lbp, &fd).unwrap();
            let direct: f64 = lbp.valid_codes().map(|(x, y, _)| fd.get(x, y)).sum();
            assert_abs_diff_eq!(h.total(), direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn constant_image_descriptor_has_three_blocks() {
        let n = 32usize;
        let img = Image::filled(n, n, 128.0).unwrap();
        let d = extract_fwlbp(&img, &DescriptorConfig::default()).unwrap();
        assert_eq!(d.len(), 768);
        assert!(d.is_normalized());
        let nz: Vec<usize> = (0..768).filter(|&i| d.values()[i] != 0.0).collect();
        assert_eq!(nz, vec![255, 511, 767]);
        // FD is 2 everywhere, so weights are proportional to valid-pixel counts
        // (n - 2b)^2 for border widths b = 1, 2, 3.
        let counts: Vec<f64> = (1..=3).map(|b| ((n - 2 * b) * (n - 2 * b)) as f64).collect();
        let total: f64 = counts.iter().sum();
        for (i, c) in nz.iter().zip(&counts) {
            assert_abs_diff_eq!(d.values()[*i], c / total, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(d.block(1)[255], counts[1] / total, epsilon = 1e-12);
    }

    #[test]
    fn chi_square_examples() {
        let a = [0.5, 0.5, 0.0];
        let b = [0.25, 0.25, 0.5];
        assert_abs_diff_eq!(chi_square_distance(&a, &b).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(chi_square_distance(&a, &a).unwrap(), 0.0);
        let p = [0.5, 0.5, 0.0, 0.0];
        let q = [0.0, 0.0, 0.3, 0.7];
        assert_abs_diff_eq!(chi_square_distance(&p, &q).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn radius_parsing() {
        let r: LbpRadius = "2:8".parse().unwrap();
        assert_eq!(r, LbpRadius::new(2.0, 8));
        assert_eq!(r.to_string(), "2:8");
        assert!("2".parse::<LbpRadius>().is_err());
        assert!("a:8".parse::<LbpRadius>().is_err());
    }

    fn normalized(v: Vec<f64>) -> Vec<f64> {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    }

    proptest! {
        #[test]
        fn chi_square_axioms(
            a in prop::collection::vec(0.0f64..1.0, 16),
            b in prop::collection::vec(0.0f64..1.0, 16),
        ) {
            prop_assume!(a.iter().sum::<f64>() > 1e-6 && b.iter().sum::<f64>() > 1e-6);
            let (a, b) = (normalized(a), normalized(b));
            let ab = chi_square_distance(&a, &b).unwrap();
            let ba = chi_square_distance(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!(ab <= 1.0 + 1e-12);
            prop_assert!((ab - ba).abs() < 1e-15);
            prop_assert_eq!(chi_square_distance(&a, &a).unwrap(), 0.0);
            if a != b {
                prop_assert!(ab > 0.0);
            }
        }
    }
}
