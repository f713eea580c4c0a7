//! Gaussian scale space built from separable 1-D kernels.
//!
//! The kernel for scale `r` has `r` taps and sigma `r / 2`. Even sizes have
//! a fractional center `(r - 1) / 2`; the convolution anchors such kernels
//! at tap `floor((r - 1) / 2)`, so even scales shift the image by half a
//! pixel.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel1D<T> {
    taps: Vec<T>,
    sigma: T,
}

impl<T: Scalar> GaussianKernel1D<T> {
    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn size(&self) -> usize {
        self.taps.len()
    }

    /// Index of the tap aligned with the output pixel.
    pub fn anchor(&self) -> usize {
        (self.taps.len() - 1) / 2
    }
}

/// Sampled Gaussian of `size` taps centered at `(size - 1) / 2`, normalized
/// to unit sum.
pub fn gaussian_kernel_1d<T: Scalar>(size: usize, sigma: T) -> Result<GaussianKernel1D<T>> {
    if size == 0 {
        return Err(Error::InvalidParameter("kernel size must be at least 1".into()));
    }
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "kernel sigma must be positive, got {sigma}"
        )));
    }
    let center = T::from_usize_lossy(size - 1) * T::lit(0.5);
    let two_var = T::lit(2.0) * sigma * sigma;
    let raw: Vec<T> = (0..size)
        .map(|i| {
            let d = T::from_usize_lossy(i) - center;
            (-(d * d) / two_var).exp()
        })
        .collect();
    let sum: T = raw.iter().copied().sum();
    Ok(GaussianKernel1D {
        taps: raw.into_iter().map(|v| v / sum).collect(),
        sigma,
    })
}

/// Horizontal then vertical pass with edge replication at the borders.
pub fn convolve_separable<T: Scalar>(img: &Image<T>, kernel: &GaussianKernel1D<T>) -> Image<T> {
    let (w, h) = img.dims();
    let taps = kernel.taps();
    let anchor = kernel.anchor() as isize;
    if taps.len() == 1 {
        return img.map(|v| v * taps[0]).unwrap_or_else(|_| img.clone());
    }

    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut horiz = vec![T::zero(); w * h];
    horiz.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
        let row = img.row(y);
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (k, &t) in taps.iter().enumerate() {
                acc += t * row[clamp(x as isize + k as isize - anchor, w)];
            }
            *o = acc;
        }
    });

    let mut out = vec![T::zero(); w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, out_row)| {
        for (k, &t) in taps.iter().enumerate() {
            let sy = clamp(y as isize + k as isize - anchor, h);
            let src = &horiz[sy * w..(sy + 1) * w];
            for (o, &s) in out_row.iter_mut().zip(src) {
                *o += t * s;
            }
        }
    });
    Image::from_raw(w, h, out)
}

/// Stack of progressively smoothed copies of one image, one per integer
/// scale in `r_min..=r_max`.
#[derive(Debug, Clone)]
pub struct ScaleSpace<T> {
    layers: Vec<Image<T>>,
    r_min: usize,
    r_max: usize,
}

impl<T: Scalar> ScaleSpace<T> {
    pub fn layers(&self) -> &[Image<T>] {
        &self.layers
    }

    pub fn r_min(&self) -> usize {
        self.r_min
    }

    pub fn r_max(&self) -> usize {
        self.r_max
    }

    /// Number of layers, `r_max - r_min + 1`.
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn scales(&self) -> impl Iterator<Item = usize> + '_ {
        self.r_min..=self.r_max
    }
}

pub fn build_scale_space<T: Scalar>(img: &Image<T>, r_min: usize, r_max: usize) -> Result<ScaleSpace<T>> {
    if r_min < 1 || r_min > r_max {
        return Err(Error::InvalidParameter(format!(
            "scale range must satisfy 1 <= r_min <= r_max, got {r_min}..{r_max}"
        )));
    }
    let (w, h) = img.dims();
    if w < r_max || h < r_max {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            reason: format!("needs at least {r_max} pixels per side for scale {r_max}"),
        });
    }
    let layers = (r_min..=r_max)
        .into_par_iter()
        .map(|r| {
            let kernel = gaussian_kernel_1d(r, T::from_usize_lossy(r) * T::lit(0.5))?;
            Ok(convolve_separable(img, &kernel))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScaleSpace { layers, r_min, r_max })
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
            (s >> 40) as f64 % 256.0
        })
        .unwrap()
    }

    // Independent 2-D reference: direct convolution with the outer-product
    // kernel, edge-replicated.
    fn direct_2d(img: &Image<f64>, taps: &[f64]) -> Image<f64> {
        let (w, h) = img.dims();
        let a = ((taps.len() - 1) / 2) as isize;
        Image::from_fn(w, h, |x, y| {
            let mut acc = 0.0;
            for (j, tj) in taps.iter().enumerate() {
                for (i, ti) in taps.iter().enumerate() {
                    let sx = (x as isize + i as isize - a).clamp(0, w as isize - 1) as usize;
                    let sy = (y as isize + j as isize - a).clamp(0, h as isize - 1) as usize;
                    acc += ti * tj * img.get(sx, sy);
                }
            }
            acc
        })
        .unwrap()
    }

    #[test]
    fn degenerate_and_flat_kernels() {
        let k = gaussian_kernel_1d(1, 0.3).unwrap();
        assert_eq!(k.taps(), &[1.0]);
        let flat = gaussian_kernel_1d(3, 1e6).unwrap();
        for t in flat.taps() {
            assert_abs_diff_eq!(*t, 1.0 / 3.0, epsilon = 1e-6);
        }
        assert!(gaussian_kernel_1d::<f64>(0, 1.0).is_err());
        assert!(gaussian_kernel_1d(3, 0.0).is_err());
        assert!(gaussian_kernel_1d(3, -1.0).is_err());
    }

    #[test]
    fn kernel_matches_formula() {
        let k = gaussian_kernel_1d(5, 1.0).unwrap();
        let raw: Vec<f64> = (0..5).map(|i| (-((i as f64 - 2.0).powi(2)) / 2.0).exp()).collect();
        let s: f64 = raw.iter().sum();
        for (t, r) in k.taps().iter().zip(&raw) {
            assert_abs_diff_eq!(*t, r / s, epsilon = 1e-12);
        }
    }

    #[test]
    fn kernel_invariants() {
        for size in 1..12 {
            let k = gaussian_kernel_1d(size, size as f64 / 2.0).unwrap();
            assert_abs_diff_eq!(k.taps().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            for i in 0..size {
                assert_abs_diff_eq!(k.taps()[i], k.taps()[size - 1 - i], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn identity_kernel_and_dc() {
        let img = lcg_image(9, 7, 1);
        let id = gaussian_kernel_1d(1, 1.0).unwrap();
        assert_eq!(convolve_separable(&img, &id), img);
        let c = Image::filled(8, 8, 77.0).unwrap();
        let k = gaussian_kernel_1d(5, 2.5).unwrap();
        for v in convolve_separable(&c, &k).data() {
            assert_abs_diff_eq!(*v, 77.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn impulse_response_is_outer_product() {
        let mut data = vec![0.0; 25];
        data[12] = 1.0;
        let img = Image::new(5, 5, data).unwrap();
        let k = gaussian_kernel_1d(3, 0.5).unwrap();
        let out = convolve_separable(&img, &k);
        let t = k.taps();
        for y in 0..5 {
            for x in 0..5 {
                let expect = if (1..=3).contains(&x) && (1..=3).contains(&y) {
                    t[x - 1] * t[y - 1]
                } else {
                    0.0
                };
                assert_abs_diff_eq!(out.get(x, y), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn separable_equals_direct_2d() {
        for (seed, size) in [(3u64, 2usize), (4, 3), (5, 4), (6, 7)] {
            let img = lcg_image(16, 16, seed);
            let k = gaussian_kernel_1d(size, size as f64 / 2.0).unwrap();
            let a = convolve_separable(&img, &k);
            let b = direct_2d(&img, k.taps());
            for (p, q) in a.data().iter().zip(b.data()) {
                assert_abs_diff_eq!(p, q, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn layer_counts_and_errors() {
        let img = lcg_image(16, 16, 9);
        assert_eq!(build_scale_space(&img, 2, 2).unwrap().len(), 1);
        let ss = build_scale_space(&img, 2, 7).unwrap();
        assert_eq!(ss.len(), 6);
        assert_eq!(ss.scales().collect::<Vec<_>>(), vec![2, 3, 4, 5, 6, 7]);
        assert!(ss.layers().iter().all(|l| l.dims() == (16, 16)));
        let tiny = lcg_image(5, 9, 9);
        assert!(matches!(
            build_scale_space(&tiny, 2, 7),
            Err(Error::ImageTooSmall { .. })
        ));
        assert!(build_scale_space(&img, 0, 3).is_err());
        assert!(build_scale_space(&img, 4, 3).is_err());
    }

    #[test]
    fn constant_image_every_layer_equal() {
        let c = Image::filled(12, 12, 128.0).unwrap();
        for layer in build_scale_space(&c, 2, 7).unwrap().layers() {
            for v in layer.data() {
                assert_abs_diff_eq!(*v, 128.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn variance_non_increasing_with_scale() {
        for seed in 0..5 {
            let img = lcg_image(32, 32, seed);
            let ss = build_scale_space(&img, 1, 8).unwrap();
            let vars: Vec<f64> = ss.layers().iter().map(|l| l.std_dev().powi(2)).collect();
            for w in vars.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{vars:?}");
            }
        }
    }

    #[test]
    fn mean_preserved_when_border_band_is_flat() {
        // Edge replication conserves the pixel sum exactly when every band
        // the kernel can reach past the border is constant.
        for seed in 0..4 {
            let noise = lcg_image(40, 40, seed);
            let img = Image::from_fn(40, 40, |x, y| {
                if (8..32).contains(&x) && (8..32).contains(&y) {
                    noise.get(x, y)
                } else {
                    100.0
                }
            })
            .unwrap();
            let ss = build_scale_space(&img, 2, 7).unwrap();
            for layer in ss.layers() {
                assert_abs_diff_eq!(layer.mean(), img.mean(), epsilon = 1e-9);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn single_pass_matches_direct(seed in any::<u64>(), size in 1usize..8) {
            let img = lcg_image(16, 16, seed);
            let k = gaussian_kernel_1d(size, size as f64 / 2.0).unwrap();
            let a = convolve_separable(&img, &k);
            let b = direct_2d(&img, k.taps());
            for (p, q) in a.data().iter().zip(b.data()) {
                prop_assert!((p - q).abs() < 1e-10);
            }
        }
    }
}
