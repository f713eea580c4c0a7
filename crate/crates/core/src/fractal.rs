//! Per-pixel fractal dimension by differential box counting over a Gaussian
//! scale space.
//!
//! Each scale-space layer `r` is box-counted with an `r x r` window: the
//! window's gray-level relief `g_max - g_min` is covered by boxes of height
//! `r`, giving `b = floor((g_max - g_min) / r) + 1`, scaled by `(L / r)^2`.
//! The fractal dimension of a pixel is the least-squares slope of
//! `log Omega` against `log(1/r)` across the layers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;
use crate::scale_space::{build_scale_space, ScaleSpace};

/// Abscissa/ordinate pair used for the per-pixel regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionMode {
    /// `log Omega` against `log(1/r)`.
    #[default]
    LogLog,
    /// `Omega` against `r`, untransformed.
    Linear,
}

impl std::str::FromStr for RegressionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loglog" => Ok(RegressionMode::LogLog),
            "linear" => Ok(RegressionMode::Linear),
            other => Err(Error::InvalidParameter(format!("unknown regression mode {other:?}"))),
        }
    }
}

/// Box-count images, one per scale, in ascending scale order.
#[derive(Debug, Clone)]
pub struct IntermediateStack<T> {
    layers: Vec<Image<T>>,
    scales: Vec<usize>,
}

impl<T: Scalar> IntermediateStack<T> {
    /// Assembles a stack from precomputed layers. Scales must be strictly
    /// ascending and every value strictly positive.
    pub fn new(layers: Vec<Image<T>>, scales: Vec<usize>) -> Result<Self> {
        if layers.len() != scales.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} layers for {} scales",
                layers.len(),
                scales.len()
            )));
        }
        if layers.is_empty() {
            return Err(Error::InsufficientLayers(0));
        }
        if scales.windows(2).any(|w| w[0] >= w[1]) || scales[0] == 0 {
            return Err(Error::InvalidParameter(format!(
                "scales must ascend from 1: {scales:?}"
            )));
        }
        let dims = layers[0].dims();
        if layers.iter().any(|l| l.dims() != dims) {
            return Err(Error::ShapeMismatch("stack layers differ in size".into()));
        }
        if layers.iter().flat_map(|l| l.data()).any(|&v| !(v > T::zero())) {
            return Err(Error::InvalidParameter("box counts must be positive".into()));
        }
        Ok(IntermediateStack { layers, scales })
    }

    pub fn layers(&self) -> &[Image<T>] {
        &self.layers
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

/// Per-pixel fractal dimension estimates, aligned with the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct FdImage<T>(Image<T>);

impl<T: Scalar> FdImage<T> {
    pub fn new(values: Image<T>) -> Self {
        FdImage(values)
    }

    pub fn image(&self) -> &Image<T> {
        &self.0
    }

    pub fn into_image(self) -> Image<T> {
        self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.0.get(x, y)
    }

    pub fn mean(&self) -> T {
        self.0.mean()
    }
}

/// Window offsets `[-alpha, r - 1 - alpha]` with `alpha = ceil((r - 1) / 2)`.
fn window_offsets(r: usize) -> (isize, isize) {
    let alpha = r / 2; // ceil((r - 1) / 2)
    (-(alpha as isize), (r - 1 - alpha) as isize)
}

// 1-D sliding min and max over clamped windows `[i + lo, i + hi]`.
fn sliding_min_max<T: Scalar>(src: &[T], lo: isize, hi: isize, min_out: &mut [T], max_out: &mut [T]) {
    let n = src.len() as isize;
    for i in 0..n {
        let a = (i + lo).max(0) as usize;
        let b = (i + hi).min(n - 1) as usize;
        let (mut mn, mut mx) = (src[a], src[a]);
        for &v in &src[a + 1..=b] {
            mn = mn.min(v);
            mx = mx.max(v);
        }
        min_out[i as usize] = mn;
        max_out[i as usize] = mx;
    }
}

/// Box-count image of one scale-space layer. Border pixels use the part of
/// the window that lies inside the image.
pub fn dbc_layer<T: Scalar>(layer: &Image<T>, r: usize, layer_count: usize) -> Result<Image<T>> {
    if r < 2 {
        return Err(Error::InvalidParameter(format!(
            "box-counting scale must be >= 2, got {r}"
        )));
    }
    if layer_count == 0 {
        return Err(Error::InvalidParameter("layer count must be positive".into()));
    }
    let (w, h) = layer.dims();
    if w < r || h < r {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            reason: format!("box-counting window {r}x{r} does not fit"),
        });
    }
    let (lo, hi) = window_offsets(r);

    // rows first, then columns of the row extrema
    let mut row_min = vec![T::zero(); w * h];
    let mut row_max = vec![T::zero(); w * h];
    row_min
        .par_chunks_mut(w)
        .zip(row_max.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (mn, mx))| sliding_min_max(layer.row(y), lo, hi, mn, mx));

    let r_t = T::from_usize_lossy(r);
    let ratio = T::from_usize_lossy(layer_count) / r_t;
    let scale = ratio * ratio;
    let mut out = vec![T::zero(); w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, out_row)| {
        let a = (y as isize + lo).max(0) as usize;
        let b = (y as isize + hi).min(h as isize - 1) as usize;
        for (x, o) in out_row.iter_mut().enumerate() {
            let mut g_min = row_min[a * w + x];
            let mut g_max = row_max[a * w + x];
            for yy in a + 1..=b {
                g_min = g_min.min(row_min[yy * w + x]);
                g_max = g_max.max(row_max[yy * w + x]);
            }
            let boxes = ((g_max - g_min) / r_t).floor() + T::one();
            *o = boxes * scale;
        }
    });
    Ok(Image::from_raw(w, h, out))
}

pub fn build_intermediate_stack<T: Scalar>(ss: &ScaleSpace<T>) -> Result<IntermediateStack<T>> {
    let count = ss.len();
    let scales: Vec<usize> = ss.scales().collect();
    let layers = ss
        .layers()
        .par_iter()
        .zip(scales.par_iter())
        .map(|(layer, &r)| dbc_layer(layer, r, count))
        .collect::<Result<Vec<_>>>()?;
    Ok(IntermediateStack { layers, scales })
}

/// Least-squares slope per pixel across the stack.
pub fn fd_regression<T: Scalar>(stack: &IntermediateStack<T>, mode: RegressionMode) -> Result<FdImage<T>> {
    let n = stack.len();
    if n < 2 {
        return Err(Error::InsufficientLayers(n));
    }
    let xs: Vec<T> = stack
        .scales()
        .iter()
        .map(|&r| {
            let r = T::from_usize_lossy(r);
            match mode {
                RegressionMode::LogLog => -r.ln(),
                RegressionMode::Linear => r,
            }
        })
        .collect();
    let n_t = T::from_usize_lossy(n);
    let sum_x: T = xs.iter().copied().sum();
    let sum_xx: T = xs.iter().map(|&x| x * x).sum();
    let psi1 = sum_xx - sum_x * sum_x / n_t;

    let (w, h) = stack.layers()[0].dims();
    let layers: Vec<&[T]> = stack.layers().iter().map(|l| l.data()).collect();
    let mut out = vec![T::zero(); w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, out_row)| {
        for (x, o) in out_row.iter_mut().enumerate() {
            let idx = y * w + x;
            let mut sum_y = T::zero();
            let mut sum_xy = T::zero();
            for (layer, &xv) in layers.iter().zip(&xs) {
                let yv = match mode {
                    RegressionMode::LogLog => layer[idx].ln(),
                    RegressionMode::Linear => layer[idx],
                };
                sum_y += yv;
                sum_xy += xv * yv;
            }
            let psi2 = sum_xy - sum_x * sum_y / n_t;
            *o = psi2 / psi1;
        }
    });
    Ok(FdImage(Image::from_raw(w, h, out)))
}

/// Scale range and regression mode for the fractal-dimension transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FdConfig {
    pub r_min: usize,
    pub r_max: usize,
    #[serde(default)]
    pub regression: RegressionMode,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            r_min: 2,
            r_max: 7,
            regression: RegressionMode::LogLog,
        }
    }
}

impl FdConfig {
    pub fn new(r_min: usize, r_max: usize) -> Self {
        FdConfig {
            r_min,
            r_max,
            regression: RegressionMode::LogLog,
        }
    }

    pub fn layer_count(&self) -> usize {
        (self.r_max + 1).saturating_sub(self.r_min)
    }
}

/// Full transform: scale space, box counting, regression.
pub fn compute_fd_image<T: Scalar>(img: &Image<T>, config: FdConfig) -> Result<FdImage<T>> {
    if config.r_min < 2 {
        return Err(Error::InvalidParameter(format!(
            "r_min must be >= 2 for box counting, got {}",
            config.r_min
        )));
    }
    if config.r_max < config.r_min + 1 {
        return Err(Error::InsufficientLayers(config.layer_count()));
    }
    let ss = build_scale_space(img, config.r_min, config.r_max)?;
    let stack = build_intermediate_stack(&ss)?;
    fd_regression(&stack, config.regression)
}
