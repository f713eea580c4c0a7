//! Grayscale image container plus the photometric and geometric transforms
//! used by the pipeline and the evaluation harness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major real-valued intensity image.
///
/// Values are nominally in `[0, 255]` but nothing enforces that; after
/// normalization or noise they can leave the range. Every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite intensity at index {i}")));
        }
        Ok(Image { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    // Internal constructor for operations whose outputs are finite by construction.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Image { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn mean(&self) -> T {
        self.data.iter().copied().sum::<T>() / T::from_usize_lossy(self.data.len())
    }

    /// Population standard deviation.
    pub fn std_dev(&self) -> T {
        let mean = self.mean();
        let var = self.data.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::from_usize_lossy(self.data.len());
        var.sqrt()
    }

    pub fn min_max(&self) -> (T, T) {
        self.data
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Applies `f` pointwise. Fails if `f` produces a non-finite value.
    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Result<Self> {
        Self::new(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Converts to another scalar precision.
    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        )
    }

    /// Copies the `w`x`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::InvalidParameter(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.row(y)[x0..x0 + w]);
        }
        Ok(Self::from_raw(w, h, data))
    }

    /// Centered `w`x`h` crop.
    pub fn crop_center(&self, w: usize, h: usize) -> Result<Self> {
        let x0 = self.width.saturating_sub(w) / 2;
        let y0 = self.height.saturating_sub(h) / 2;
        self.crop(x0, y0, w, h)
    }

    /// Bilinear sample at a real coordinate inside `[0, w-1] x [0, h-1]`.
    /// Integer coordinates return the stored pixel unchanged.
    #[inline]
    pub fn sample_bilinear(&self, x: T, y: T) -> T {
        let max_x = self.width - 1;
        let max_y = self.height - 1;
        let xf = x.floor();
        let yf = y.floor();
        let x0 = xf.to_usize().unwrap_or(0).min(max_x);
        let y0 = yf.to_usize().unwrap_or(0).min(max_y);
        let fx = x - xf;
        let fy = y - yf;
        if fx == T::zero() && fy == T::zero() {
            return self.get(x0, y0);
        }
        let x1 = (x0 + 1).min(max_x);
        let y1 = (y0 + 1).min(max_y);
        // nested lerp, exact on flat patches
        let top = self.get(x0, y0) + fx * (self.get(x1, y0) - self.get(x0, y0));
        let bottom = self.get(x0, y1) + fx * (self.get(x1, y1) - self.get(x0, y1));
        top + fy * (bottom - top)
    }
}

/// Affinely maps intensities so the result has the requested mean and
/// population standard deviation.
pub fn normalize_intensity<T: Scalar>(img: &Image<T>, target_mean: T, target_std: T) -> Result<Image<T>> {
    if img.len() < 2 {
        return Err(Error::InvalidParameter("normalization needs at least 2 pixels".into()));
    }
    if !(target_std > T::zero()) || !target_mean.is_finite() || !target_std.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "target std must be positive and finite, got {target_std}"
        )));
    }
    let (lo, hi) = img.min_max();
    let mean = img.mean();
    let std = img.std_dev();
    if lo == hi || !(std > T::zero()) {
        return Err(Error::ConstantImage("intensity normalization"));
    }
    let gain = target_std / std;
    img.map(|v| (v - mean) * gain + target_mean)
}

/// Bilinear resampling by `factor`, pixel-center aligned. Output size is
/// `round(w * factor) x round(h * factor)`.
pub fn resample<T: Scalar>(img: &Image<T>, factor: T) -> Result<Image<T>> {
    if !(factor > T::zero()) || !factor.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "resample factor must be positive, got {factor}"
        )));
    }
    let f = factor.to_f64_lossy();
    let out_w = (img.width() as f64 * f).round() as usize;
    let out_h = (img.height() as f64 * f).round() as usize;
    if out_w < 2 || out_h < 2 {
        return Err(Error::DegenerateSize {
            width: out_w,
            height: out_h,
        });
    }
    if out_w == img.width() && out_h == img.height() {
        return Ok(img.clone());
    }
    let half = T::lit(0.5);
    let sx = T::from_usize_lossy(img.width()) / T::from_usize_lossy(out_w);
    let sy = T::from_usize_lossy(img.height()) / T::from_usize_lossy(out_h);
    let max_x = T::from_usize_lossy(img.width() - 1);
    let max_y = T::from_usize_lossy(img.height() - 1);
    let xs: Vec<T> = (0..out_w)
        .map(|x| ((T::from_usize_lossy(x) + half) * sx - half).max(T::zero()).min(max_x))
        .collect();
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let src_y = ((T::from_usize_lossy(y) + half) * sy - half).max(T::zero()).min(max_y);
        data.extend(xs.iter().map(|&src_x| img.sample_bilinear(src_x, src_y)));
    }
    Ok(Image::from_raw(out_w, out_h, data))
}

/// Rotates counter-clockwise (as displayed, y pointing down) about the image
/// center. Output keeps the input dimensions; samples falling outside the
/// source are filled with the source mean.
pub fn rotate<T: Scalar>(img: &Image<T>, degrees: T) -> Image<T> {
    let turns = (degrees / T::lit(360.0)).fract();
    if turns == T::zero() {
        return img.clone();
    }
    let theta = degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let cx = T::from_usize_lossy(img.width() - 1) * T::lit(0.5);
    let cy = T::from_usize_lossy(img.height() - 1) * T::lit(0.5);
    let max_x = T::from_usize_lossy(img.width() - 1);
    let max_y = T::from_usize_lossy(img.height() - 1);
    // Coordinates within this slack of the support are clamped onto it.
    let slack = T::lit(1e-9);
    let fill = img.mean();
    let mut data = Vec::with_capacity(img.len());
    for y in 0..img.height() {
        let dy = T::from_usize_lossy(y) - cy;
        for x in 0..img.width() {
            let dx = T::from_usize_lossy(x) - cx;
            let sx = cx + cos * dx - sin * dy;
            let sy = cy + sin * dx + cos * dy;
            if sx < -slack || sy < -slack || sx > max_x + slack || sy > max_y + slack {
                data.push(fill);
                continue;
            }
            let sx = snap(sx.max(T::zero()).min(max_x), slack);
            let sy = snap(sy.max(T::zero()).min(max_y), slack);
            data.push(img.sample_bilinear(sx, sy));
        }
    }
    Image::from_raw(img.width(), img.height(), data)
}

fn snap<T: Scalar>(v: T, slack: T) -> T {
    let r = v.round();
    if (v - r).abs() <= slack {
        r
    } else {
        v
    }
}

/// Mean of squared intensities.
pub fn signal_power<T: Scalar>(img: &Image<T>) -> T {
    img.data().iter().map(|&v| v * v).sum::<T>() / T::from_usize_lossy(img.len())
}

/// Adds i.i.d. zero-mean Gaussian noise whose variance is
/// `signal_power / 10^(snr_db / 10)`. An infinite `snr_db` returns the
/// input unchanged.
pub fn add_gaussian_noise<T: Scalar>(img: &Image<T>, snr_db: f64, seed: u64) -> Result<Image<T>> {
    if snr_db.is_nan() {
        return Err(Error::InvalidParameter("SNR must not be NaN".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(img.clone());
    }
    let power = signal_power(img).to_f64_lossy();
    if !(power > 0.0) {
        return Err(Error::ConstantImage("signal-to-noise ratio"));
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(format!("noise sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    img.map(|v| v + T::lit(normal.sample(&mut rng)))
}
