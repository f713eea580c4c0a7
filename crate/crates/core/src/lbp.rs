//! Circular local binary patterns.
//!
//! Neighbor `k` of `N` sits at angle `2*pi*k/N`, offset `(R cos, -R sin)`
//! from the center (east first, counter-clockwise on screen). Bit `k` of the
//! code is set when that neighbor is `>=` the center, up to rounding for
//! interpolated neighbors. Pixels closer than
//! `ceil(R)` to the border carry no code.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

/// Largest supported neighbor count; codes must fit comfortably in `u32`.
pub const MAX_SAMPLES: usize = 24;

// Offsets within this distance of an integer are treated as lattice points.
const LATTICE_EPS: f64 = 1e-9;

/// Precomputed bilinear stencil for one neighbor.
#[derive(Debug, Clone, Copy)]
struct Stencil<T> {
    dx0: isize,
    dy0: isize,
    fx: T,
    fy: T,
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < LATTICE_EPS {
        r
    } else {
        v
    }
}

fn stencils<T: Scalar>(radius: f64, samples: usize) -> Vec<Stencil<T>> {
    (0..samples)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
            let dx = snap(radius * angle.cos());
            let dy = snap(-radius * angle.sin());
            let (fx0, fy0) = (dx.floor(), dy.floor());
            Stencil {
                dx0: fx0 as isize,
                dy0: fy0 as isize,
                fx: T::lit(dx - fx0),
                fy: T::lit(dy - fy0),
            }
        })
        .collect()
}

impl<T: Scalar> Stencil<T> {
    /// `sample >= center`. Interpolated samples that equal the center in
    /// exact arithmetic can land an ulp either side, so they compare with a
    /// rounding tolerance; lattice samples compare exactly.
    #[inline]
    fn at_least(&self, sample: T, center: T) -> bool {
        if self.fx == T::zero() && self.fy == T::zero() {
            sample >= center
        } else {
            sample >= center - T::epsilon() * T::lit(64.0) * (T::one() + center.abs())
        }
    }

    // Nested linear interpolation: a flat 2x2 patch returns its value
    // exactly, so ties against the center survive. Taps with zero weight are
    // never read; they may sit one pixel past the support.
    #[inline]
    fn sample(&self, img: &Image<T>, x: usize, y: usize) -> T {
        let x0 = (x as isize + self.dx0) as usize;
        let y0 = (y as isize + self.dy0) as usize;
        let zero = T::zero();
        let lerp_row = |yy: usize| {
            let a = img.get(x0, yy);
            if self.fx == zero {
                a
            } else {
                a + self.fx * (img.get(x0 + 1, yy) - a)
            }
        };
        let top = lerp_row(y0);
        if self.fy == zero {
            top
        } else {
            top + self.fy * (lerp_row(y0 + 1) - top)
        }
    }
}

fn border_width(radius: f64) -> usize {
    snap(radius).ceil() as usize
}

fn check_params(radius: f64, samples: usize) -> Result<()> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "LBP radius must be positive, got {radius}"
        )));
    }
    if samples == 0 || samples > MAX_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "LBP sample count must be in 1..={MAX_SAMPLES}, got {samples}"
        )));
    }
    Ok(())
}

/// Intensities of the `samples` circular neighbors of `(x, y)`.
pub fn sample_neighbors<T: Scalar>(img: &Image<T>, x: usize, y: usize, radius: f64, samples: usize) -> Result<Vec<T>> {
    check_params(radius, samples)?;
    let b = border_width(radius);
    let (w, h) = img.dims();
    if x < b || y < b || x + b >= w || y + b >= h {
        return Err(Error::BorderViolation { x, y });
    }
    Ok(stencils(radius, samples).iter().map(|s| s.sample(img, x, y)).collect())
}

/// LBP codes for one `(R, N)` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LbpImage {
    width: usize,
    height: usize,
    codes: Vec<u32>,
    radius: f64,
    samples: usize,
    border: usize,
}

impl LbpImage {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Width of the band along every edge that carries no code.
    pub fn border(&self) -> usize {
        self.border
    }

    /// Number of distinct codes, `2^N`.
    pub fn code_count(&self) -> usize {
        1usize << self.samples
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        x >= self.border && y >= self.border && x + self.border < self.width && y + self.border < self.height
    }

    #[inline]
    pub fn code(&self, x: usize, y: usize) -> Option<u32> {
        self.is_valid(x, y).then(|| self.codes[y * self.width + x])
    }

    pub fn valid_count(&self) -> usize {
        (self.width - 2 * self.border) * (self.height - 2 * self.border)
    }

    /// `(x, y, code)` for every valid pixel, row-major.
    pub fn valid_codes(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        let b = self.border;
        (b..self.height - b).flat_map(move |y| (b..self.width - b).map(move |x| (x, y, self.codes[y * self.width + x])))
    }
}

pub fn lbp_image<T: Scalar>(img: &Image<T>, radius: f64, samples: usize) -> Result<LbpImage> {
    check_params(radius, samples)?;
    let border = border_width(radius);
    let (w, h) = img.dims();
    if w <= 2 * border || h <= 2 * border {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            reason: format!("LBP radius {radius} leaves no interior pixels"),
        });
    }
    let st = stencils::<T>(radius, samples);
    let mut codes = vec![0u32; w * h];
    for y in border..h - border {
        for x in border..w - border {
            let center = img.get(x, y);
            let mut code = 0u32;
            for (k, s) in st.iter().enumerate() {
                if s.at_least(s.sample(img, x, y), center) {
                    code |= 1 << k;
                }
            }
            codes[y * w + x] = code;
        }
    }
    Ok(LbpImage {
        width: w,
        height: h,
        codes,
        radius,
        samples,
        border,
    })
}
