//! Procedural textures used as a stand-in corpus.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{resample, rotate, Image};

pub const MIN_SIZE: usize = 64;

/// Texture family plus its parameters. Phases, positions and spectra are
/// drawn from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TextureSpec {
    /// Plane wave; `frequency` in cycles per pixel.
    Sinusoid {
        frequency: f64,
        orientation_deg: f64,
        amplitude: f64,
    },
    /// Soft-edged checkerboard; `period` in pixels, larger `sharpness` gives
    /// harder edges.
    Checker {
        period: f64,
        orientation_deg: f64,
        sharpness: f64,
    },
    /// Power-law spectrum `|f|^(-beta)`; smaller `beta` is rougher.
    FractalNoise { beta: f64 },
    /// Random Gaussian bumps of standard deviation `radius`; `density` is
    /// the expected number of bumps per 1000 pixels.
    Blob { density: f64, radius: f64 },
}

impl TextureSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TextureSpec::Sinusoid { .. } => "sinusoid",
            TextureSpec::Checker { .. } => "checker",
            TextureSpec::FractalNoise { .. } => "fractal_noise",
            TextureSpec::Blob { .. } => "blob",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            TextureSpec::Sinusoid {
                frequency,
                orientation_deg,
                amplitude,
            } => {
                if !(0.0..=0.5).contains(&frequency) {
                    return bad(format!("sinusoid frequency must be in [0, 0.5], got {frequency}"));
                }
                if !orientation_deg.is_finite() || !(amplitude >= 0.0) || !amplitude.is_finite() {
                    return bad("sinusoid orientation and amplitude must be finite, amplitude >= 0".into());
                }
            }
            TextureSpec::Checker {
                period,
                orientation_deg,
                sharpness,
            } => {
                if !(period >= 2.0) || !period.is_finite() {
                    return bad(format!("checker period must be >= 2, got {period}"));
                }
                if !orientation_deg.is_finite() || !(sharpness > 0.0) || !sharpness.is_finite() {
                    return bad("checker orientation must be finite and sharpness positive".into());
                }
            }
            TextureSpec::FractalNoise { beta } => {
                if !(beta > 0.0 && beta < 6.0) {
                    return bad(format!("spectral exponent must be in (0, 6), got {beta}"));
                }
            }
            TextureSpec::Blob { density, radius } => {
                if !(density > 0.0) || !density.is_finite() || !(radius > 0.0) || !radius.is_finite() {
                    return bad(format!(
                        "blob needs positive density and radius, got {density}, {radius}"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Square texture of side `size`, deterministic per `(spec, seed)`.
pub fn synth_texture(spec: &TextureSpec, size: usize, seed: u64) -> Result<Image<f64>> {
    if size < MIN_SIZE {
        return Err(Error::InvalidParameter(format!(
            "texture size must be >= {MIN_SIZE}, got {size}"
        )));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match *spec {
        TextureSpec::Sinusoid {
            frequency,
            orientation_deg,
            amplitude,
        } => {
            let phase = rng.random::<f64>() * 2.0 * PI;
            let (s, c) = orientation_deg.to_radians().sin_cos();
            Image::from_fn(size, size, |x, y| {
                let t = x as f64 * c + y as f64 * s;
                128.0 + amplitude * (2.0 * PI * frequency * t + phase).sin()
            })
        }
        TextureSpec::Checker {
            period,
            orientation_deg,
            sharpness,
        } => {
            let (px, py) = (rng.random::<f64>() * period, rng.random::<f64>() * period);
            let (s, c) = orientation_deg.to_radians().sin_cos();
            Image::from_fn(size, size, |x, y| {
                let (x, y) = (x as f64, y as f64);
                let u = x * c + y * s + px;
                let v = -x * s + y * c + py;
                let w = (PI * u / period).sin() * (PI * v / period).sin();
                128.0 + 60.0 * (sharpness * w).tanh()
            })
        }
        TextureSpec::FractalNoise { beta } => fractal_noise(size, beta, &mut rng),
        TextureSpec::Blob { density, radius } => {
            let count = ((density * (size * size) as f64 / 1000.0).round() as usize).max(1);
            let bumps: Vec<(f64, f64, f64)> = (0..count)
                .map(|_| {
                    let amp = if rng.random::<bool>() { 1.0 } else { -1.0 } * (0.5 + rng.random::<f64>());
                    (
                        rng.random::<f64>() * size as f64,
                        rng.random::<f64>() * size as f64,
                        amp,
                    )
                })
                .collect();
            let inv = 1.0 / (2.0 * radius * radius);
            let reach = (6.0 * radius).ceil();
            let mut field = vec![0.0; size * size];
            for &(bx, by, amp) in &bumps {
                let y0 = (by - reach).max(0.0) as usize;
                let y1 = ((by + reach) as usize).min(size - 1);
                let x0 = (bx - reach).max(0.0) as usize;
                let x1 = ((bx + reach) as usize).min(size - 1);
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
                        field[y * size + x] += amp * (-d2 * inv).exp();
                    }
                }
            }
            rescale(size, field, 40.0)
        }
    }
}

fn rescale(size: usize, field: Vec<f64>, target_std: f64) -> Result<Image<f64>> {
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let std = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let gain = if std > 0.0 { target_std / std } else { 0.0 };
    Image::new(
        size,
        size,
        field.into_iter().map(|v| 128.0 + (v - mean) * gain).collect(),
    )
}

// Random complex spectrum with amplitude |f|^(-beta/2), inverse-transformed;
// the real part is a Gaussian field with power spectrum |f|^(-beta).
fn fractal_noise(size: usize, beta: f64, rng: &mut ChaCha8Rng) -> Result<Image<f64>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let freq = |i: usize| {
        let k = if i <= size / 2 {
            i as f64
        } else {
            i as f64 - size as f64
        };
        k / size as f64
    };
    let mut spectrum: Vec<Complex<f64>> = Vec::with_capacity(size * size);
    for v in 0..size {
        for u in 0..size {
            let f = (freq(u).powi(2) + freq(v).powi(2)).sqrt();
            let (re, im) = (normal.sample(rng), normal.sample(rng));
            let amp = if f == 0.0 { 0.0 } else { f.powf(-beta / 2.0) };
            spectrum.push(Complex::new(re * amp, im * amp));
        }
    }
    let fft = FftPlanner::new().plan_fft_inverse(size);
    for row in spectrum.chunks_mut(size) {
        fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); size];
    for x in 0..size {
        for (y, c) in column.iter_mut().enumerate() {
            *c = spectrum[y * size + x];
        }
        fft.process(&mut column);
        for (y, c) in column.iter().enumerate() {
            spectrum[y * size + x] = *c;
        }
    }
    rescale(size, spectrum.into_iter().map(|c| c.re).collect(), 40.0)
}

/// Texture seen at zoom `scale` and rotated by `rotation_deg`, cropped to
/// `size x size` from a larger synthesized patch so no fill is visible.
pub fn synth_transformed(
    spec: &TextureSpec,
    size: usize,
    seed: u64,
    scale: f64,
    rotation_deg: f64,
) -> Result<Image<f64>> {
    if !(scale > 0.0) || !scale.is_finite() || !rotation_deg.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "jitter must be finite with positive scale, got scale {scale}, rotation {rotation_deg}"
        )));
    }
    if scale == 1.0 && rotation_deg == 0.0 {
        return synth_texture(spec, size, seed);
    }
    let needed = size as f64 * std::f64::consts::SQRT_2 + 4.0;
    let base_size = ((needed / scale).ceil() as usize).max(MIN_SIZE);
    let base = synth_texture(spec, base_size, seed)?;
    let zoomed = resample(&base, scale)?;
    let turned = rotate(&zoomed, rotation_deg);
    turned.crop_center(size, size)
}

/// Range a jitter parameter is drawn from, uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterRange {
    pub min: f64,
    pub max: f64,
}

impl JitterRange {
    pub fn new(min: f64, max: f64) -> Self {
        JitterRange { min, max }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.max > self.min {
            rng.random_range(self.min..=self.max)
        } else {
            self.min
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Jitter {
    pub scale: Option<JitterRange>,
    pub rotation: Option<JitterRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub texture: TextureSpec,
}

/// Recipe for a labelled corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub classes: Vec<ClassSpec>,
    pub samples_per_class: usize,
    pub size: usize,
    pub seed: u64,
    #[serde(default)]
    pub jitter: Jitter,
}

/// Parameters that generated one corpus image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub class: usize,
    pub index: usize,
    pub seed: u64,
    pub scale: f64,
    pub rotation_deg: f64,
}

impl CorpusSpec {
    /// Four visually distinct classes, one per texture family.
    pub fn four_class(samples_per_class: usize, size: usize, seed: u64, jitter: Jitter) -> Self {
        let classes = [
            (
                "sinusoid",
                TextureSpec::Sinusoid {
                    frequency: 0.08,
                    orientation_deg: 30.0,
                    amplitude: 50.0,
                },
            ),
            (
                "checker",
                TextureSpec::Checker {
                    period: 10.0,
                    orientation_deg: 0.0,
                    sharpness: 3.0,
                },
            ),
            ("fractal_noise", TextureSpec::FractalNoise { beta: 2.4 }),
            (
                "blob",
                TextureSpec::Blob {
                    density: 10.0,
                    radius: 3.0,
                },
            ),
        ];
        CorpusSpec {
            classes: classes
                .into_iter()
                .map(|(name, texture)| ClassSpec {
                    name: name.into(),
                    texture,
                })
                .collect(),
            samples_per_class,
            size,
            seed,
            jitter,
        }
    }

    /// Per-sample seeds and transform parameters, drawn in a fixed order.
    pub fn records(&self) -> Vec<SampleRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.classes.len() * self.samples_per_class);
        for class in 0..self.classes.len() {
            for index in 0..self.samples_per_class {
                let seed = rng.random::<u64>();
                let scale = self.jitter.scale.map_or(1.0, |r| r.draw(&mut rng));
                let rotation_deg = self.jitter.rotation.map_or(0.0, |r| r.draw(&mut rng));
                out.push(SampleRecord {
                    class,
                    index,
                    seed,
                    scale,
                    rotation_deg,
                });
            }
        }
        out
    }

    pub fn render(&self, record: &SampleRecord) -> Result<Image<f64>> {
        let class = self
            .classes
            .get(record.class)
            .ok_or_else(|| Error::InvalidParameter(format!("record names class {}", record.class)))?;
        synth_transformed(
            &class.texture,
            self.size,
            record.seed,
            record.scale,
            record.rotation_deg,
        )
    }
}

/// Twelve textures, three parameter settings per family.
pub fn texture_suite() -> Vec<TextureSpec> {
    let mut out = Vec::with_capacity(12);
    for (f, o) in [(0.05, 0.0), (0.09, 35.0), (0.14, 70.0)] {
        out.push(TextureSpec::Sinusoid {
            frequency: f,
            orientation_deg: o,
            amplitude: 50.0,
        });
    }
    for (p, o) in [(8.0, 0.0), (12.0, 20.0), (16.0, 45.0)] {
        out.push(TextureSpec::Checker {
            period: p,
            orientation_deg: o,
            sharpness: 3.0,
        });
    }
    for beta in [2.2, 2.6, 3.0] {
        out.push(TextureSpec::FractalNoise { beta });
    }
    for (density, radius) in [(6.0, 4.0), (10.0, 3.0), (20.0, 2.0)] {
        out.push(TextureSpec::Blob { density, radius });
    }
    out
}
