//! PGM (P2 ASCII / P5 binary) reading and writing.
//!
//! Samples are read as exact integers and stored as reals; writing rounds
//! to the nearest integer and clamps to `[0, maxval]`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmEncoding {
    Ascii,
    Binary,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn header_uint(&mut self, what: &str) -> Result<usize> {
        let tok = self.token().ok_or_else(|| Error::Parse(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("bad {what}: {:?}", String::from_utf8_lossy(tok))))
    }
}

/// Decodes a P2 or P5 byte stream.
pub fn load_pgm<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    if bytes.len() < 2 {
        return Err(Error::Parse("file shorter than the magic number".into()));
    }
    let encoding = match &bytes[..2] {
        b"P2" => PgmEncoding::Ascii,
        b"P5" => PgmEncoding::Binary,
        other => return Err(Error::UnsupportedFormat(String::from_utf8_lossy(other).into_owned())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    if cur.pos < bytes.len() && !bytes[cur.pos].is_ascii_whitespace() && bytes[cur.pos] != b'#' {
        return Err(Error::Parse("magic number not followed by whitespace".into()));
    }
    let width = cur.header_uint("width")?;
    let height = cur.header_uint("height")?;
    let maxval = cur.header_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Parse(format!("zero dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse(format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::Parse("dimensions overflow".into()))?;
    let mut data = Vec::with_capacity(count);

    match encoding {
        PgmEncoding::Ascii => {
            while data.len() < count {
                let Some(tok) = cur.token() else { break };
                let v = std::str::from_utf8(tok)
                    .ok()
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| Error::Parse(format!("bad sample {:?}", String::from_utf8_lossy(tok))))?;
                if v > maxval {
                    return Err(Error::Parse(format!("sample {v} exceeds maxval {maxval}")));
                }
                data.push(T::from_usize_lossy(v));
            }
        }
        PgmEncoding::Binary => {
            // exactly one whitespace byte separates maxval from the raster
            if cur.pos >= bytes.len() {
                return Err(Error::Truncated {
                    expected: count,
                    found: 0,
                });
            }
            let raster = &bytes[cur.pos + 1..];
            let wide = maxval > 255;
            let stride = if wide { 2 } else { 1 };
            let available = raster.len() / stride;
            for i in 0..available.min(count) {
                let v = if wide {
                    u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as usize
                } else {
                    raster[i] as usize
                };
                if v > maxval {
                    return Err(Error::Parse(format!("sample {v} exceeds maxval {maxval}")));
                }
                data.push(T::from_usize_lossy(v));
            }
        }
    }
    if data.len() < count {
        return Err(Error::Truncated {
            expected: count,
            found: data.len(),
        });
    }
    Image::new(width, height, data)
}

/// Encodes an image, rounding and clamping each value to `[0, maxval]`.
pub fn write_pgm<T: Scalar>(img: &Image<T>, maxval: u16, encoding: PgmEncoding) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::InvalidParameter("maxval must be positive".into()));
    }
    let quantize = |v: T| -> u16 {
        let v = v.to_f64_lossy().round();
        v.clamp(0.0, maxval as f64) as u16
    };
    let (w, h) = img.dims();
    let magic = match encoding {
        PgmEncoding::Ascii => "P2",
        PgmEncoding::Binary => "P5",
    };
    let mut out = format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes();
    match encoding {
        PgmEncoding::Ascii => {
            for y in 0..h {
                let line: Vec<String> = img.row(y).iter().map(|&v| quantize(v).to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        PgmEncoding::Binary => {
            for &v in img.data() {
                let q = quantize(v);
                if maxval > 255 {
                    out.extend_from_slice(&q.to_be_bytes());
                } else {
                    out.push(q as u8);
                }
            }
        }
    }
    Ok(out)
}

pub fn read_pgm_file<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    load_pgm(&bytes)
}

pub fn write_pgm_file<T: Scalar>(path: impl AsRef<Path>, img: &Image<T>, maxval: u16) -> Result<()> {
    let path = path.as_ref();
    let bytes = write_pgm(img, maxval, PgmEncoding::Binary)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
