//! Text and image export of descriptors, fractal-dimension maps and PCA
//! coordinates. Floats are written with 17 significant digits so they parse
//! back bit-exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractal::FdImage;
use crate::image::Image;
use crate::pgm::{write_pgm, PgmEncoding};

/// One image's descriptor with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorRecord {
    pub path: String,
    pub label: String,
    pub values: Vec<f64>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn descriptor_csv_header(dim: usize) -> String {
    let mut s = String::from("path,label");
    for i in 0..dim {
        s.push_str(&format!(",f{i}"));
    }
    s
}

pub fn descriptor_csv_row(record: &DescriptorRecord) -> String {
    let mut s = format!("{},{}", csv_field(&record.path), csv_field(&record.label));
    for &v in &record.values {
        s.push(',');
        s.push_str(&fmt_f64(v));
    }
    s
}

/// Header plus one row per record; all records must share a length.
pub fn descriptors_to_csv(records: &[DescriptorRecord]) -> Result<String> {
    let dim = records.first().map_or(0, |r| r.values.len());
    if records.iter().any(|r| r.values.len() != dim) {
        return Err(Error::ShapeMismatch("descriptor rows differ in length".into()));
    }
    let mut s = descriptor_csv_header(dim);
    s.push('\n');
    for r in records {
        s.push_str(&descriptor_csv_row(r));
        s.push('\n');
    }
    Ok(s)
}

// Splits one CSV line, honoring double-quoted fields.
fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

pub fn descriptors_from_csv(text: &str) -> Result<Vec<DescriptorRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty descriptor CSV".into()))?;
    let dim = split_csv_line(header).len().saturating_sub(2);
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let fields = split_csv_line(line);
            if fields.len() != dim + 2 {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    fields.len(),
                    dim + 2
                )));
            }
            let values = fields[2..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("row {}: bad number {f:?}", i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DescriptorRecord {
                path: fields[0].clone(),
                label: fields[1].clone(),
                values,
            })
        })
        .collect()
}

/// Linear map of `[min, max]` to `[0, 255]`; a flat map becomes mid-gray.
pub fn fd_to_pgm(fd: &FdImage<f64>) -> Result<Vec<u8>> {
    let img = fd.image();
    let (lo, hi) = img.min_max();
    let scaled = if hi > lo {
        img.map(|v| (v - lo) / (hi - lo) * 255.0)?
    } else {
        Image::filled(img.width(), img.height(), 128.0)?
    };
    write_pgm(&scaled, 255, PgmEncoding::Binary)
}

/// One line per image row, comma-separated.
pub fn image_to_csv(img: &Image<f64>) -> String {
    let mut s = String::with_capacity(img.len() * 24);
    for y in 0..img.height() {
        let row: Vec<String> = img.row(y).iter().map(|&v| fmt_f64(v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// `id,label,pc0,pc1,...` rows.
pub fn coordinates_csv(ids: &[String], labels: &[String], coords: &[Vec<f64>]) -> Result<String> {
    if ids.len() != coords.len() || labels.len() != coords.len() {
        return Err(Error::ShapeMismatch(
            "ids, labels and coordinates differ in length".into(),
        ));
    }
    let k = coords.first().map_or(0, Vec::len);
    let mut s = String::from("id,label");
    for i in 0..k {
        s.push_str(&format!(",pc{i}"));
    }
    s.push('\n');
    for ((id, label), row) in ids.iter().zip(labels).zip(coords) {
        s.push_str(&format!("{},{}", csv_field(id), csv_field(label)));
        for &v in row {
            s.push(',');
            s.push_str(&fmt_f64(v));
        }
        s.push('\n');
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_round_trip_with_awkward_names() {
        let records = vec![
            DescriptorRecord {
                path: "dir,with/comma \"q\".pgm".into(),
                label: "a".into(),
                values: vec![0.1, 1.0 / 3.0, 0.0, 5e-324],
            },
            DescriptorRecord {
                path: "b.pgm".into(),
                label: "b".into(),
                values: vec![1.0, f64::MIN_POSITIVE, 2.5e300, 0.7],
            },
        ];
        let csv = descriptors_to_csv(&records).unwrap();
        assert!(csv.starts_with("path,label,f0,f1,f2,f3\n"));
        assert_eq!(descriptors_from_csv(&csv).unwrap(), records);
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn json_round_trip() {
        let r = DescriptorRecord {
            path: "x".into(),
            label: "y".into(),
            values: vec![0.1 + 0.2, 1e-17, 2.0 / 7.0],
        };
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<DescriptorRecord>(&s).unwrap(), r);
    }

    #[test]
    fn fd_pgm_spans_full_range() {
        let fd = FdImage::new(Image::from_fn(4, 2, |x, _| 2.0 + x as f64 / 3.0).unwrap());
        let bytes = fd_to_pgm(&fd).unwrap();
        let back: Image<f64> = crate::pgm::load_pgm(&bytes).unwrap();
        assert_eq!(back.row(0), &[0.0, 85.0, 170.0, 255.0]);
        let flat = FdImage::new(Image::filled(3, 3, 2.0).unwrap());
        let back: Image<f64> = crate::pgm::load_pgm(&fd_to_pgm(&flat).unwrap()).unwrap();
        assert!(back.data().iter().all(|&v| v == 128.0));
    }

    #[test]
    fn image_csv_shape() {
        let img = Image::from_fn(3, 2, |x, y| (x + y) as f64).unwrap();
        let s = image_to_csv(&img);
        assert_eq!(s.lines().count(), 2);
        assert_eq!(s.lines().next().unwrap().split(',').count(), 3);
    }

    #[test]
    fn coordinates_shape() {
        let s = coordinates_csv(&["a".into()], &["c".into()], &[vec![1.0, -2.0]]).unwrap();
        assert!(s.starts_with("id,label,pc0,pc1\n"));
        assert!(coordinates_csv(&["a".into()], &[], &[vec![1.0]]).is_err());
    }
}
