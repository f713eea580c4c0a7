use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fwlbp::eval::synth::SampleRecord;
use fwlbp::eval::{
    cross_validate, extract_dataset_features, invariance_csv, invariance_report, noise_sweep, rmax_sweep, CorpusSpec,
    Dataset, EvalReport, Jitter, JitterRange,
};
use fwlbp::export::{coordinates_csv, descriptors_to_csv, fd_to_pgm, DescriptorRecord};
use fwlbp::{
    compute_fd_image, extract_features, normalize_intensity, read_pgm_file, write_pgm_file, FeatureMatrix,
    FittedPipeline, GrayImage, NscModel, PcaModel, PipelineConfig, SqrtPlacement,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{read_config, ConfigArgs};
use crate::{EvalMode, JitterKind};

/// Output exists and `--force` was not given.
#[derive(Debug)]
pub struct Refuse(pub PathBuf);

impl fmt::Display for Refuse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} already exists; pass --force to overwrite", self.0.display())
    }
}

impl std::error::Error for Refuse {}

/// Argument problem only detectable after parsing.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Refuse>().is_some() {
        3
    } else if e.downcast_ref::<Usage>().is_some() {
        2
    } else {
        1
    }
}

fn guard_file(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Refuse(path.to_path_buf()).into());
    }
    Ok(())
}

// A directory counts as existing output only when it has entries.
fn prepare_dir(path: &Path, force: bool) -> Result<()> {
    if path.is_dir() {
        let occupied = fs::read_dir(path)
            .with_context(|| format!("reading {}", path.display()))?
            .next()
            .is_some();
        if occupied && !force {
            return Err(Refuse(path.to_path_buf()).into());
        }
    } else if path.exists() && !force {
        return Err(Refuse(path.to_path_buf()).into());
    }
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn collect_pgms(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')) {
            continue;
        }
        if p.is_dir() {
            collect_pgms(&p, out)?;
        } else if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            out.push(p);
        }
    }
    Ok(())
}

fn parent_label(path: &Path) -> String {
    path.parent()
        .and_then(Path::file_name)
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn extract(
    inputs: &[PathBuf],
    out: Option<&Path>,
    fd_dir: Option<&Path>,
    keep_going: bool,
    force: bool,
    args: &ConfigArgs,
) -> Result<()> {
    let config = args.resolve()?;
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            collect_pgms(input, &mut files)?;
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(Usage("no PGM files found in the given inputs".into()).into());
    }
    if let Some(out) = out {
        guard_file(out, force)?;
        guard_file(&out.with_extension("config.json"), force)?;
    }
    if let Some(dir) = fd_dir {
        prepare_dir(dir, force)?;
    }

    let raw = PipelineConfig {
        sqrt: SqrtPlacement::None,
        ..config.clone()
    };
    let results: Vec<Result<DescriptorRecord>> = files
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let img: GrayImage = read_pgm_file(path)?;
            let values = extract_features(&img, &raw, None)?;
            if let Some(dir) = fd_dir {
                let norm = normalize_intensity(&img, config.norm_mean, config.norm_std)?;
                let fd = compute_fd_image(&norm, config.descriptor().fd)?;
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                write(&dir.join(format!("{i:05}_{stem}.pgm")), fd_to_pgm(&fd)?)?;
            }
            Ok(DescriptorRecord {
                path: path.display().to_string(),
                label: parent_label(path),
                values,
            })
        })
        .collect();

    let mut records = Vec::with_capacity(results.len());
    let mut failures = 0usize;
    for (path, r) in files.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) if keep_going => {
                failures += 1;
                eprintln!("{}: {e:#}", path.display());
            }
            Err(e) => return Err(e.context(path.display().to_string())),
        }
    }
    let csv = descriptors_to_csv(&records)?;
    match out {
        Some(out) => {
            write(out, csv)?;
            write_json(&out.with_extension("config.json"), &config)?;
        }
        None => print!("{csv}"),
    }
    if failures > 0 {
        bail!("{failures} of {} files failed", files.len());
    }
    Ok(())
}

fn load_features(ds: &Dataset, config: &PipelineConfig) -> Result<FeatureMatrix> {
    let rows = extract_dataset_features(ds, config, None)?;
    Ok(FeatureMatrix::from_rows(&rows)?.with_labels(ds.labels())?)
}

pub fn fit(dataset: &Path, out: &Path, export_coords: bool, force: bool, args: &ConfigArgs) -> Result<()> {
    let config = args.resolve()?;
    let ds = Dataset::from_dir(dataset)?;
    prepare_dir(out, force)?;
    let fm = load_features(&ds, &config)?;
    let fitted = FittedPipeline::fit(&fm, &config)?;
    write_json(&out.join("pca.json"), &fitted.pca)?;
    write_json(&out.join("nsc.json"), &fitted.nsc)?;
    write_json(&out.join("config.json"), &config)?;
    write_json(&out.join("classes.json"), &ds.class_names())?;
    if export_coords {
        let coords = (0..fm.rows())
            .map(|i| fitted.transform(fm.row(i)))
            .collect::<fwlbp::Result<Vec<_>>>()?;
        let ids: Vec<String> = ds.samples().iter().map(|s| s.id.clone()).collect();
        let labels: Vec<String> = ds.samples().iter().map(|s| ds.class_names()[s.label].clone()).collect();
        write(&out.join("coordinates.csv"), coordinates_csv(&ids, &labels, &coords)?)?;
    }
    log::info!(
        "fitted {} samples, {} classes -> {}",
        ds.len(),
        ds.class_names().len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Residual {
    class: String,
    residual: f64,
}

#[derive(Serialize)]
struct Prediction {
    label: String,
    residuals: Vec<Residual>,
}

pub fn predict(model: &Path, image: &Path) -> Result<()> {
    let config = read_config(&model.join("config.json"))?;
    let pca: PcaModel = read_json(&model.join("pca.json"))?;
    let nsc: NscModel = read_json(&model.join("nsc.json"))?;
    let classes: Vec<String> = read_json(&model.join("classes.json"))?;
    if nsc.classes().iter().any(|&c| c >= classes.len()) {
        bail!(
            "classes.json lists {} names but the model uses more labels",
            classes.len()
        );
    }
    let fitted = FittedPipeline {
        pca,
        nsc,
        sqrt: config.sqrt,
    };
    let img: GrayImage = read_pgm_file(image)?;
    let features = extract_features(&img, &config, None)?;
    if features.len() != fitted.pca.input_dim() {
        bail!(
            "descriptor has {} dimensions but the model expects {}",
            features.len(),
            fitted.pca.input_dim()
        );
    }
    let mut residuals = fitted.residuals(&features)?;
    residuals.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let out = Prediction {
        label: classes[fitted.predict(&features)?].clone(),
        residuals: residuals
            .into_iter()
            .map(|(c, r)| Residual {
                class: classes[c].clone(),
                residual: r,
            })
            .collect(),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn fold_csv(report: &EvalReport) -> String {
    let mut s = String::from("fold,accuracy\n");
    for (i, a) in report.fold_accuracies.iter().enumerate() {
        s.push_str(&format!("{i},{a:.16e}\n"));
    }
    s
}

fn confusion_csv(report: &EvalReport) -> String {
    let mut s = String::from("true");
    for name in &report.class_names {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (name, row) in report.class_names.iter().zip(&report.confusion) {
        s.push_str(name);
        for v in row {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

fn invariance_image(input: &Path) -> Result<GrayImage> {
    if input.is_dir() {
        let ds = Dataset::from_dir(input)?;
        let first = ds.samples().first().ok_or_else(|| anyhow!("dataset is empty"))?;
        Ok(first.load()?)
    } else {
        Ok(read_pgm_file(input)?)
    }
}

pub fn eval(
    input: &Path,
    mode: EvalMode,
    out: &Path,
    levels: &[f64],
    rmax: &[usize],
    force: bool,
    args: &ConfigArgs,
) -> Result<()> {
    let config = args.resolve()?;
    if mode == EvalMode::Invariance {
        let img = invariance_image(input)?;
        prepare_dir(out, force)?;
        write_json(&out.join("config.json"), &config)?;
        let rows = invariance_report(&img, &config)?;
        let csv = invariance_csv(&rows);
        write(&out.join("invariance.csv"), &csv)?;
        write_json(&out.join("invariance.json"), &rows)?;
        print!("{csv}");
        return Ok(());
    }

    let ds = Dataset::from_dir(input)?;
    prepare_dir(out, force)?;
    write_json(&out.join("config.json"), &config)?;
    match mode {
        EvalMode::Cv => {
            let report = cross_validate(&ds, &config)?;
            write_json(&out.join("report.json"), &report)?;
            write(&out.join("report.txt"), report.table())?;
            write(&out.join("folds.csv"), fold_csv(&report))?;
            write(&out.join("confusion.csv"), confusion_csv(&report))?;
            print!("{}", report.table());
        }
        EvalMode::Noise => {
            if levels.is_empty() {
                return Err(Usage("--levels needs at least one value".into()).into());
            }
            let reports = noise_sweep(&ds, levels, &config)?;
            let mut csv = String::from("snr_db,mean,std\n");
            let mut text = String::new();
            for (snr, r) in levels.iter().zip(&reports) {
                csv.push_str(&format!("{snr},{:.16e},{:.16e}\n", r.mean, r.std));
                text.push_str(&r.table());
                text.push('\n');
            }
            write_json(&out.join("noise.json"), &reports)?;
            write(&out.join("noise.csv"), &csv)?;
            write(&out.join("report.txt"), &text)?;
            print!("{text}");
        }
        EvalMode::Rmax => {
            if rmax.is_empty() {
                return Err(Usage("--rmax needs at least one value".into()).into());
            }
            let outcomes = rmax_sweep(&ds, rmax, &config)?;
            let mut csv = String::from("r_max,mean,std,error\n");
            for o in &outcomes {
                match (&o.report, &o.error) {
                    (Some(r), _) => csv.push_str(&format!("{},{:.16e},{:.16e},\n", o.r_max, r.mean, r.std)),
                    (None, e) => csv.push_str(&format!(
                        "{},,,\"{}\"\n",
                        o.r_max,
                        e.as_deref().unwrap_or("").replace('"', "\"\"")
                    )),
                }
            }
            write_json(&out.join("rmax.json"), &outcomes)?;
            write(&out.join("rmax.csv"), &csv)?;
            print!("{csv}");
        }
        EvalMode::Invariance => unreachable!(),
    }
    Ok(())
}

/// Recipe plus the per-sample draws it produced.
#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    corpus: CorpusSpec,
    samples: Vec<SampleRecord>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestInput {
    Manifest(Manifest),
    Spec(CorpusSpec),
}

pub struct SynthArgs<'a> {
    pub out: &'a Path,
    pub manifest: Option<&'a Path>,
    pub samples: Option<usize>,
    pub size: Option<usize>,
    pub seed: Option<u64>,
    pub jitter: &'a [JitterKind],
    pub scale_range: &'a str,
    pub rotation_range: &'a str,
    pub force: bool,
}

fn parse_range(s: &str) -> Result<JitterRange> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Usage(format!("range {s:?} is not MIN:MAX")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Usage(format!("bad number in range {s:?}")))
    };
    let (min, max) = (parse(a)?, parse(b)?);
    if !(min <= max) {
        return Err(Usage(format!("range {s:?} has MIN > MAX")).into());
    }
    Ok(JitterRange::new(min, max))
}

pub fn synth(a: SynthArgs<'_>) -> Result<()> {
    let spec = match a.manifest {
        Some(p) => match read_json::<ManifestInput>(p)? {
            ManifestInput::Manifest(m) => m.corpus,
            ManifestInput::Spec(s) => s,
        },
        None => {
            let jitter = Jitter {
                scale: a
                    .jitter
                    .contains(&JitterKind::Scale)
                    .then(|| parse_range(a.scale_range))
                    .transpose()?,
                rotation: a
                    .jitter
                    .contains(&JitterKind::Rotation)
                    .then(|| parse_range(a.rotation_range))
                    .transpose()?,
            };
            CorpusSpec::four_class(
                a.samples.unwrap_or(20),
                a.size.unwrap_or(128),
                a.seed.unwrap_or(0),
                jitter,
            )
        }
    };
    prepare_dir(a.out, a.force)?;
    let records = spec.records();
    for class in &spec.classes {
        let dir = a.out.join(&class.name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    records.par_iter().try_for_each(|r| -> Result<()> {
        let img = spec.render(r)?;
        let path = a
            .out
            .join(&spec.classes[r.class].name)
            .join(format!("{:03}.pgm", r.index));
        write_pgm_file(&path, &img, 255)?;
        Ok(())
    })?;
    log::info!("wrote {} images to {}", records.len(), a.out.display());
    write_json(
        &a.out.join("manifest.json"),
        &Manifest {
            corpus: spec,
            samples: records,
        },
    )
}
