use std::fs;

use fwlbp::eval::{corpus_dataset, cross_validate, extract_dataset_features, kfold_split, CorpusSpec, Dataset, Jitter};
use fwlbp::features::FeatureMatrix;
use fwlbp::{write_pgm_file, FittedPipeline, PipelineConfig};

fn small_config() -> PipelineConfig {
    PipelineConfig {
        folds: 4,
        seed: 11,
        ..Default::default()
    }
}

fn corpus() -> Dataset {
    corpus_dataset(&CorpusSpec::four_class(8, 64, 5, Jitter::default())).unwrap()
}

fn fit_on(ds: &Dataset, config: &PipelineConfig) -> String {
    let rows = extract_dataset_features(ds, config, None).unwrap();
    let fm = FeatureMatrix::from_rows(&rows)
        .unwrap()
        .with_labels(ds.labels())
        .unwrap();
    serde_json::to_string(&FittedPipeline::fit(&fm, config).unwrap()).unwrap()
}

#[test]
fn deleting_test_images_leaves_models_unchanged() {
    let config = small_config();
    let mem = corpus();
    let dir = tempfile::tempdir().unwrap();
    for s in mem.samples() {
        let path = dir.path().join(format!("{}.pgm", s.id));
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        write_pgm_file(&path, &s.load().unwrap(), 255).unwrap();
    }
    let ds = Dataset::from_dir(dir.path()).unwrap();
    let folds = kfold_split(&ds.labels(), config.folds, config.seed).unwrap();
    let test: Vec<usize> = (0..ds.len()).filter(|&i| folds[i] == 0).collect();

    let rows = extract_dataset_features(&ds, &config, None).unwrap();
    let labels = ds.labels();
    let train: Vec<usize> = (0..ds.len()).filter(|i| !test.contains(i)).collect();
    let fm = FeatureMatrix::from_rows(&train.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>())
        .unwrap()
        .with_labels(train.iter().map(|&i| labels[i]).collect())
        .unwrap();
    let before = serde_json::to_string(&FittedPipeline::fit(&fm, &config).unwrap()).unwrap();

    for &i in &test {
        let fwlbp::eval::ImageSource::File(p) = &ds.samples()[i].source else {
            panic!("expected file-backed sample");
        };
        fs::remove_file(p).unwrap();
    }
    let remaining = Dataset::from_dir(dir.path()).unwrap();
    assert_eq!(remaining.len(), train.len());
    assert_eq!(fit_on(&remaining, &config), before);
}

#[test]
fn cross_validation_is_bit_reproducible() {
    let ds = corpus();
    let config = small_config();
    let a = cross_validate(&ds, &config).unwrap();
    let b = cross_validate(&ds, &config).unwrap();
    assert_eq!(a.fold_accuracies, b.fold_accuracies);
    assert_eq!(a.confusion, b.confusion);
    assert_eq!(a.fold_accuracies.len(), 4);
}
