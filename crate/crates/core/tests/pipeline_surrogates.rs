use std::path::PathBuf;

use approx::assert_relative_eq;
use protoneuro_core::pipeline::{run_pipeline, write_outputs};
use protoneuro_core::signal::{synthesize_spiky_series, write_timeseries_csv, ExperimentManifest, SyntheticSpikeSpec};
use protoneuro_core::tables::TABLE2;

fn surrogate_manifest(dir: &std::path::Path, weights: &str, neurons: usize) -> ExperimentManifest {
    let mut labels = Vec::new();
    let mut files = Vec::new();
    for (i, row) in TABLE2.iter().enumerate() {
        let spec = SyntheticSpikeSpec::regular(row.count, row.mean_isi_s, 0.2, 100 + i as u64);
        let name = format!("s{i:02}.csv");
        write_timeseries_csv(&synthesize_spiky_series(&spec).unwrap(), &dir.join(&name)).unwrap();
        labels.push(row.label.to_string());
        files.push(PathBuf::from(name));
    }
    let json = serde_json::json!({
        "sample_labels": labels,
        "source_files": files,
        "coding": { "neuron_count": neurons },
        "weights": weights,
        "seed": 9,
    });
    let path = dir.join("manifest.json");
    std::fs::write(&path, json.to_string()).unwrap();
    ExperimentManifest::load(&path).unwrap()
}

#[test]
fn twelve_surrogates_reproduce_table_counts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = surrogate_manifest(dir.path(), "seeded", 12);
    let outcome = run_pipeline(&manifest).unwrap();
    assert!(outcome.errors.is_empty());

    let report = &outcome.report;
    for (sample, row) in report.samples.iter().zip(TABLE2.iter()) {
        assert_eq!(sample.stats.as_ref().unwrap().count, row.count, "{}", row.label);
    }
    let agg = report.aggregate.as_ref().unwrap();
    assert_eq!(agg.samples, 12);
    assert_relative_eq!(agg.mean_count, 348.58, max_relative = 0.02);
    assert_relative_eq!(agg.mean_isi_of_means_s.unwrap(), 459.0, max_relative = 0.02);

    assert_eq!(report.code_matrix.neurons(), 12);
    assert_eq!(report.psi_ppi.grid.len(), 12);
    assert!(report
        .weights
        .entries
        .entries()
        .iter()
        .flatten()
        .all(|w| (-1.0..=1.0).contains(w)));

    let out = dir.path().join("out");
    write_outputs(&outcome, &out).unwrap();
    for name in ["report.json", "heatmap.svg", "psi_ppi.csv", "codes.csv"] {
        assert!(out.join(name).is_file(), "{name}");
    }
    assert_eq!(std::fs::read_dir(out.join("trains")).unwrap().count(), 12);
}

#[test]
fn table1_weights_need_ten_neurons() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = surrogate_manifest(dir.path(), "table1", 12);
    let err = run_pipeline(&manifest).err().unwrap();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn different_seeds_change_weights_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = surrogate_manifest(dir.path(), "seeded", 12);
    let a = run_pipeline(&manifest).unwrap().report;
    manifest.seed += 1;
    let b = run_pipeline(&manifest).unwrap().report;
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.code_matrix, b.code_matrix);
    assert_ne!(a.weights.entries, b.weights.entries);
}
