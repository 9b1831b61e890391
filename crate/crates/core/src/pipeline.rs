//! Manifest-driven analysis: detect, summarise, encode and score every
//! sample, then write one report.
//!
//! Samples are processed in parallel; results are collected in manifest order
//! so the report is independent of scheduling.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coding::{init_weights, psi_ppi, table1_fixture, CodeMatrix, PsiPpiGrid, WeightMatrix, WeightSource};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::signal::{read_timeseries_csv, ExperimentManifest, TimeSeries};
use crate::spikes::{aggregate_stats, compute_stats, detect_spikes, AggregateStats, SpikeStats, SpikeTrain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub label: String,
    /// Path as written in the manifest.
    pub source: PathBuf,
    pub stats: Option<SpikeStats>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub source: WeightSource,
    pub seed: Option<u64>,
    pub entries: WeightMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub samples: Vec<SampleReport>,
    pub aggregate: Option<AggregateStats>,
    pub code_matrix: CodeMatrix,
    pub weights: WeightReport,
    pub psi_ppi: PsiPpiGrid,
}

impl PipelineReport {
    pub fn failures(&self) -> usize {
        self.samples.iter().filter(|s| s.error.is_some()).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

pub struct PipelineOutcome {
    pub report: PipelineReport,
    /// Detected trains, `None` where the sample failed.
    pub trains: Vec<Option<SpikeTrain>>,
    /// Per-sample failures in manifest order.
    pub errors: Vec<(String, Error)>,
}

impl PipelineOutcome {
    /// Exit code of the first failure, or 0.
    pub fn exit_code(&self) -> i32 {
        self.errors.first().map_or(0, |(_, e)| e.exit_code())
    }
}

fn weights_for(source: WeightSource, n: usize, seed: u64) -> Result<WeightReport> {
    match source {
        WeightSource::Table1 => {
            let w = table1_fixture();
            if w.size() != n {
                return Err(Error::invalid(
                    "neuron_count",
                    format!("table1 weights need 10 neurons, configured {n}"),
                ));
            }
            Ok(WeightReport {
                source,
                seed: None,
                entries: w,
            })
        }
        WeightSource::Seeded => {
            let s = derive_seed(seed, "weights");
            Ok(WeightReport {
                source,
                seed: Some(s),
                entries: init_weights(n, s)?,
            })
        }
    }
}

/// Shared column count and seconds per column of the code matrix.
fn code_layout(series: &[Option<TimeSeries>], sample_count: Option<usize>) -> Result<(usize, f64)> {
    let loaded: Vec<&TimeSeries> = series.iter().flatten().collect();
    let shortest = loaded.iter().map(|s| s.len()).min().unwrap_or(0);
    let columns = match sample_count {
        Some(n) if n > shortest && !loaded.is_empty() => {
            return Err(Error::DimensionMismatch(format!(
                "sample_count {n} exceeds the shortest recording ({shortest} samples)"
            )))
        }
        Some(n) => n,
        None => shortest,
    };
    let time_base = loaded
        .first()
        .filter(|s| s.len() >= 2)
        .map_or(1.0, |s| s.times()[1] - s.times()[0]);
    Ok((columns, time_base))
}

pub fn run_pipeline(manifest: &ExperimentManifest) -> Result<PipelineOutcome> {
    manifest.validate()?;
    let n = manifest.coding.neuron_count;
    if manifest.sample_labels.len() > n {
        return Err(Error::Validation(format!(
            "{} samples for {n} neurons",
            manifest.sample_labels.len()
        )));
    }
    let weights = weights_for(manifest.weights, n, manifest.seed)?;

    let files = manifest.resolved_files();
    let per_sample: Vec<Result<(TimeSeries, SpikeTrain, SpikeStats)>> = files
        .par_iter()
        .zip(manifest.sample_labels.par_iter())
        .map(|(path, label)| {
            let series = read_timeseries_csv(path)?.with_label(label.clone());
            let train = detect_spikes(&series, &manifest.detection)?;
            let stats = compute_stats(&train);
            Ok((series, train, stats))
        })
        .collect();

    let mut samples = Vec::with_capacity(per_sample.len());
    let mut series = Vec::with_capacity(per_sample.len());
    let mut trains = Vec::with_capacity(per_sample.len());
    let mut errors = Vec::new();
    for ((result, label), source) in per_sample
        .into_iter()
        .zip(&manifest.sample_labels)
        .zip(&manifest.source_files)
    {
        match result {
            Ok((s, train, stats)) => {
                samples.push(SampleReport {
                    label: label.clone(),
                    source: source.clone(),
                    stats: Some(stats),
                    error: None,
                });
                series.push(Some(s));
                trains.push(Some(train));
            }
            Err(e) => {
                samples.push(SampleReport {
                    label: label.clone(),
                    source: source.clone(),
                    stats: None,
                    error: Some(e.to_string()),
                });
                series.push(None);
                trains.push(None);
                errors.push((label.clone(), e));
            }
        }
    }

    let stats: Vec<SpikeStats> = samples.iter().filter_map(|s| s.stats.clone()).collect();
    let aggregate = if stats.is_empty() {
        None
    } else {
        Some(aggregate_stats(&stats)?)
    };

    // one row per neuron truncated to a common length; failed samples and
    // unassigned neurons never cross the threshold
    let (columns, time_base) = code_layout(&series, manifest.coding.sample_count)?;
    let mut potentials: Vec<Vec<f64>> = series
        .iter()
        .map(|s| match s {
            Some(s) => s.values()[..columns].to_vec(),
            None => vec![f64::NEG_INFINITY; columns],
        })
        .collect();
    potentials.resize(n, vec![f64::NEG_INFINITY; columns]);
    let mut labels = manifest.sample_labels.clone();
    labels.extend((labels.len()..n).map(|j| format!("unassigned_{}", j + 1)));

    let code_matrix = crate::coding::encode(&potentials, manifest.coding.threshold)?
        .with_labels(labels)?
        .with_time_base(time_base);
    let grid = psi_ppi(&weights.entries, &code_matrix)?;

    Ok(PipelineOutcome {
        report: PipelineReport {
            seed: manifest.seed,
            samples,
            aggregate,
            code_matrix,
            weights,
            psi_ppi: grid,
        },
        trains,
        errors,
    })
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `report.json`, `heatmap.svg`, `psi_ppi.csv`, `codes.csv` and one
/// `trains/<label>.csv` per successful sample. Returns the report path.
pub fn write_outputs(outcome: &PipelineOutcome, dir: &Path) -> Result<PathBuf> {
    let trains_dir = dir.join("trains");
    std::fs::create_dir_all(&trains_dir).map_err(|e| Error::io(&trains_dir, e))?;
    let report = &outcome.report;
    let labels = &report.code_matrix.neuron_labels;

    let report_path = dir.join("report.json");
    write_file(&report_path, report.to_json().as_bytes())?;
    write_file(&dir.join("heatmap.svg"), report.psi_ppi.to_svg(labels).as_bytes())?;

    let mut buf = Vec::new();
    report
        .psi_ppi
        .write_csv(labels, &mut buf)
        .map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("psi_ppi.csv"), &buf)?;

    buf.clear();
    report.code_matrix.write_csv(&mut buf).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("codes.csv"), &buf)?;

    for (sample, train) in report.samples.iter().zip(&outcome.trains) {
        if let Some(train) = train {
            let path = trains_dir.join(format!("{}.csv", file_stem(&sample.label)));
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut out = std::io::BufWriter::new(file);
            train
                .write_csv(&mut out)
                .and_then(|_| out.flush())
                .map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(report_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::CodingConfig;
    use crate::signal::{write_timeseries_csv, Unit};

    fn manifest(dir: &Path, samples: &[(&str, Vec<f64>)]) -> ExperimentManifest {
        let mut files = Vec::new();
        for (label, values) in samples {
            let name = format!("{}.csv", file_stem(label));
            let s = TimeSeries::uniform(0.0, 1.0, values.clone(), Unit::Microampere, *label).unwrap();
            write_timeseries_csv(&s, &dir.join(&name)).unwrap();
            files.push(PathBuf::from(name));
        }
        ExperimentManifest {
            sample_labels: samples.iter().map(|(l, _)| l.to_string()).collect(),
            source_files: files,
            detection: Default::default(),
            coding: CodingConfig::default(),
            weights: WeightSource::Table1,
            seed: 1,
            base_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn single_flat_sample() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path(), &[("flat", vec![0.0; 30])]);
        let out = run_pipeline(&m).unwrap();
        assert_eq!(out.exit_code(), 0);
        let r = &out.report;
        assert_eq!(r.samples[0].stats.as_ref().unwrap().count, 0);
        assert!(r.psi_ppi.grid.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(r.code_matrix.neurons(), 10);
        assert_eq!(r.code_matrix.columns(), 30);
        assert_eq!(r.code_matrix.neuron_labels[1], "unassigned_2");
    }

    #[test]
    fn missing_file_is_a_partial_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(dir.path(), &[("a", vec![0.0, 0.001, 0.0, 0.0])]);
        m.sample_labels.push("gone".into());
        m.source_files.push("gone.csv".into());
        let out = run_pipeline(&m).unwrap();
        assert_eq!(out.exit_code(), 1);
        assert_eq!(out.report.failures(), 1);
        assert_eq!(out.report.samples[0].stats.as_ref().unwrap().count, 1);
        assert!(out.report.samples[1].error.is_some());
        // the active sample drives column 0 of the grid
        assert!((out.report.psi_ppi.grid[0][0] - -0.25).abs() < 1e-15);
        assert!(out.report.code_matrix.entries[1].iter().all(|&c| c == 0));
    }

    #[test]
    fn too_many_samples_for_network() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(dir.path(), &[("a", vec![0.0; 4]), ("b", vec![0.0; 4])]);
        m.coding.neuron_count = 1;
        m.weights = WeightSource::Seeded;
        assert!(matches!(run_pipeline(&m), Err(Error::Validation(_))));
    }

    #[test]
    fn table1_needs_ten_neurons() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(dir.path(), &[("a", vec![0.0; 4])]);
        m.coding.neuron_count = 4;
        assert!(run_pipeline(&m).is_err());
        m.weights = WeightSource::Seeded;
        let out = run_pipeline(&m).unwrap();
        assert_eq!(out.report.weights.entries.size(), 4);
    }

    #[test]
    fn outputs_written() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path(), &[("L-Glu:L-Asp", vec![0.0, 0.001, 0.0, 0.0])]);
        let out = run_pipeline(&m).unwrap();
        let dest = dir.path().join("out");
        let report = write_outputs(&out, &dest).unwrap();
        let text = std::fs::read_to_string(report).unwrap();
        let parsed: PipelineReport = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, out.report);
        assert!(dest.join("trains/L-Glu_L-Asp.csv").is_file());
        assert!(dest.join("heatmap.svg").is_file());
        assert!(dest.join("codes.csv").is_file());
    }
}
