//! Time-series carrier, CSV persistence and synthetic spiking recordings.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Microampere,
    Volt,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Microampere => "microampere",
            Unit::Volt => "volt",
        })
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "microampere" | "uA" | "µA" => Ok(Unit::Microampere),
            "volt" | "V" => Ok(Unit::Volt),
            other => Err(format!("unknown unit `{other}`")),
        }
    }
}

/// A validated recording: strictly increasing times, finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    unit: Unit,
    label: String,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, unit: Unit, label: impl Into<String>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Validation("time series must hold at least one sample".into()));
        }
        if times.len() != values.len() {
            return Err(Error::Validation(format!(
                "{} time stamps but {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::Validation(format!("non-finite time at index {i}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite value at index {i}")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "time stamps not strictly increasing at index {} ({} then {})",
                i + 1,
                times[i],
                times[i + 1]
            )));
        }
        Ok(TimeSeries {
            times,
            values,
            unit,
            label: label.into(),
        })
    }

    /// Samples at `t0, t0 + dt, ...`.
    pub fn uniform(t0: f64, dt: f64, values: Vec<f64>, unit: Unit, label: impl Into<String>) -> Result<Self> {
        let times = (0..values.len()).map(|i| t0 + i as f64 * dt).collect();
        TimeSeries::new(times, values, unit, label)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Span between the first and last sample.
    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Writes `time_s,value`, then `# unit=` and `# label=` comment lines, then
/// one row per sample. Numbers use the shortest decimal form that parses back
/// to the identical `f64`.
pub fn write_timeseries<W: Write>(series: &TimeSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "time_s,value")?;
    writeln!(out, "# unit={}", series.unit)?;
    writeln!(out, "# label={}", series.label)?;
    for (t, v) in series.times.iter().zip(&series.values) {
        writeln!(out, "{t},{v}")?;
    }
    Ok(())
}

pub fn write_timeseries_csv(series: &TimeSeries, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_timeseries(series, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Parses the layout produced by [`write_timeseries`]. Comment lines may
/// appear anywhere after the header. A four-column `time_s,value,unit,label`
/// header is also accepted, provided unit and label are constant.
pub fn read_timeseries<R: BufRead>(input: R, origin: &Path) -> Result<TimeSeries> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut lines = input.lines().enumerate();
    let wide = loop {
        match lines.next() {
            None => return Err(parse_err(1, "missing header".into())),
            Some((_, Err(e))) => return Err(Error::io(origin, e)),
            Some((_, Ok(l))) if l.trim().is_empty() => continue,
            Some((i, Ok(l))) => match l.trim() {
                "time_s,value" => break false,
                "time_s,value,unit,label" => break true,
                other => {
                    return Err(parse_err(
                        i + 1,
                        format!("expected header `time_s,value`, found `{other}`"),
                    ))
                }
            },
        }
    };

    let mut unit: Option<Unit> = None;
    let mut label: Option<String> = None;
    let mut times = Vec::new();
    let mut values = Vec::new();

    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim_start();
            if let Some(u) = comment.strip_prefix("unit=") {
                unit = Some(u.parse().map_err(|m| parse_err(lineno, m))?);
            } else if let Some(l) = comment.strip_prefix("label=") {
                label = Some(l.to_string());
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.splitn(4, ',').collect();
        let expected = if wide { 4 } else { 2 };
        if fields.len() != expected {
            return Err(parse_err(
                lineno,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let num = |s: &str, what: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("bad {what} `{s}`: {e}")))
        };
        let t = num(fields[0], "time")?;
        let v = num(fields[1], "value")?;
        if !v.is_finite() || !t.is_finite() {
            return Err(Error::Validation(format!(
                "{}:{lineno}: non-finite number",
                origin.display()
            )));
        }
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::Validation(format!(
                    "{}:{lineno}: time {t} does not exceed previous time {prev}",
                    origin.display()
                )));
            }
        }
        if wide {
            let u: Unit = fields[2].parse().map_err(|m| parse_err(lineno, m))?;
            if unit.is_some_and(|prev| prev != u) {
                return Err(parse_err(lineno, "unit changes mid-file".into()));
            }
            unit = Some(u);
            let l = fields[3].to_string();
            if label.as_ref().is_some_and(|prev| *prev != l) {
                return Err(parse_err(lineno, "label changes mid-file".into()));
            }
            label = Some(l);
        }
        times.push(t);
        values.push(v);
    }

    TimeSeries::new(times, values, unit.unwrap_or_default(), label.unwrap_or_default())
}

pub fn read_timeseries_csv(path: &Path) -> Result<TimeSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_timeseries(BufReader::new(file), path)
}

/// Where spikes go in a synthetic recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpikePlacement {
    /// Explicit spike times in seconds.
    Times { spike_times: Vec<f64> },
    /// `count` spikes at a regular `mean_isi` spacing. Interior spikes are
    /// displaced uniformly by up to `jitter_fraction / 2` of an interval; the
    /// first and last stay on the grid so the realised mean interval is exact.
    Regular {
        count: usize,
        mean_isi: f64,
        #[serde(default)]
        jitter_fraction: f64,
    },
}

/// Recipe for a synthetic current trace sampled once per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpikeSpec {
    pub duration: f64,
    #[serde(flatten)]
    pub placement: SpikePlacement,
    #[serde(default = "default_amplitude")]
    pub spike_amplitude: f64,
    /// Half width at half maximum of each Gaussian bump, seconds.
    #[serde(default = "default_half_width")]
    pub spike_half_width: f64,
    #[serde(default)]
    pub baseline: f64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub label: String,
}

fn default_amplitude() -> f64 {
    0.001
}

fn default_half_width() -> f64 {
    1.5
}

/// Sampling interval of synthetic recordings (the data logger's one sample
/// per second).
pub const SYNTHETIC_SAMPLE_INTERVAL: f64 = 1.0;

impl SyntheticSpikeSpec {
    /// Regularly spaced spikes with the first one half an interval in.
    pub fn regular(count: usize, mean_isi: f64, jitter_fraction: f64, seed: u64) -> Self {
        SyntheticSpikeSpec {
            duration: (count as f64 * mean_isi).ceil(),
            placement: SpikePlacement::Regular {
                count,
                mean_isi,
                jitter_fraction,
            },
            spike_amplitude: default_amplitude(),
            spike_half_width: default_half_width(),
            baseline: 0.0,
            noise_sd: 0.0,
            seed,
            label: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::invalid("duration", "must be finite and >= 0"));
        }
        if !(self.spike_amplitude.is_finite() && self.spike_amplitude > 0.0) {
            return Err(Error::invalid("spike_amplitude", "must be > 0"));
        }
        if !(self.spike_half_width.is_finite() && self.spike_half_width > 0.0) {
            return Err(Error::invalid("spike_half_width", "must be > 0"));
        }
        if !self.baseline.is_finite() {
            return Err(Error::invalid("baseline", "must be finite"));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::invalid("noise_sd", "must be >= 0"));
        }
        match &self.placement {
            SpikePlacement::Times { spike_times } => {
                if spike_times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("spike_times", "must be strictly increasing"));
                }
                if spike_times
                    .iter()
                    .any(|t| !t.is_finite() || *t < 0.0 || *t > self.duration)
                {
                    return Err(Error::invalid("spike_times", "must lie within [0, duration]"));
                }
            }
            SpikePlacement::Regular {
                count,
                mean_isi,
                jitter_fraction,
            } => {
                if *count > 0 && !(mean_isi.is_finite() && *mean_isi > 0.0) {
                    return Err(Error::invalid("mean_isi", "must be > 0"));
                }
                if !(0.0..1.0).contains(jitter_fraction) {
                    return Err(Error::invalid("jitter_fraction", "must lie in [0, 1)"));
                }
                if *count as f64 * mean_isi > self.duration {
                    return Err(Error::invalid(
                        "duration",
                        format!("{count} spikes at {mean_isi} s spacing do not fit"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Resolved spike times. Regular placements consume the seeded stream.
    pub fn spike_times<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match &self.placement {
            SpikePlacement::Times { spike_times } => spike_times.clone(),
            SpikePlacement::Regular {
                count,
                mean_isi,
                jitter_fraction,
            } => {
                let half = 0.5 * jitter_fraction * mean_isi;
                (0..*count)
                    .map(|k| {
                        let nominal = (k as f64 + 0.5) * mean_isi;
                        if k == 0 || k + 1 == *count || half == 0.0 {
                            nominal
                        } else {
                            nominal + rng.random_range(-half..=half)
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Baseline plus one Gaussian bump per spike plus white noise, sampled at
/// `0, 1, ..., floor(duration)` seconds.
pub fn synthesize_spiky_series(spec: &SyntheticSpikeSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let spikes = spec.spike_times(&mut rng);
    let sigma = spec.spike_half_width / (2.0 * std::f64::consts::LN_2).sqrt();
    // bumps are negligible beyond this many sigmas
    let reach = 10.0 * sigma;

    let n = (spec.duration / SYNTHETIC_SAMPLE_INTERVAL).floor() as usize + 1;
    let times: Vec<f64> = (0..n).map(|i| i as f64 * SYNTHETIC_SAMPLE_INTERVAL).collect();
    let mut values = vec![spec.baseline; n];

    for &s in &spikes {
        let lo = ((s - reach) / SYNTHETIC_SAMPLE_INTERVAL).ceil().max(0.0) as usize;
        let hi = (((s + reach) / SYNTHETIC_SAMPLE_INTERVAL).floor() as usize).min(n - 1);
        for i in lo..=hi {
            let z = (times[i] - s) / sigma;
            values[i] += spec.spike_amplitude * (-0.5 * z * z).exp();
        }
    }

    if spec.noise_sd > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sd).expect("noise_sd validated");
        for v in &mut values {
            *v += normal.sample(&mut rng);
        }
    }

    TimeSeries::new(times, values, Unit::Microampere, spec.label.clone())
}

/// A set of recordings analysed together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub sample_labels: Vec<String>,
    /// Relative paths resolve against the manifest's directory.
    pub source_files: Vec<PathBuf>,
    #[serde(default)]
    pub detection: crate::spikes::SpikeDetectionConfig,
    #[serde(default)]
    pub coding: crate::coding::CodingConfig,
    #[serde(default)]
    pub weights: crate::coding::WeightSource,
    #[serde(default)]
    pub seed: u64,
    /// Directory relative source paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentManifest {
    pub fn resolved_files(&self) -> Vec<PathBuf> {
        self.source_files
            .iter()
            .map(|f| {
                if f.is_relative() {
                    self.base_dir.join(f)
                } else {
                    f.clone()
                }
            })
            .collect()
    }

    /// Loads and validates; referenced files must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: ExperimentManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        manifest.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_labels.len() != self.source_files.len() {
            return Err(Error::Validation(format!(
                "{} labels for {} source files",
                self.sample_labels.len(),
                self.source_files.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &self.sample_labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Validation(format!("duplicate sample label `{l}`")));
            }
        }
        self.detection.validate()?;
        self.coding.validate()?;
        Ok(())
    }
}
