//! Threshold spike detection with a minimum peak distance, and the
//! inter-spike interval statistics derived from it.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpikeDetectionConfig {
    /// Peaks must strictly exceed this value (series units).
    pub threshold: f64,
    /// Seconds; retained peaks are at least this far apart.
    pub min_peak_distance: f64,
}

impl Default for SpikeDetectionConfig {
    fn default() -> Self {
        SpikeDetectionConfig {
            threshold: 0.0005,
            min_peak_distance: 5.0,
        }
    }
}

impl SpikeDetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::invalid("threshold", "must be finite"));
        }
        if !(self.min_peak_distance.is_finite() && self.min_peak_distance >= 0.0) {
            return Err(Error::invalid("min_peak_distance", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub spike_times: Vec<f64>,
    pub spike_amplitudes: Vec<f64>,
    pub source_label: String,
    pub duration: f64,
}

impl SpikeTrain {
    pub fn len(&self) -> usize {
        self.spike_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spike_times.is_empty()
    }

    /// `spike_time_s,amplitude` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "spike_time_s,amplitude")?;
        for (t, a) in self.spike_times.iter().zip(&self.spike_amplitudes) {
            writeln!(out, "{t},{a}")?;
        }
        Ok(())
    }
}

/// Indices of local maxima. A run of equal samples counts as one peak,
/// reported at its first sample, when it rises from the left and falls to the
/// right. The first and last samples are never peaks.
fn local_maxima(values: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = values.len();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                peaks.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Detect spikes: local maxima above threshold, pruned greedily in order of
/// decreasing amplitude (earlier time on ties) so that no two retained peaks
/// are closer than `min_peak_distance`.
pub fn detect_spikes(series: &TimeSeries, config: &SpikeDetectionConfig) -> Result<SpikeTrain> {
    config.validate()?;
    let times = series.times();
    let values = series.values();

    let mut candidates: Vec<usize> = local_maxima(values)
        .into_iter()
        .filter(|&i| values[i] > config.threshold)
        .collect();
    // numeric order, not total_cmp: -0.0 and 0.0 are a tie
    candidates.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("series values are finite")
            .then(a.cmp(&b))
    });

    // sample order is time order, so only the nearest retained neighbour on
    // each side can clash
    let mut kept: BTreeSet<usize> = BTreeSet::new();
    for i in candidates {
        let t = times[i];
        let clashes_before = kept
            .range(..i)
            .next_back()
            .is_some_and(|&prev| t - times[prev] < config.min_peak_distance);
        let clashes_after = kept
            .range(i..)
            .next()
            .is_some_and(|&next| times[next] - t < config.min_peak_distance);
        if !clashes_before && !clashes_after {
            kept.insert(i);
        }
    }

    Ok(train_from_indices(series, kept))
}

fn train_from_indices(series: &TimeSeries, indices: impl IntoIterator<Item = usize>) -> SpikeTrain {
    let (spike_times, spike_amplitudes) = indices
        .into_iter()
        .map(|i| (series.times()[i], series.values()[i]))
        .unzip();
    SpikeTrain {
        spike_times,
        spike_amplitudes,
        source_label: series.label().to_string(),
        duration: series.duration(),
    }
}

/// Quadratic reference implementation of [`detect_spikes`], used to
/// cross-check it.
///
/// Every sample is tested for peak-ness by scanning outward past equal
/// neighbours; then the highest remaining candidate is repeatedly selected and
/// every candidate too close to it discarded.
pub fn detect_spikes_naive(series: &TimeSeries, config: &SpikeDetectionConfig) -> Result<SpikeTrain> {
    config.validate()?;
    let times = series.times();
    let values = series.values();
    let n = values.len();

    let mut remaining: Vec<usize> = Vec::new();
    for i in 0..n {
        if values[i] <= config.threshold {
            continue;
        }
        // left: the nearest differing sample must be lower, and the
        // immediately preceding sample must differ (first of plateau)
        if i == 0 || values[i - 1] >= values[i] {
            continue;
        }
        let right = (i + 1..n).find(|&k| values[k] != values[i]);
        if matches!(right, Some(k) if values[k] < values[i]) {
            remaining.push(i);
        }
    }

    let mut selected = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0;
        for (pos, &i) in remaining.iter().enumerate() {
            let b = remaining[best];
            if values[i] > values[b] || (values[i] == values[b] && i < b) {
                best = pos;
            }
        }
        let chosen = remaining[best];
        selected.push(chosen);
        remaining.retain(|&i| (times[i] - times[chosen]).abs() >= config.min_peak_distance);
    }
    selected.sort_unstable();

    Ok(train_from_indices(series, selected))
}

/// Spike count and interval statistics for one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeStats {
    pub label: String,
    pub count: usize,
    /// Seconds; `None` with fewer than two spikes.
    pub mean_isi_s: Option<f64>,
    /// `1000 / mean_isi_s`; `None` with fewer than two spikes.
    pub frequency_mhz: Option<f64>,
    pub duration_s: f64,
}

impl SpikeStats {
    pub fn isi_defined(&self) -> bool {
        self.mean_isi_s.is_some()
    }
}

pub fn compute_stats(train: &SpikeTrain) -> SpikeStats {
    let count = train.spike_times.len();
    let mean_isi = (count >= 2).then(|| {
        let total: f64 = train.spike_times.windows(2).map(|w| w[1] - w[0]).sum();
        total / (count - 1) as f64
    });
    SpikeStats {
        label: train.source_label.clone(),
        count,
        mean_isi_s: mean_isi,
        frequency_mhz: mean_isi.map(|isi| 1000.0 / isi),
        duration_s: train.duration,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub samples: usize,
    pub mean_count: f64,
    /// Mean over samples whose interval is defined; `None` if none are.
    pub mean_isi_of_means_s: Option<f64>,
}

pub fn aggregate_stats(stats: &[SpikeStats]) -> Result<AggregateStats> {
    if stats.is_empty() {
        return Err(Error::EmptyInput("aggregate_stats needs at least one sample"));
    }
    let mean_count = stats.iter().map(|s| s.count as f64).sum::<f64>() / stats.len() as f64;
    let isis: Vec<f64> = stats.iter().filter_map(|s| s.mean_isi_s).collect();
    let mean_isi = (!isis.is_empty()).then(|| isis.iter().sum::<f64>() / isis.len() as f64);
    Ok(AggregateStats {
        samples: stats.len(),
        mean_count,
        mean_isi_of_means_s: mean_isi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize_spiky_series, SyntheticSpikeSpec, Unit};
    use crate::tables::TABLE2;

    fn series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::uniform(0.0, 1.0, values, Unit::Microampere, "t").unwrap()
    }

    fn bumps(n: usize, peaks: &[(usize, f64)]) -> TimeSeries {
        let mut v = vec![0.0; n];
        for &(at, amp) in peaks {
            v[at - 1] += amp * 0.5;
            v[at] += amp;
            v[at + 1] += amp * 0.5;
        }
        series(v)
    }

    #[test]
    fn flat_series_has_no_spikes() {
        let s = series(vec![0.0; 100]);
        let cfg = SpikeDetectionConfig::default();
        assert!(detect_spikes(&s, &cfg).unwrap().is_empty());
        assert!(detect_spikes_naive(&s, &cfg).unwrap().is_empty());
    }

    #[test]
    fn three_bumps() {
        let s = bumps(40, &[(10, 0.001), (20, 0.001), (30, 0.001)]);
        let cfg = SpikeDetectionConfig::default();
        let fast = detect_spikes(&s, &cfg).unwrap();
        assert_eq!(fast.spike_times, vec![10.0, 20.0, 30.0]);
        assert_eq!(fast, detect_spikes_naive(&s, &cfg).unwrap());
    }

    #[test]
    fn close_bumps_keep_the_taller() {
        let s = bumps(30, &[(10, 0.002), (13, 0.001)]);
        let train = detect_spikes(&s, &SpikeDetectionConfig::default()).unwrap();
        assert_eq!(train.spike_times, vec![10.0]);
        assert_eq!(train.spike_amplitudes, vec![0.002]);
    }

    #[test]
    fn ties_prefer_the_earlier_peak() {
        let s = bumps(30, &[(10, 0.001), (13, 0.001)]);
        let cfg = SpikeDetectionConfig::default();
        assert_eq!(detect_spikes(&s, &cfg).unwrap().spike_times, vec![10.0]);
        assert_eq!(detect_spikes_naive(&s, &cfg).unwrap().spike_times, vec![10.0]);
    }

    #[test]
    fn threshold_is_strict_and_endpoints_ignored() {
        let s = series(vec![0.0, 0.0005, 0.0, 0.002]);
        let train = detect_spikes(&s, &SpikeDetectionConfig::default()).unwrap();
        assert!(train.is_empty());
    }

    #[test]
    fn plateau_reports_first_sample() {
        let s = series(vec![0.0, 0.001, 0.001, 0.001, 0.0, 0.0]);
        let cfg = SpikeDetectionConfig::default();
        assert_eq!(detect_spikes(&s, &cfg).unwrap().spike_times, vec![1.0]);
        assert_eq!(detect_spikes_naive(&s, &cfg).unwrap().spike_times, vec![1.0]);
        // a plateau running into the end is not a peak
        let s = series(vec![0.0, 0.001, 0.001]);
        assert!(detect_spikes(&s, &cfg).unwrap().is_empty());
    }

    #[test]
    fn distance_exactly_at_limit_is_allowed() {
        let s = bumps(30, &[(10, 0.002), (15, 0.001)]);
        let train = detect_spikes(&s, &SpikeDetectionConfig::default()).unwrap();
        assert_eq!(train.spike_times, vec![10.0, 15.0]);
    }

    #[test]
    fn invalid_config() {
        let s = series(vec![0.0; 3]);
        let cfg = SpikeDetectionConfig {
            min_peak_distance: -1.0,
            ..Default::default()
        };
        assert!(detect_spikes(&s, &cfg).is_err());
        let cfg = SpikeDetectionConfig {
            threshold: f64::NAN,
            ..Default::default()
        };
        assert!(detect_spikes_naive(&s, &cfg).is_err());
    }

    #[test]
    fn single_spike_has_undefined_isi() {
        let s = bumps(20, &[(10, 0.001)]);
        let stats = compute_stats(&detect_spikes(&s, &SpikeDetectionConfig::default()).unwrap());
        assert_eq!(stats.count, 1);
        assert_eq!(stats.mean_isi_s, None);
        assert_eq!(stats.frequency_mhz, None);
        assert_eq!(stats.duration_s, 19.0);
    }

    fn surrogate_frequency(count: usize, isi: f64) -> f64 {
        let spec = SyntheticSpikeSpec::regular(count, isi, 0.2, 2024);
        let s = synthesize_spiky_series(&spec).unwrap();
        let train = detect_spikes(&s, &SpikeDetectionConfig::default()).unwrap();
        let stats = compute_stats(&train);
        assert_eq!(stats.count, count);
        stats.frequency_mhz.unwrap()
    }

    #[test]
    fn signed_zero_peaks_tie() {
        let values = vec![-1.0, -0.0, -1.0, 0.0, -1.0];
        let s = TimeSeries::uniform(0.0, 1.0, values, Unit::Microampere, "z").unwrap();
        let config = SpikeDetectionConfig {
            threshold: -0.5,
            min_peak_distance: 3.0,
        };
        let fast = detect_spikes(&s, &config).unwrap();
        assert_eq!(fast.spike_times, vec![1.0]);
        assert_eq!(fast, detect_spikes_naive(&s, &config).unwrap());
    }

    #[test]
    fn table2_frequencies_from_surrogates() {
        // L-Glu:L-Asp and L-Phe rows
        let f = surrogate_frequency(726, 22.24);
        assert!((f - 44.97).abs() / 44.97 < 1e-3, "{f}");
        let f = surrogate_frequency(900, 12.32);
        assert!((f - 81.15).abs() / 81.15 < 1e-3, "{f}");
    }

    #[test]
    fn frequency_times_isi_is_1000() {
        let train = SpikeTrain {
            spike_times: vec![0.3, 7.1, 19.0, 22.9],
            spike_amplitudes: vec![1.0; 4],
            source_label: String::new(),
            duration: 30.0,
        };
        let s = compute_stats(&train);
        assert!((s.frequency_mhz.unwrap() * s.mean_isi_s.unwrap() - 1000.0).abs() < 1e-9 * 1000.0);
        assert!((s.mean_isi_s.unwrap() - (22.9 - 0.3) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_over_table2_columns() {
        let stats: Vec<SpikeStats> = TABLE2
            .iter()
            .map(|r| SpikeStats {
                label: r.label.into(),
                count: r.count,
                mean_isi_s: Some(r.mean_isi_s),
                frequency_mhz: Some(r.frequency_mhz),
                duration_s: 0.0,
            })
            .collect();
        let agg = aggregate_stats(&stats).unwrap();
        // 4183 / 12
        assert!((agg.mean_count - 348.583_333).abs() < 1e-3);
        // 5508.05 / 12
        assert!((agg.mean_isi_of_means_s.unwrap() - 459.004_166_67).abs() < 1e-6);
        assert!(aggregate_stats(&[]).is_err());
        let one = aggregate_stats(&stats[..1]).unwrap();
        assert_eq!(one.mean_count, 726.0);
        assert_eq!(one.mean_isi_of_means_s, Some(22.24));
    }

    #[test]
    fn train_csv_layout() {
        let s = bumps(40, &[(10, 0.001), (20, 0.001), (30, 0.001)]);
        let train = detect_spikes(&s, &SpikeDetectionConfig::default()).unwrap();
        let mut buf = Vec::new();
        train.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "spike_time_s,amplitude\n10,0.001\n20,0.001\n30,0.001\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_series() -> impl Strategy<Value = TimeSeries> {
            proptest::collection::vec(0u8..6, 3..400).prop_map(|levels| {
                // coarse levels produce plenty of ties and plateaus
                let values = levels.iter().map(|&l| l as f64 * 0.0002).collect();
                series(values)
            })
        }

        proptest! {
            #[test]
            fn fast_matches_naive(s in arb_series(), thr in 0.0..0.0012f64, dist in 0.0..12.0f64) {
                let cfg = SpikeDetectionConfig { threshold: thr, min_peak_distance: dist };
                let fast = detect_spikes(&s, &cfg).unwrap();
                prop_assert_eq!(&fast, &detect_spikes_naive(&s, &cfg).unwrap());
                prop_assert!(fast.spike_amplitudes.iter().all(|&a| a > thr));
                prop_assert!(fast.spike_times.windows(2).all(|w| w[1] - w[0] >= dist));
            }

            #[test]
            fn raising_threshold_never_adds_spikes(s in arb_series(), a in 0.0..0.001f64, b in 0.0..0.001f64, dist in 0.0..8.0f64) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let n_lo = detect_spikes(&s, &SpikeDetectionConfig { threshold: lo, min_peak_distance: dist }).unwrap().len();
                let n_hi = detect_spikes(&s, &SpikeDetectionConfig { threshold: hi, min_peak_distance: dist }).unwrap().len();
                prop_assert!(n_hi <= n_lo);
            }
        }
    }
}
