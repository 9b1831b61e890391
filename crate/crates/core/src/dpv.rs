//! Differential pulse voltammetry excitation: a potential staircase with a
//! short pulse superimposed at the end of every step.
//!
//! Each step lasts `step_size / scan_rate` seconds. The base potential is
//! held for the first part of the step and the pulse occupies the final
//! `pulse_width` seconds. Current is sampled at the end of each phase.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Instrument protocol settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpvParameters {
    /// Seconds held at `start_potential` before the scan.
    pub equilibrium_time: f64,
    pub start_potential: f64,
    pub end_potential: f64,
    pub step_size: f64,
    pub pulse_amplitude: f64,
    pub pulse_width: f64,
    /// Volts per second.
    pub scan_rate: f64,
}

impl Default for DpvParameters {
    /// The Anapot EIS protocol: 100 s equilibrium, -8 V to 8 V in 1 mV steps,
    /// 0.2 V / 0.08 s pulses at 1 mV/s.
    fn default() -> Self {
        DpvParameters {
            equilibrium_time: 100.0,
            start_potential: -8.0,
            end_potential: 8.0,
            step_size: 0.001,
            pulse_amplitude: 0.2,
            pulse_width: 0.08,
            scan_rate: 0.001,
        }
    }
}

impl DpvParameters {
    pub fn step_duration(&self) -> f64 {
        self.step_size / self.scan_rate
    }

    /// +1 for an anodic (rising) scan, -1 for a cathodic one.
    pub fn direction(&self) -> f64 {
        (self.end_potential - self.start_potential).signum()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("equilibrium_time", self.equilibrium_time),
            ("start_potential", self.start_potential),
            ("end_potential", self.end_potential),
            ("step_size", self.step_size),
            ("pulse_amplitude", self.pulse_amplitude),
            ("pulse_width", self.pulse_width),
            ("scan_rate", self.scan_rate),
        ];
        for (field, value) in finite {
            if !value.is_finite() {
                return Err(Error::invalid(field, "must be finite"));
            }
        }
        if self.step_size <= 0.0 {
            return Err(Error::invalid("step_size", "must be > 0"));
        }
        if self.pulse_width <= 0.0 {
            return Err(Error::invalid("pulse_width", "must be > 0"));
        }
        if self.scan_rate <= 0.0 {
            return Err(Error::invalid("scan_rate", "must be > 0"));
        }
        if self.equilibrium_time < 0.0 {
            return Err(Error::invalid("equilibrium_time", "must be >= 0"));
        }
        if self.start_potential == self.end_potential {
            return Err(Error::invalid("end_potential", "must differ from start_potential"));
        }
        if self.pulse_width >= self.step_duration() {
            return Err(Error::invalid(
                "pulse_width",
                format!("must be shorter than the step duration ({} s)", self.step_duration()),
            ));
        }
        if step_count_unchecked(self) == 0 {
            return Err(Error::invalid(
                "step_size",
                "larger than twice the scan span; no steps would be taken",
            ));
        }
        Ok(())
    }
}

fn step_count_unchecked(params: &DpvParameters) -> usize {
    ((params.end_potential - params.start_potential).abs() / params.step_size).round() as usize
}

/// Number of potential steps in the scan, rounded to the nearest integer.
pub fn step_count(params: &DpvParameters) -> Result<usize> {
    params.validate()?;
    Ok(step_count_unchecked(params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Equilibrium,
    Base,
    Pulse,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Equilibrium => "equilibrium",
            Phase::Base => "base",
            Phase::Pulse => "pulse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_time: f64,
    pub duration: f64,
    pub potential: f64,
    pub phase: Phase,
}

impl Segment {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }
}

/// Piecewise-constant excitation potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialWaveform {
    segments: Vec<Segment>,
    total_duration: f64,
    step_duration: f64,
    equilibrium_time: f64,
}

impl PotentialWaveform {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.total_duration
    }

    /// Scan duration excluding the equilibrium period.
    pub fn scan_duration(&self) -> f64 {
        self.total_duration - self.equilibrium_time
    }

    pub fn base_segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.phase == Phase::Base)
    }

    pub fn pulse_segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.phase == Phase::Pulse)
    }

    /// Segment active at time `t`. Segment intervals are half-open
    /// `[start, end)`; the final instant belongs to the last segment.
    pub fn segment_at(&self, t: f64) -> Option<&Segment> {
        if !(0.0..=self.total_duration).contains(&t) {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.start_time <= t);
        self.segments.get(idx.checked_sub(1)?)
    }

    pub fn potential_at(&self, t: f64) -> Option<f64> {
        self.segment_at(t).map(|s| s.potential)
    }

    /// Potential held during each base phase, stamped at the before-pulse
    /// sampling instant. One row per step.
    pub fn staircase_series(&self, label: &str) -> Result<crate::signal::TimeSeries> {
        let (times, values): (Vec<f64>, Vec<f64>) = self.base_segments().map(|s| (s.end_time(), s.potential)).unzip();
        crate::signal::TimeSeries::new(times, values, crate::signal::Unit::Volt, label)
    }

    /// CSV with header `time_s,potential_V,phase`: one row at the start of
    /// every segment and a closing row at the end of the last one.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time_s,potential_V,phase")?;
        for s in &self.segments {
            writeln!(out, "{},{},{}", s.start_time, s.potential, s.phase.as_str())?;
        }
        if let Some(last) = self.segments.last() {
            writeln!(
                out,
                "{},{},{}",
                self.total_duration,
                last.potential,
                last.phase.as_str()
            )?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_csv(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Build the equilibrium segment followed by one base/pulse pair per step.
///
/// Step `k` (1-based) holds `start + direction * k * step_size` and its pulse
/// sits `pulse_amplitude` above that.
pub fn generate_waveform(params: &DpvParameters) -> Result<PotentialWaveform> {
    let steps = step_count(params)?;
    let step_duration = params.step_duration();
    let base_duration = step_duration - params.pulse_width;
    let direction = params.direction();
    let t0 = params.equilibrium_time;

    let mut segments = Vec::with_capacity(2 * steps + 1);
    if params.equilibrium_time > 0.0 {
        segments.push(Segment {
            start_time: 0.0,
            duration: params.equilibrium_time,
            potential: params.start_potential,
            phase: Phase::Equilibrium,
        });
    }
    for k in 1..=steps {
        let step_start = t0 + (k - 1) as f64 * step_duration;
        let base = params.start_potential + direction * k as f64 * params.step_size;
        segments.push(Segment {
            start_time: step_start,
            duration: base_duration,
            potential: base,
            phase: Phase::Base,
        });
        segments.push(Segment {
            start_time: step_start + base_duration,
            duration: params.pulse_width,
            potential: base + params.pulse_amplitude,
            phase: Phase::Pulse,
        });
    }

    Ok(PotentialWaveform {
        segments,
        total_duration: t0 + steps as f64 * step_duration,
        step_duration,
        equilibrium_time: t0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    BeforePulse,
    AfterPulse,
}

impl SampleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleKind::BeforePulse => "before_pulse",
            SampleKind::AfterPulse => "after_pulse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleInstant {
    pub time: f64,
    pub kind: SampleKind,
}

/// Current-sampling instants: end of each base phase, end of each pulse.
pub fn sample_instants(params: &DpvParameters) -> Result<Vec<SampleInstant>> {
    let steps = step_count(params)?;
    let step_duration = params.step_duration();
    let t0 = params.equilibrium_time;
    let mut out = Vec::with_capacity(2 * steps);
    for k in 1..=steps {
        let step_end = t0 + k as f64 * step_duration;
        out.push(SampleInstant {
            time: step_end - params.pulse_width,
            kind: SampleKind::BeforePulse,
        });
        out.push(SampleInstant {
            time: step_end,
            kind: SampleKind::AfterPulse,
        });
    }
    Ok(out)
}

pub fn write_instants_csv<W: Write>(instants: &[SampleInstant], mut out: W) -> std::io::Result<()> {
    writeln!(out, "time_s,kind")?;
    for s in instants {
        writeln!(out, "{},{}", s.time, s.kind.as_str())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step() -> DpvParameters {
        DpvParameters {
            equilibrium_time: 0.0,
            start_potential: 0.0,
            end_potential: 0.002,
            step_size: 0.001,
            pulse_amplitude: 0.1,
            pulse_width: 0.08,
            scan_rate: 0.001,
        }
    }

    #[test]
    fn default_protocol_step_count() {
        assert_eq!(step_count(&DpvParameters::default()).unwrap(), 16000);
    }

    #[test]
    fn small_step_counts() {
        let p = DpvParameters {
            start_potential: 0.0,
            end_potential: 1.0,
            step_size: 0.5,
            pulse_width: 0.01,
            scan_rate: 1.0,
            ..DpvParameters::default()
        };
        assert_eq!(step_count(&p).unwrap(), 2);
        // 0.999 / 0.1 = 9.99 rounds to 10
        let p = DpvParameters {
            end_potential: 0.999,
            step_size: 0.1,
            ..p
        };
        assert_eq!(step_count(&p).unwrap(), 10);
    }

    #[test]
    fn invalid_parameters_name_the_field() {
        let p = DpvParameters {
            step_size: 0.0,
            ..DpvParameters::default()
        };
        match step_count(&p) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "step_size"),
            other => panic!("unexpected {other:?}"),
        }
        let p = DpvParameters {
            pulse_width: 1.0,
            ..DpvParameters::default()
        };
        assert!(matches!(
            generate_waveform(&p),
            Err(Error::InvalidParameter {
                field: "pulse_width",
                ..
            })
        ));
        let p = DpvParameters {
            end_potential: -8.0,
            ..DpvParameters::default()
        };
        assert!(sample_instants(&p).is_err());
        let p = DpvParameters {
            equilibrium_time: -1.0,
            ..DpvParameters::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn two_step_segments_enumerated_by_hand() {
        let w = generate_waveform(&two_step()).unwrap();
        let segs = w.segments();
        assert_eq!(segs.len(), 4);
        let expected = [
            (0.0, 0.92, 0.001, Phase::Base),
            (0.92, 0.08, 0.101, Phase::Pulse),
            (1.0, 0.92, 0.002, Phase::Base),
            (1.92, 0.08, 0.102, Phase::Pulse),
        ];
        for (s, (start, dur, pot, phase)) in segs.iter().zip(expected) {
            assert!((s.start_time - start).abs() < 1e-12, "{s:?}");
            assert!((s.duration - dur).abs() < 1e-12, "{s:?}");
            assert!((s.potential - pot).abs() < 1e-12, "{s:?}");
            assert_eq!(s.phase, phase);
        }
        assert!((w.total_duration() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_step_instants() {
        let mut p = two_step();
        let got = sample_instants(&p).unwrap();
        let times: Vec<f64> = got.iter().map(|s| s.time).collect();
        for (t, e) in times.iter().zip([0.92, 1.0, 1.92, 2.0]) {
            assert!((t - e).abs() < 1e-12);
        }
        assert_eq!(got[0].kind, SampleKind::BeforePulse);
        assert_eq!(got[1].kind, SampleKind::AfterPulse);

        p.equilibrium_time = 100.0;
        let shifted = sample_instants(&p).unwrap();
        for (a, b) in shifted.iter().zip(&got) {
            assert!((a.time - b.time - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn default_protocol_waveform() {
        let p = DpvParameters::default();
        let w = generate_waveform(&p).unwrap();
        assert_eq!(w.base_segments().count(), 16000);
        assert_eq!(w.pulse_segments().count(), 16000);
        assert!((w.scan_duration() - 16000.0).abs() < 1e-6);
        assert_eq!(w.segments()[0].phase, Phase::Equilibrium);
        assert_eq!(w.segments()[0].potential, -8.0);
        let pairs = w.segments()[1..].chunks(2);
        for pair in pairs {
            assert!((pair[1].potential - pair[0].potential - 0.2).abs() < 1e-12);
            assert!((pair[1].duration - 0.08).abs() < 1e-12);
        }
        let last_base = w.base_segments().last().unwrap();
        assert!((last_base.potential - 8.0).abs() < 1e-9);
        assert_eq!(sample_instants(&p).unwrap().len(), 32000);
    }

    #[test]
    fn zero_pulse_amplitude_is_a_staircase() {
        let p = DpvParameters {
            pulse_amplitude: 0.0,
            ..two_step()
        };
        let w = generate_waveform(&p).unwrap();
        for pair in w.segments().chunks(2) {
            assert_eq!(pair[0].potential, pair[1].potential);
        }
    }

    #[test]
    fn cathodic_scan_descends() {
        let p = DpvParameters {
            start_potential: 0.5,
            end_potential: 0.0,
            step_size: 0.1,
            scan_rate: 0.1,
            pulse_width: 0.1,
            equilibrium_time: 2.0,
            pulse_amplitude: 0.05,
        };
        let w = generate_waveform(&p).unwrap();
        let bases: Vec<f64> = w.base_segments().map(|s| s.potential).collect();
        assert_eq!(bases.len(), 5);
        assert!(bases.windows(2).all(|b| b[1] < b[0]));
        assert!(bases.last().unwrap().abs() < 1e-12);
    }

    #[test]
    fn potential_lookup_matches_formula() {
        let p = DpvParameters {
            equilibrium_time: 3.0,
            ..two_step()
        };
        let w = generate_waveform(&p).unwrap();
        assert_eq!(w.potential_at(0.0), Some(0.0));
        assert_eq!(w.potential_at(2.999), Some(0.0));
        assert!((w.potential_at(3.5).unwrap() - 0.001).abs() < 1e-12);
        assert!((w.potential_at(3.95).unwrap() - 0.101).abs() < 1e-12);
        assert!((w.potential_at(4.5).unwrap() - 0.002).abs() < 1e-12);
        assert!((w.potential_at(5.0).unwrap() - 0.102).abs() < 1e-12);
        assert_eq!(w.potential_at(5.1), None);
        assert_eq!(w.potential_at(-0.1), None);
    }

    #[test]
    fn csv_export_layout() {
        let w = generate_waveform(&two_step()).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time_s,potential_V,phase");
        assert_eq!(lines[1], "0,0.001,base");
        assert_eq!(lines.len(), 1 + 4 + 1);
        assert!(lines[5].starts_with("2,"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn params() -> impl Strategy<Value = DpvParameters> {
            (
                0.0..10.0f64,
                -1.0..1.0f64,
                1usize..200,
                0.001..0.1f64,
                -0.3..0.3f64,
                0.01..0.99f64,
                0.001..1.0f64,
                any::<bool>(),
            )
                .prop_map(|(eq, start, steps, step, amp, frac, rate, up)| {
                    let dir = if up { 1.0 } else { -1.0 };
                    DpvParameters {
                        equilibrium_time: eq,
                        start_potential: start,
                        end_potential: start + dir * steps as f64 * step,
                        step_size: step,
                        pulse_amplitude: amp,
                        pulse_width: frac * step / rate,
                        scan_rate: rate,
                    }
                })
        }

        proptest! {
            #[test]
            fn segment_structure(p in params()) {
                let n = step_count(&p).unwrap();
                let w = generate_waveform(&p).unwrap();
                prop_assert_eq!(w.base_segments().count(), n);
                prop_assert_eq!(w.pulse_segments().count(), n);

                let bases: Vec<f64> = w.base_segments().map(|s| s.potential).collect();
                let dir = p.direction();
                prop_assert!(bases.windows(2).all(|b| dir * (b[1] - b[0]) > 0.0));

                let segs = w.segments();
                for pair in segs.windows(2) {
                    prop_assert!((pair[0].end_time() - pair[1].start_time).abs() < 1e-9);
                }
                let total: f64 = segs.iter().map(|s| s.duration).sum();
                prop_assert!((total - w.total_duration()).abs() < 1e-7 * w.total_duration().max(1.0));
                let expected_scan = n as f64 * p.step_size / p.scan_rate;
                prop_assert!((w.scan_duration() - expected_scan).abs() < 1e-9 * expected_scan.max(1.0));

                let instants = sample_instants(&p).unwrap();
                prop_assert_eq!(instants.len(), 2 * n);
                prop_assert!(instants.windows(2).all(|s| s[1].time > s[0].time));
            }
        }
    }
}
