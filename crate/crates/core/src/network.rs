//! Recurrent network simulators: leaky integrate-and-fire neurons with an
//! exponentially filtered linear readout, and continuous `tanh` rate units
//! with input and output-feedback synapses.
//!
//! Both integrate with forward Euler. Potentials are in volts, times in
//! seconds, and LIF input currents in volts per second (the membrane
//! resistance is folded into the current).

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::component_rng;

/// Row-major dense matrix stored as rows.
pub type Matrix = Vec<Vec<f64>>;

fn check_shape(m: &Matrix, rows: usize, cols: usize, name: &str) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch(format!("{name} must be {rows}x{cols}")));
    }
    if m.iter().flatten().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite(format!("{name} holds a non-finite weight")));
    }
    Ok(())
}

fn mat_vec_into(m: &Matrix, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// Column `k` of a `d x steps` signal.
fn column(signal: &Matrix, k: usize, out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(signal) {
        *o = row[k];
    }
}

fn signal_steps(signal: &Matrix, rows: usize, name: &str) -> Result<usize> {
    if signal.len() != rows {
        return Err(Error::DimensionMismatch(format!(
            "{name} has {} channels, expected {rows}",
            signal.len()
        )));
    }
    let steps = signal.first().map_or(0, Vec::len);
    if signal.iter().any(|r| r.len() != steps) {
        return Err(Error::DimensionMismatch(format!("{name} channels differ in length")));
    }
    if signal.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{name} holds a non-finite sample")));
    }
    Ok(steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifParameters {
    pub tau_m: f64,
    pub v_th: f64,
    pub v_reset: f64,
    pub v_rest: f64,
    pub refractory: f64,
    /// Readout synapse time constant.
    pub tau_syn: f64,
    pub dt: f64,
}

impl Default for LifParameters {
    fn default() -> Self {
        LifParameters {
            tau_m: 0.020,
            v_th: -0.050,
            v_reset: -0.065,
            v_rest: -0.065,
            refractory: 0.002,
            tau_syn: 0.005,
            dt: 0.0001,
        }
    }
}

impl LifParameters {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("tau_m", self.tau_m),
            ("v_th", self.v_th),
            ("v_reset", self.v_reset),
            ("v_rest", self.v_rest),
            ("refractory", self.refractory),
            ("tau_syn", self.tau_syn),
            ("dt", self.dt),
        ];
        for (field, v) in all {
            if !v.is_finite() {
                return Err(Error::invalid(field, "must be finite"));
            }
        }
        if self.tau_m <= 0.0 {
            return Err(Error::invalid("tau_m", "must be > 0"));
        }
        if self.tau_syn <= 0.0 {
            return Err(Error::invalid("tau_syn", "must be > 0"));
        }
        if self.dt <= 0.0 {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        if self.v_th <= self.v_reset {
            return Err(Error::invalid("v_th", "must exceed v_reset"));
        }
        if self.refractory < 0.0 {
            return Err(Error::invalid("refractory", "must be >= 0"));
        }
        if self.refractory > 0.0 && self.dt > self.refractory {
            return Err(Error::invalid("dt", "must not exceed the refractory period"));
        }
        Ok(())
    }

    /// Whole steps a neuron is clamped after a spike.
    pub fn refractory_steps(&self) -> usize {
        (self.refractory / self.dt).round() as usize
    }

    /// One Euler step of the membrane equation from `v` under total drive
    /// `current` (V/s), with `jump` volts of instantaneous synaptic input.
    pub fn integrate(&self, v: f64, current: f64, jump: f64) -> f64 {
        v + (self.dt / self.tau_m) * (self.v_rest - v) + self.dt * current + jump
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifState {
    pub potentials: Vec<f64>,
    /// Remaining clamped steps per neuron.
    pub refractory_left: Vec<usize>,
}

impl LifState {
    pub fn at_rest(n: usize, lif: &LifParameters) -> Self {
        LifState {
            potentials: vec![lif.v_rest; n],
            refractory_left: vec![0; n],
        }
    }
}

/// Advance every neuron by one `dt`.
///
/// A presynaptic spike from neuron `i` in the previous step arrives as a
/// current pulse of area `recurrent[j][i]`, i.e. a jump of that many volts.
/// Neurons whose potential then exceeds `v_th` spike, reset to `v_reset`,
/// and stay clamped for the refractory period.
pub fn step_lif(
    state: &LifState,
    input_current: &[f64],
    lif: &LifParameters,
    recurrent: &Matrix,
    spikes_prev: &[bool],
) -> Result<(LifState, Vec<bool>)> {
    let n = state.potentials.len();
    if state.refractory_left.len() != n || input_current.len() != n || spikes_prev.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "state, input and previous spikes must all have length {n}"
        )));
    }
    check_shape(recurrent, n, n, "recurrent weights")?;
    let mut next = state.clone();
    let mut spikes = vec![false; n];
    advance(&mut next, input_current, lif, recurrent, spikes_prev, &mut spikes)?;
    Ok((next, spikes))
}

fn advance(
    state: &mut LifState,
    input_current: &[f64],
    lif: &LifParameters,
    recurrent: &Matrix,
    spikes_prev: &[bool],
    spikes: &mut [bool],
) -> Result<()> {
    let refractory_steps = lif.refractory_steps();
    let any_prev = spikes_prev.iter().any(|&s| s);
    for j in 0..state.potentials.len() {
        spikes[j] = false;
        if state.refractory_left[j] > 0 {
            state.refractory_left[j] -= 1;
            state.potentials[j] = lif.v_reset;
            continue;
        }
        let jump = if any_prev {
            recurrent[j]
                .iter()
                .zip(spikes_prev)
                .filter(|(_, &s)| s)
                .map(|(w, _)| w)
                .sum()
        } else {
            0.0
        };
        let v = lif.integrate(state.potentials[j], input_current[j], jump);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("membrane potential of neuron {j}")));
        }
        if v > lif.v_th {
            spikes[j] = true;
            state.potentials[j] = lif.v_reset;
            state.refractory_left[j] = refractory_steps;
        } else {
            state.potentials[j] = v;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikingNetwork {
    pub lif: LifParameters,
    /// `N x N`, entry `[post][pre]`, volts per spike.
    pub recurrent: Matrix,
    /// `N x d_in`.
    pub input: Matrix,
    /// `d_out x N`.
    pub output: Matrix,
}

impl SpikingNetwork {
    pub fn neurons(&self) -> usize {
        self.recurrent.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input.first().map_or(0, Vec::len)
    }

    pub fn output_dim(&self) -> usize {
        self.output.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.lif.validate()?;
        let n = self.neurons();
        if n == 0 {
            return Err(Error::invalid("neurons", "must be >= 1"));
        }
        check_shape(&self.recurrent, n, n, "recurrent weights")?;
        check_shape(&self.input, n, self.input_dim(), "input weights")?;
        check_shape(&self.output, self.output_dim(), n, "output weights")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub neuron: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTrace {
    /// Time at the end of each step.
    pub times: Vec<f64>,
    /// Per step: membrane potentials (spiking) or latent state `x` (rate).
    pub states: Vec<Vec<f64>>,
    /// Per step: `tanh(x)` for rate networks; empty for spiking runs.
    pub activities: Vec<Vec<f64>>,
    pub raster: Vec<SpikeEvent>,
    /// `d_out x steps`.
    pub output: Matrix,
}

impl SimulationTrace {
    pub fn spike_times(&self, neuron: usize) -> Vec<f64> {
        self.raster
            .iter()
            .filter(|e| e.neuron == neuron)
            .map(|e| e.time)
            .collect()
    }

    /// `time_s,neuron,value` long format over `states` (or `activities`
    /// when `activities` is set).
    pub fn write_states_csv<W: Write>(&self, activities: bool, mut out: W) -> std::io::Result<()> {
        let rows = if activities { &self.activities } else { &self.states };
        writeln!(out, "time_s,neuron,value")?;
        for (t, row) in self.times.iter().zip(rows) {
            for (j, v) in row.iter().enumerate() {
                writeln!(out, "{t},{j},{v}")?;
            }
        }
        Ok(())
    }

    pub fn write_raster_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "neuron,spike_time_s")?;
        for e in &self.raster {
            writeln!(out, "{},{}", e.neuron, e.time)?;
        }
        Ok(())
    }

    pub fn write_output_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time_s,output,value")?;
        for (k, t) in self.times.iter().enumerate() {
            for (d, row) in self.output.iter().enumerate() {
                writeln!(out, "{t},{d},{}", row[k])?;
            }
        }
        Ok(())
    }
}

/// Run from rest for as many steps as `fin` (`d_in x steps`) has columns.
///
/// The readout is `Fout = W_out r`, where each neuron's trace `r` decays with
/// `tau_syn` and jumps by `1 / tau_syn` per spike.
pub fn run_spiking(net: &SpikingNetwork, fin: &Matrix) -> Result<SimulationTrace> {
    run_spiking_from(net, fin, LifState::at_rest(net.neurons(), &net.lif))
}

pub fn run_spiking_from(net: &SpikingNetwork, fin: &Matrix, initial: LifState) -> Result<SimulationTrace> {
    net.validate()?;
    let n = net.neurons();
    let steps = signal_steps(fin, net.input_dim(), "Fin")?;
    if initial.potentials.len() != n || initial.refractory_left.len() != n {
        return Err(Error::DimensionMismatch(format!("initial state must have {n} neurons")));
    }
    if initial.potentials.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial membrane potential".into()));
    }

    let lif = &net.lif;
    let decay = (-lif.dt / lif.tau_syn).exp();
    let mut state = initial;
    let mut spikes_prev = vec![false; n];
    let mut spikes = vec![false; n];
    let mut fin_now = vec![0.0; net.input_dim()];
    let mut current = vec![0.0; n];
    let mut filtered = vec![0.0; n];
    let mut fout = vec![0.0; net.output_dim()];

    let mut trace = SimulationTrace {
        times: Vec::with_capacity(steps),
        states: Vec::with_capacity(steps),
        output: vec![Vec::with_capacity(steps); net.output_dim()],
        ..SimulationTrace::default()
    };

    for k in 0..steps {
        column(fin, k, &mut fin_now);
        mat_vec_into(&net.input, &fin_now, &mut current);
        advance(&mut state, &current, lif, &net.recurrent, &spikes_prev, &mut spikes)?;

        let t = (k + 1) as f64 * lif.dt;
        for (j, r) in filtered.iter_mut().enumerate() {
            *r *= decay;
            if spikes[j] {
                *r += 1.0 / lif.tau_syn;
                trace.raster.push(SpikeEvent { neuron: j, time: t });
            }
        }
        mat_vec_into(&net.output, &filtered, &mut fout);
        for (row, v) in trace.output.iter_mut().zip(&fout) {
            row.push(*v);
        }
        trace.times.push(t);
        trace.states.push(state.potentials.clone());
        std::mem::swap(&mut spikes_prev, &mut spikes);
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateNetwork {
    /// `N x N`.
    pub recurrent: Matrix,
    /// `N x d_in`.
    pub input: Matrix,
    /// `N x d_out`, carries `Fout` back into the network.
    pub feedback: Matrix,
    /// Optional `d_out x N` linear readout of `tanh(x)`.
    #[serde(default)]
    pub readout: Option<Matrix>,
    pub tau: f64,
    pub dt: f64,
}

impl RateNetwork {
    pub fn units(&self) -> usize {
        self.recurrent.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input.first().map_or(0, Vec::len)
    }

    pub fn feedback_dim(&self) -> usize {
        self.feedback.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid("tau", "must be > 0"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        let n = self.units();
        if n == 0 {
            return Err(Error::invalid("units", "must be >= 1"));
        }
        check_shape(&self.recurrent, n, n, "recurrent weights")?;
        check_shape(&self.input, n, self.input_dim(), "input weights")?;
        check_shape(&self.feedback, n, self.feedback_dim(), "feedback weights")?;
        if let Some(r) = &self.readout {
            check_shape(r, r.len(), n, "readout weights")?;
        }
        Ok(())
    }
}

/// Euler integration of `tau dx/dt = -x + J tanh(x) + U Fin + u Fout` from
/// `x = 0`. `fin` is `d_in x steps`, `fout_feedback` is `d_out x steps`.
pub fn run_rate(net: &RateNetwork, fin: &Matrix, fout_feedback: &Matrix) -> Result<SimulationTrace> {
    run_rate_from(net, fin, fout_feedback, vec![0.0; net.units()])
}

pub fn run_rate_from(net: &RateNetwork, fin: &Matrix, fout_feedback: &Matrix, x0: Vec<f64>) -> Result<SimulationTrace> {
    net.validate()?;
    let n = net.units();
    let steps = signal_steps(fin, net.input_dim(), "Fin")?;
    let fb_steps = signal_steps(fout_feedback, net.feedback_dim(), "Fout feedback")?;
    if fb_steps != steps && net.feedback_dim() > 0 {
        return Err(Error::DimensionMismatch(format!(
            "Fin has {steps} steps but Fout feedback has {fb_steps}"
        )));
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!("initial state must have {n} units")));
    }

    let alpha = net.dt / net.tau;
    let mut x = x0;
    let mut r: Vec<f64> = x.iter().map(|v| v.tanh()).collect();
    let mut rec = vec![0.0; n];
    let mut inp = vec![0.0; n];
    let mut fb = vec![0.0; n];
    let mut fin_now = vec![0.0; net.input_dim()];
    let mut fb_now = vec![0.0; net.feedback_dim()];
    let d_out = net.readout.as_ref().map_or(0, Vec::len);
    let mut out_now = vec![0.0; d_out];

    let mut trace = SimulationTrace {
        times: Vec::with_capacity(steps),
        states: Vec::with_capacity(steps),
        activities: Vec::with_capacity(steps),
        output: vec![Vec::with_capacity(steps); d_out],
        ..SimulationTrace::default()
    };

    for k in 0..steps {
        column(fin, k, &mut fin_now);
        column(fout_feedback, k, &mut fb_now);
        mat_vec_into(&net.recurrent, &r, &mut rec);
        mat_vec_into(&net.input, &fin_now, &mut inp);
        mat_vec_into(&net.feedback, &fb_now, &mut fb);
        for j in 0..n {
            x[j] += alpha * (-x[j] + rec[j] + inp[j] + fb[j]);
            if !x[j].is_finite() {
                return Err(Error::NonFinite(format!("state of unit {j}")));
            }
            r[j] = x[j].tanh();
        }
        if let Some(readout) = &net.readout {
            mat_vec_into(readout, &r, &mut out_now);
            for (row, v) in trace.output.iter_mut().zip(&out_now) {
                row.push(*v);
            }
        }
        trace.times.push((k + 1) as f64 * net.dt);
        trace.states.push(x.clone());
        trace.activities.push(r.clone());
    }
    Ok(trace)
}

/// Constant or sinusoidal drive, one amplitude per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stimulus {
    pub steps: usize,
    pub amplitude: Vec<f64>,
    /// When set, channel `d` is `amplitude[d] * sin(2 pi f t)`.
    #[serde(default)]
    pub frequency_hz: Option<f64>,
}

impl Stimulus {
    pub fn render(&self, dt: f64) -> Matrix {
        self.amplitude
            .iter()
            .map(|&a| {
                (0..self.steps)
                    .map(|k| match self.frequency_hz {
                        Some(f) => a * (2.0 * std::f64::consts::PI * f * k as f64 * dt).sin(),
                        None => a,
                    })
                    .collect()
            })
            .collect()
    }
}

/// Explicit weight arrays; any that are absent are drawn from the seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightOverrides {
    pub recurrent: Option<Matrix>,
    pub input: Option<Matrix>,
    pub output: Option<Matrix>,
}

/// JSON description of a spiking run.
///
/// Drawn weights: recurrent `N(0, (gain / sqrt(N))^2)` volts per spike,
/// input uniform on `[-input_scale, input_scale]`, output uniform on
/// `[-1, 1] / N`. Each matrix uses its own derived stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikingNetworkSpec {
    pub neurons: usize,
    pub inputs: usize,
    pub outputs: usize,
    #[serde(default)]
    pub lif: LifParameters,
    #[serde(default)]
    pub recurrent_gain: f64,
    #[serde(default = "one")]
    pub input_scale: f64,
    #[serde(default)]
    pub weights: WeightOverrides,
    pub stimulus: Stimulus,
}

fn one() -> f64 {
    1.0
}

fn normal_matrix(rows: usize, cols: usize, sd: f64, root: u64, component: &str) -> Result<Matrix> {
    let mut rng = component_rng(root, component);
    let normal = Normal::new(0.0, sd).map_err(|e| Error::invalid("gain", e.to_string()))?;
    Ok((0..rows)
        .map(|_| (0..cols).map(|_| normal.sample(&mut rng)).collect())
        .collect())
}

fn uniform_matrix(rows: usize, cols: usize, half: f64, root: u64, component: &str) -> Matrix {
    let mut rng = component_rng(root, component);
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if half > 0.0 {
                        rng.random_range(-half..=half)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

impl SpikingNetworkSpec {
    pub fn build(&self, root_seed: u64) -> Result<(SpikingNetwork, Matrix)> {
        let n = self.neurons;
        let recurrent = match &self.weights.recurrent {
            Some(m) => m.clone(),
            None => normal_matrix(
                n,
                n,
                self.recurrent_gain.abs() / (n.max(1) as f64).sqrt(),
                root_seed,
                "network.recurrent",
            )?,
        };
        let input = match &self.weights.input {
            Some(m) => m.clone(),
            None => uniform_matrix(n, self.inputs, self.input_scale.abs(), root_seed, "network.input"),
        };
        let output = match &self.weights.output {
            Some(m) => m.clone(),
            None => uniform_matrix(self.outputs, n, 1.0 / n.max(1) as f64, root_seed, "network.output"),
        };
        if self.stimulus.amplitude.len() != self.inputs {
            return Err(Error::DimensionMismatch(format!(
                "stimulus has {} channels for {} inputs",
                self.stimulus.amplitude.len(),
                self.inputs
            )));
        }
        let net = SpikingNetwork {
            lif: self.lif,
            recurrent,
            input,
            output,
        };
        net.validate()?;
        Ok((net, self.stimulus.render(self.lif.dt)))
    }
}

/// JSON description of a rate run. Drawn recurrent weights are
/// `N(0, (gain / sqrt(N))^2)`; input and feedback weights are uniform on
/// `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateNetworkSpec {
    pub units: usize,
    pub inputs: usize,
    pub outputs: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_rate_dt")]
    pub dt: f64,
    #[serde(default = "default_rate_gain")]
    pub gain: f64,
    #[serde(default)]
    pub weights: RateWeightOverrides,
    pub stimulus: Stimulus,
    /// Externally supplied `Fout`; zero when absent.
    #[serde(default)]
    pub feedback: Option<Stimulus>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateWeightOverrides {
    pub recurrent: Option<Matrix>,
    pub input: Option<Matrix>,
    pub feedback: Option<Matrix>,
    pub readout: Option<Matrix>,
}

fn default_tau() -> f64 {
    0.010
}

fn default_rate_dt() -> f64 {
    0.001
}

fn default_rate_gain() -> f64 {
    1.5
}

impl RateNetworkSpec {
    /// Network, `Fin`, and the `Fout` feedback signal.
    pub fn build(&self, root_seed: u64) -> Result<(RateNetwork, Matrix, Matrix)> {
        let n = self.units;
        let w = &self.weights;
        let recurrent = match &w.recurrent {
            Some(m) => m.clone(),
            None => normal_matrix(
                n,
                n,
                self.gain.abs() / (n.max(1) as f64).sqrt(),
                root_seed,
                "rate.recurrent",
            )?,
        };
        let input = w
            .input
            .clone()
            .unwrap_or_else(|| uniform_matrix(n, self.inputs, 1.0, root_seed, "rate.input"));
        let feedback = w
            .feedback
            .clone()
            .unwrap_or_else(|| uniform_matrix(n, self.outputs, 1.0, root_seed, "rate.feedback"));
        let readout = (self.outputs > 0).then(|| {
            w.readout
                .clone()
                .unwrap_or_else(|| uniform_matrix(self.outputs, n, 1.0 / n.max(1) as f64, root_seed, "rate.readout"))
        });
        if self.stimulus.amplitude.len() != self.inputs {
            return Err(Error::DimensionMismatch(format!(
                "stimulus has {} channels for {} inputs",
                self.stimulus.amplitude.len(),
                self.inputs
            )));
        }
        let fin = self.stimulus.render(self.dt);
        let fout = match &self.feedback {
            Some(s) => {
                if s.steps != self.stimulus.steps || s.amplitude.len() != self.outputs {
                    return Err(Error::DimensionMismatch(
                        "feedback must match stimulus steps and output count".into(),
                    ));
                }
                s.render(self.dt)
            }
            None => vec![vec![0.0; self.stimulus.steps]; self.outputs],
        };
        let net = RateNetwork {
            recurrent,
            input,
            feedback,
            readout,
            tau: self.tau,
            dt: self.dt,
        };
        net.validate()?;
        Ok((net, fin, fout))
    }
}
