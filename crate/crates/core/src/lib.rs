//! Analysis and simulation toolkit for proteinoid spiking recordings.
//!
//! * [`dpv`] builds differential pulse voltammetry excitation waveforms.
//! * [`signal`] reads, writes and synthesises time series.
//! * [`spikes`] detects spikes and computes inter-spike statistics.
//! * [`coding`] turns traces into binary temporal codes and scores synaptic
//!   weight matrices.
//! * [`network`] simulates LIF spiking and `tanh` rate networks.
//! * [`qsar`] evaluates and fits the firing-rate surface.
//! * [`pipeline`] ties detection, coding and scoring together per manifest.

pub mod coding;
pub mod config;
pub mod dpv;
pub mod error;
pub mod network;
pub mod pipeline;
pub mod qsar;
pub mod seed;
pub mod signal;
pub mod spikes;
pub mod tables;

pub use coding::{
    encode, fire_step, init_weights, psi_ppi, table1_fixture, CodeMatrix, CodingConfig, PsiPpiGrid, WeightMatrix,
    WeightSource,
};
pub use config::RunConfig;
pub use dpv::{generate_waveform, sample_instants, step_count, DpvParameters, PotentialWaveform};
pub use error::{Error, Result};
pub use network::{
    run_rate, run_spiking, step_lif, LifParameters, LifState, RateNetwork, SimulationTrace, SpikingNetwork,
};
pub use pipeline::{run_pipeline, PipelineReport};
pub use qsar::{confidence_bounds, fit, percent_deviation, predict, FitResult, QsarCoefficients, QsarObservation};
pub use signal::{
    read_timeseries_csv, synthesize_spiky_series, write_timeseries_csv, ExperimentManifest, SyntheticSpikeSpec,
    TimeSeries, Unit,
};
pub use spikes::{
    aggregate_stats, compute_stats, detect_spikes, detect_spikes_naive, SpikeDetectionConfig, SpikeStats, SpikeTrain,
};
