//! `protoneuro` command-line tool.
//!
//! Settings come from a JSON run config (`--config`), then the
//! `PROTONEURO_SEED` environment variable, then command-line flags; later
//! sources win. Exit codes: 0 success, 1 I/O, 2 validation, 3 numeric failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "protoneuro",
    version,
    about = "Proteinoid spike analysis, temporal coding and network simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// JSON run configuration; missing sections take their defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root seed; overrides the config file and PROTONEURO_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the DPV excitation waveform and its sampling instants.
    Waveform(WaveformArgs),
    /// Detect spikes in one recording and report interval statistics.
    Detect(DetectArgs),
    /// Run detection, statistics, coding and PSI/PPI scoring over a manifest.
    Pipeline(PipelineArgs),
    /// Write a synthetic spiking recording.
    Synth(SynthArgs),
    /// Binary temporal codes for one or more recordings.
    Encode(EncodeArgs),
    /// Write a synaptic weight matrix, seeded (`--seed`) or the fixture (`--table1`).
    Weights(WeightsArgs),
    /// Simulate a recurrent LIF network.
    SimSpiking(SimArgs),
    /// Simulate a tanh rate network.
    SimRate(SimArgs),
    /// Fit the nine-term firing-rate surface to observations.
    QsarFit(QsarFitArgs),
    /// Evaluate the firing-rate surface.
    QsarPredict(QsarPredictArgs),
    /// Summarise a pipeline report.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct WaveformArgs {
    /// Waveform CSV; defaults to <output_dir>/waveform.csv.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write the before/after-pulse sampling instants here.
    #[arg(long, value_name = "FILE")]
    pub instants: Option<PathBuf>,
    /// Equilibrium time, s.
    #[arg(long)]
    pub equilibrium_time: Option<f64>,
    /// Start potential, V.
    #[arg(long, allow_negative_numbers = true)]
    pub start_potential: Option<f64>,
    /// End potential, V.
    #[arg(long, allow_negative_numbers = true)]
    pub end_potential: Option<f64>,
    /// Staircase step, V.
    #[arg(long, allow_negative_numbers = true)]
    pub step_size: Option<f64>,
    /// Pulse height above the staircase, V.
    #[arg(long, allow_negative_numbers = true)]
    pub pulse_amplitude: Option<f64>,
    /// Pulse width, s.
    #[arg(long)]
    pub pulse_width: Option<f64>,
    /// Scan rate, V/s.
    #[arg(long)]
    pub scan_rate: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct DetectArgs {
    /// Recording CSV (`time_s,value`).
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Detection threshold in the recording's unit.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Minimum distance between retained peaks, s.
    #[arg(long)]
    pub min_peak_distance: Option<f64>,
    /// Output directory; defaults to the config's output_dir.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum WeightsChoice {
    Table1,
    Seeded,
}

#[derive(Args)]
pub struct PipelineArgs {
    /// Experiment manifest JSON.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Output directory; defaults to the config's output_dir.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Weight source, overriding the manifest.
    #[arg(long, value_enum)]
    pub weights: Option<WeightsChoice>,
    /// Neuron count, overriding the manifest.
    #[arg(long)]
    pub neurons: Option<usize>,
    /// Detection threshold, overriding the manifest.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Coding threshold, overriding the manifest.
    #[arg(long, allow_negative_numbers = true)]
    pub coding_threshold: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Synthetic spike spec JSON; defaults to the config's `synth` section.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Output CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Noise standard deviation, overriding the spec.
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct EncodeArgs {
    /// Recording CSVs, one neuron each.
    #[arg(long = "input", value_name = "FILE", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Coding threshold.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Code matrix CSV; defaults to <output_dir>/codes.csv.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

/// Seeded weights unless `--table1` is given.
#[derive(Args)]
pub struct WeightsArgs {
    /// The fixed 10x10 fixture instead of seeded draws.
    #[arg(long, conflicts_with = "seed")]
    pub table1: bool,
    /// Matrix size for seeded weights.
    #[arg(long, default_value_t = 10)]
    pub neurons: usize,
    /// Weight CSV; printed to stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct SimArgs {
    /// Network spec JSON; defaults to the config's `spiking`/`rate` section.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Output directory; defaults to the config's output_dir.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Number of steps, overriding the stimulus.
    #[arg(long)]
    pub steps: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct QsarFitArgs {
    /// Observations CSV (`label,molecular_weight_gmol,peptide_length,mean_firing_rate_hz`).
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Confidence level of the coefficient bounds.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Coefficient JSON; printed to stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct QsarPredictArgs {
    /// Coefficient JSON; the published surface when absent.
    #[arg(long, value_name = "FILE")]
    pub coefficients: Option<PathBuf>,
    /// Molecular weight, g/mol.
    #[arg(long, requires = "y", conflicts_with = "data")]
    pub x: Option<f64>,
    /// Peptide length, residues.
    #[arg(long, requires = "x")]
    pub y: Option<f64>,
    /// Observations CSV; prints prediction and percent deviation per row.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct ReportArgs {
    /// report.json written by `pipeline`.
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Waveform(a) => commands::waveform(a),
        Command::Detect(a) => commands::detect(a),
        Command::Pipeline(a) => commands::pipeline(a),
        Command::Synth(a) => commands::synth(a),
        Command::Encode(a) => commands::encode(a),
        Command::Weights(a) => commands::weights(a),
        Command::SimSpiking(a) => commands::sim_spiking(a),
        Command::SimRate(a) => commands::sim_rate(a),
        Command::QsarFit(a) => commands::qsar_fit(a),
        Command::QsarPredict(a) => commands::qsar_predict(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
