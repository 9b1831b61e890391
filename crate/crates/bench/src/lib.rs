//! Inputs shared by the benchmarks.

use protoneuro_core::network::{LifParameters, SpikingNetwork};
use protoneuro_core::qsar::{predict, QsarCoefficients, QsarObservation};
use protoneuro_core::signal::{synthesize_spiky_series, SyntheticSpikeSpec, TimeSeries};

/// Jittered spike train with baseline noise, one sample per second.
pub fn noisy_recording(count: usize, mean_isi: f64, seed: u64) -> TimeSeries {
    let spec = SyntheticSpikeSpec {
        noise_sd: 1e-4,
        ..SyntheticSpikeSpec::regular(count, mean_isi, 0.3, seed)
    };
    synthesize_spiky_series(&spec).expect("valid spec")
}

/// Noiseless samples of the published surface on a deterministic grid.
pub fn qsar_observations(m: usize) -> Vec<QsarObservation> {
    let coeffs = QsarCoefficients::published();
    (0..m)
        .map(|i| {
            let x = 150.0 + (i * 37 % 600) as f64;
            let y = 1.0 + (i % 6) as f64;
            QsarObservation::new(format!("s{i}"), x, y, predict(&coeffs, x, y).unwrap())
        })
        .collect()
}

/// `n` identical neurons with weak uniform coupling and a shared input.
pub fn coupled_lif(n: usize) -> SpikingNetwork {
    SpikingNetwork {
        lif: LifParameters::default(),
        recurrent: vec![vec![0.0005; n]; n],
        input: (0..n).map(|j| vec![1.0 + 0.05 * j as f64]).collect(),
        output: vec![vec![1.0 / n as f64; n]],
    }
}
