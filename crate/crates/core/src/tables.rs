//! Published reference values for the twelve proteinoid samples.

/// One row of the spike-characteristics table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeRow {
    pub label: &'static str,
    pub count: usize,
    pub mean_isi_s: f64,
    pub frequency_mhz: f64,
}

impl SpikeRow {
    /// Whether the reported frequency agrees with `1000 / mean_isi` to 1%.
    /// Two rows (L-Asp, L-Glu:L-Arg) do not.
    pub fn is_consistent(&self) -> bool {
        let implied = 1000.0 / self.mean_isi_s;
        (implied - self.frequency_mhz).abs() / self.frequency_mhz <= 0.01
    }
}

const fn row(label: &'static str, count: usize, mean_isi_s: f64, frequency_mhz: f64) -> SpikeRow {
    SpikeRow {
        label,
        count,
        mean_isi_s,
        frequency_mhz,
    }
}

/// Spike count, mean inter-spike interval and spiking frequency under a
/// 0.0005 µA threshold and 5 s minimum peak distance.
pub const TABLE2: [SpikeRow; 12] = [
    row("L-Glu:L-Asp", 726, 22.24, 44.97),
    row("L-Glu:L-Asp:L-Phe", 359, 50.48, 19.80),
    row("L-Lys:L-Phe:L-Glu", 210, 85.75, 11.66),
    row("L-Glu:L-Phe:L-His", 382, 42.21, 23.69),
    row("L-Glu:L-Phe:PLLA", 555, 32.71, 30.57),
    row("L-Lys:L-Phe:L-His:PLLA", 195, 77.29, 12.94),
    row("L-Glu:L-Arg", 29, 544.68, 48.28),
    row("L-Asp", 779, 20.71, 36.26),
    row("L-Phe:L-Lys", 28, 666.11, 1.50),
    row("L-Glu:L-Asp:L-Pro", 8, 2541.00, 0.39),
    row("L-Phe", 900, 12.32, 81.15),
    row("L-Glu:L-Phe", 12, 1412.55, 0.71),
];

/// Mean firing rate under direct stimulation and the QSAR prediction, Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiringRow {
    pub label: &'static str,
    pub mean_firing_rate_hz: f64,
    pub predicted_hz: f64,
}

const fn firing(label: &'static str, mean_firing_rate_hz: f64, predicted_hz: f64) -> FiringRow {
    FiringRow {
        label,
        mean_firing_rate_hz,
        predicted_hz,
    }
}

pub const TABLE3: [FiringRow; 12] = [
    firing("L-Glu:L-Asp", 535.4877, 536.0542),
    firing("L-Glu:L-Asp:L-Phe", 436.2721, 492.8753),
    firing("L-Lys:L-Phe:L-Glu", 542.9443, 563.6253),
    firing("L-Glu:L-Phe:L-His", 567.0562, 521.7084),
    firing("L-Glu:L-Phe:PLLA", 498.2888, 551.9483),
    firing("L-Lys:L-Phe:L-His:PLLA", 650.4798, -901.3635),
    firing("L-Glu:L-Arg", 732.9516, -2041.8),
    firing("L-Asp", 529.072, 723.4966),
    firing("L-Phe:L-Lys", 768.2345, -2619.1),
    firing("L-Glu:L-Asp:L-Pro", 617.3223, 1345.4),
    firing("L-Phe", 491.5065, 471.338),
    firing("L-Glu:L-Phe", 665.2995, -1084.7),
];

/// Initial synaptic weights of the ten-neuron network, row-major.
pub const TABLE1: [[f64; 10]; 10] = [
    [-1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0, 1.0, 1.0, -1.0, 1.0, 1.0, -1.0, 1.0],
    [1.0, -1.0, -0.4, -1.0, -0.8, -1.0, -1.0, 1.0, -1.0, -1.0],
    [-1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 1.0, 1.0],
    [-1.0, -1.0, 0.2, -1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0],
    [-1.0, 1.0, 0.5, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 0.7],
    [1.0, -0.5, -0.6, 0.7, 1.0, 1.0, -0.7, 1.0, 1.0, -1.0],
    [-1.0, 1.0, 1.0, -0.9, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
    [0.3, 1.0, -1.0, -1.0, -0.2, -1.0, 0.1, -1.0, 1.0, -1.0],
];
