//! Temporal coding of potential traces, synaptic weights, and the PSI/PPI
//! connection-strength grid.
//!
//! Row `j` of a code matrix belongs to neuron `j`; sample `j` of an experiment
//! is assigned to neuron `j` in label order.
//!
//! PSI/PPI are computed as weight times mean presynaptic activity:
//! `grid[j][i] = W[j][i] * mean_k(c[i][k])`, with PSI the row sums (input
//! received by post-synaptic neuron `j`) and PPI the column sums (output sent
//! by pre-synaptic neuron `i`).

use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::seeded_rng;
use crate::tables::TABLE1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodingConfig {
    pub neuron_count: usize,
    /// Strict coding threshold in the units of the encoded trace.
    pub threshold: f64,
    /// Seconds. Carried for provenance; no formula consumes it.
    pub time_window: f64,
    /// Columns to encode; `None` uses every shared sample.
    pub sample_count: Option<usize>,
}

impl Default for CodingConfig {
    fn default() -> Self {
        CodingConfig {
            neuron_count: 10,
            threshold: 0.0005,
            time_window: 1.0,
            sample_count: None,
        }
    }
}

impl CodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neuron_count == 0 {
            return Err(Error::invalid("neuron_count", "must be >= 1"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::invalid("threshold", "must be finite"));
        }
        if !(self.time_window.is_finite() && self.time_window > 0.0) {
            return Err(Error::invalid("time_window", "must be > 0"));
        }
        if self.sample_count == Some(0) {
            return Err(Error::invalid("sample_count", "must be >= 1"));
        }
        Ok(())
    }

    /// [`encode`] after checking the matrix is `neuron_count` by
    /// `sample_count`.
    pub fn encode(&self, potentials: &[Vec<f64>]) -> Result<CodeMatrix> {
        self.validate()?;
        if potentials.len() != self.neuron_count {
            return Err(Error::DimensionMismatch(format!(
                "{} potential rows for {} neurons",
                potentials.len(),
                self.neuron_count
            )));
        }
        if let Some(n) = self.sample_count {
            if let Some(row) = potentials.iter().position(|r| r.len() != n) {
                return Err(Error::DimensionMismatch(format!(
                    "row {row} has {} samples, expected {n}",
                    potentials[row].len()
                )));
            }
        }
        encode(potentials, self.threshold)
    }
}

fn check_rectangular<T>(rows: &[Vec<T>], what: &str) -> Result<usize> {
    let width = rows.first().map_or(0, Vec::len);
    if let Some(r) = rows.iter().position(|row| row.len() != width) {
        return Err(Error::DimensionMismatch(format!(
            "{what} row {r} has {} columns, expected {width}",
            rows[r].len()
        )));
    }
    Ok(width)
}

/// Binary spike-presence matrix, one row per neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeMatrix {
    pub entries: Vec<Vec<u8>>,
    pub neuron_labels: Vec<String>,
    /// Seconds per column.
    pub time_base: f64,
}

impl CodeMatrix {
    pub fn neurons(&self) -> usize {
        self.entries.len()
    }

    pub fn columns(&self) -> usize {
        self.entries.first().map_or(0, Vec::len)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.entries.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} neurons",
                labels.len(),
                self.entries.len()
            )));
        }
        self.neuron_labels = labels;
        Ok(self)
    }

    pub fn with_time_base(mut self, time_base: f64) -> Self {
        self.time_base = time_base;
        self
    }

    /// Fraction of columns in which each neuron is active.
    pub fn mean_activity(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|row| {
                if row.is_empty() {
                    0.0
                } else {
                    row.iter().map(|&c| c as f64).sum::<f64>() / row.len() as f64
                }
            })
            .collect()
    }

    pub fn column(&self, k: usize) -> Vec<u8> {
        self.entries.iter().map(|row| row[k]).collect()
    }

    /// Neuron labels as the header, then one row of 0/1 per time column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.neuron_labels.join(","))?;
        for k in 0..self.columns() {
            let row: Vec<&str> = self.entries.iter().map(|r| if r[k] == 1 { "1" } else { "0" }).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `c[j][k] = 1` iff `potentials[j][k] > theta`.
pub fn encode(potentials: &[Vec<f64>], theta: f64) -> Result<CodeMatrix> {
    if !theta.is_finite() {
        return Err(Error::invalid("threshold", "must be finite"));
    }
    check_rectangular(potentials, "potential")?;
    let entries = potentials
        .iter()
        .map(|row| row.iter().map(|&p| u8::from(p > theta)).collect())
        .collect();
    Ok(CodeMatrix {
        entries,
        neuron_labels: (1..=potentials.len()).map(|j| format!("neuron_{j}")).collect(),
        time_base: 1.0,
    })
}

/// Square matrix of synaptic weights in `[-1, 1]`; `entries[j][i]` is the
/// weight from pre-synaptic neuron `i` onto post-synaptic neuron `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct WeightMatrix {
    entries: Vec<Vec<f64>>,
}

impl WeightMatrix {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Validation("weight matrix must be non-empty".into()));
        }
        let width = check_rectangular(&entries, "weight")?;
        if width != entries.len() {
            return Err(Error::DimensionMismatch(format!(
                "weight matrix is {}x{width}, must be square",
                entries.len()
            )));
        }
        for (j, row) in entries.iter().enumerate() {
            for (i, w) in row.iter().enumerate() {
                if !(-1.0..=1.0).contains(w) {
                    return Err(Error::Validation(format!("weight [{j}][{i}] = {w} outside [-1, 1]")));
                }
            }
        }
        Ok(WeightMatrix { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn get(&self, post: usize, pre: usize) -> f64 {
        self.entries[post][pre]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn scaled(&self, factor: f64) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|r| r.iter().map(|w| w * factor).collect())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in &self.entries {
            let cells: Vec<String> = row.iter().map(|w| w.to_string()).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<f64>>> for WeightMatrix {
    type Error = Error;

    fn try_from(entries: Vec<Vec<f64>>) -> Result<Self> {
        WeightMatrix::new(entries)
    }
}

impl From<WeightMatrix> for Vec<Vec<f64>> {
    fn from(w: WeightMatrix) -> Self {
        w.entries
    }
}

/// I.i.d. uniform weights on `[-1, 1]` from a ChaCha8 stream seeded with `seed`.
pub fn init_weights(n: usize, seed: u64) -> Result<WeightMatrix> {
    if n == 0 {
        return Err(Error::invalid("neuron_count", "must be >= 1"));
    }
    let mut rng = seeded_rng(seed);
    let entries = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    WeightMatrix::new(entries)
}

/// The published initial weights of the ten-neuron network.
pub fn table1_fixture() -> WeightMatrix {
    WeightMatrix {
        entries: TABLE1.iter().map(|r| r.to_vec()).collect(),
    }
}

/// Where a pipeline's weight matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSource {
    /// The published 10x10 matrix.
    #[default]
    Table1,
    /// [`init_weights`] with a seed derived from the run seed.
    Seeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiPpiGrid {
    pub psi: Vec<f64>,
    pub ppi: Vec<f64>,
    pub grid: Vec<Vec<f64>>,
}

impl PsiPpiGrid {
    pub fn write_csv<W: Write>(&self, labels: &[String], mut out: W) -> std::io::Result<()> {
        writeln!(out, "post\\pre,{}", labels.join(","))?;
        for (label, row) in labels.iter().zip(&self.grid) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{label},{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Standalone SVG heatmap of the grid. Cells run on a linear ramp from
    /// light green (lowest value) to dark blue (highest). PSI is printed at
    /// the right of each row and PPI under each column.
    pub fn to_svg(&self, labels: &[String]) -> String {
        const CELL: usize = 40;
        const MARGIN: usize = 140;
        const LOW: (f64, f64, f64) = (199.0, 233.0, 192.0);
        const HIGH: (f64, f64, f64) = (8.0, 48.0, 107.0);

        let n = self.grid.len();
        let (lo, hi) = self
            .grid
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = if hi > lo { hi - lo } else { 1.0 };
        let colour = |v: f64| {
            let f = if hi > lo { (v - lo) / span } else { 0.5 };
            let mix = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
            format!(
                "#{:02x}{:02x}{:02x}",
                mix(LOW.0, HIGH.0),
                mix(LOW.1, HIGH.1),
                mix(LOW.2, HIGH.2)
            )
        };

        let size = MARGIN + n * CELL + MARGIN;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="10">"#
        );
        for (j, row) in self.grid.iter().enumerate() {
            let y = MARGIN + j * CELL;
            let label = labels.get(j).map_or("", String::as_str);
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                MARGIN - 4,
                y + CELL / 2 + 3,
                xml_escape(label)
            );
            for (i, &v) in row.iter().enumerate() {
                let x = MARGIN + i * CELL;
                let _ = writeln!(
                    svg,
                    r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"><title>{v}</title></rect>"#,
                    colour(v)
                );
            }
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}">PSI {:.3}</text>"#,
                MARGIN + n * CELL + 4,
                y + CELL / 2 + 3,
                self.psi[j]
            );
        }
        for (i, label) in labels.iter().enumerate().take(n) {
            let x = MARGIN + i * CELL + CELL / 2;
            let _ = writeln!(
                svg,
                r#"<text x="{x}" y="{}" text-anchor="end" transform="rotate(-60 {x} {})">{}</text>"#,
                MARGIN - 4,
                MARGIN - 4,
                xml_escape(label)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x}" y="{}" text-anchor="middle">{:.3}</text>"#,
                MARGIN + n * CELL + 14,
                self.ppi[i]
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">PPI</text>"#,
            MARGIN - 4,
            MARGIN + n * CELL + 14
        );
        svg.push_str("</svg>\n");
        svg
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn psi_ppi(weights: &WeightMatrix, codes: &CodeMatrix) -> Result<PsiPpiGrid> {
    let n = weights.size();
    if codes.neurons() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n}x{n} weights against {} coded neurons",
            codes.neurons()
        )));
    }
    let activity = codes.mean_activity();
    let grid: Vec<Vec<f64>> = weights
        .entries()
        .iter()
        .map(|row| row.iter().zip(&activity).map(|(w, a)| w * a).collect())
        .collect();
    let psi = grid.iter().map(|row| row.iter().sum()).collect();
    let ppi = (0..n).map(|i| grid.iter().map(|row| row[i]).sum()).collect();
    Ok(PsiPpiGrid { psi, ppi, grid })
}

/// One propagation step: neuron `j` fires iff `(W c)[j] > theta_fire`.
pub fn fire_step(code_column: &[u8], weights: &WeightMatrix, theta_fire: f64) -> Result<Vec<u8>> {
    let n = weights.size();
    if code_column.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "code column of length {} against {n}x{n} weights",
            code_column.len()
        )));
    }
    Ok(weights
        .entries()
        .iter()
        .map(|row| {
            let drive: f64 = row.iter().zip(code_column).map(|(w, &c)| w * c as f64).sum();
            u8::from(drive > theta_fire)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn below_threshold_is_all_zero() {
        let c = encode(&[vec![0.1, 0.2], vec![-1.0, 0.0]], 0.5).unwrap();
        assert!(c.entries.iter().flatten().all(|&x| x == 0));
    }

    #[test]
    fn boundary_is_strict() {
        let c = encode(&[vec![0.2, 0.2000001]], 0.2).unwrap();
        assert_eq!(c.entries, vec![vec![0, 1]]);
    }

    #[test]
    fn two_by_two() {
        let c = encode(&[vec![0.1, 0.3], vec![0.5, 0.0]], 0.2).unwrap();
        assert_eq!(c.entries, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn ragged_input_rejected() {
        assert!(matches!(
            encode(&[vec![0.1, 0.3], vec![0.5]], 0.2),
            Err(Error::DimensionMismatch(_))
        ));
        let cfg = CodingConfig {
            neuron_count: 3,
            ..Default::default()
        };
        assert!(cfg.encode(&[vec![0.0], vec![0.0]]).is_err());
        let cfg = CodingConfig {
            neuron_count: 2,
            sample_count: Some(3),
            ..Default::default()
        };
        assert!(cfg.encode(&[vec![0.0; 2], vec![0.0; 2]]).is_err());
        assert!(cfg.encode(&[vec![0.0; 3], vec![0.0; 3]]).is_ok());
    }

    #[test]
    fn table1_cells() {
        let w = table1_fixture();
        assert_eq!(w.size(), 10);
        assert_eq!(
            w.entries()[0],
            vec![-1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0]
        );
        assert_eq!(w.get(0, 0), -1.0);
        assert_eq!(w.get(2, 2), -0.4);
        assert_eq!(w.get(9, 0), 0.3);
        assert!(w.entries().iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn seeded_weights() {
        let a = init_weights(1, 9).unwrap();
        assert!((-1.0..=1.0).contains(&a.get(0, 0)));
        assert_eq!(init_weights(10, 5).unwrap(), init_weights(10, 5).unwrap());
        assert_ne!(init_weights(10, 5).unwrap(), init_weights(10, 6).unwrap());
        assert!(init_weights(0, 1).is_err());
    }

    #[test]
    fn seeded_weights_are_centred() {
        let mut sum = 0.0;
        let mut count = 0usize;
        for seed in 0..10_000u64 {
            let w = init_weights(10, seed).unwrap();
            for &v in w.entries().iter().flatten() {
                assert!((-1.0..=1.0).contains(&v));
                sum += v;
                count += 1;
            }
        }
        assert!((sum / count as f64).abs() < 0.02);
    }

    #[test]
    fn weight_matrix_validation() {
        assert!(WeightMatrix::new(vec![vec![1.5]]).is_err());
        assert!(WeightMatrix::new(vec![vec![0.0, 0.0]]).is_err());
        assert!(WeightMatrix::new(vec![]).is_err());
        let w: WeightMatrix = serde_json::from_str("[[0.5, -0.5], [1, 0]]").unwrap();
        assert_eq!(w.get(1, 0), 1.0);
        assert!(serde_json::from_str::<WeightMatrix>("[[2.0]]").is_err());
    }

    fn all(n: usize, cols: usize, v: u8) -> CodeMatrix {
        CodeMatrix {
            entries: vec![vec![v; cols]; n],
            neuron_labels: (0..n).map(|i| i.to_string()).collect(),
            time_base: 1.0,
        }
    }

    #[test]
    fn psi_ppi_zero_and_identity_activity() {
        let w = table1_fixture();
        let zero = psi_ppi(&w, &all(10, 7, 0)).unwrap();
        assert!(zero.grid.iter().flatten().all(|&v| v == 0.0));
        assert!(zero.psi.iter().chain(&zero.ppi).all(|&v| v == 0.0));

        let ones = psi_ppi(&w, &all(10, 7, 1)).unwrap();
        assert_eq!(ones.grid, w.entries());
        assert_eq!(ones.psi, w.row_sums());
        assert!((ones.psi[0] - 2.0).abs() < 1e-12);
        // column 1 of Table 1
        let col0: f64 = [-1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 0.3].iter().sum();
        assert!((ones.ppi[0] - col0).abs() < 1e-12);

        assert!(psi_ppi(&w, &all(3, 7, 1)).is_err());
    }

    #[test]
    fn psi_ppi_scales_with_activity() {
        let w = init_weights(4, 3).unwrap();
        let mut codes = all(4, 4, 0);
        codes.entries[2] = vec![1, 1, 0, 0];
        let g = psi_ppi(&w, &codes).unwrap();
        for j in 0..4 {
            for i in 0..4 {
                let expected = if i == 2 { 0.5 * w.get(j, i) } else { 0.0 };
                assert!((g.grid[j][i] - expected).abs() < 1e-15);
            }
            let row: f64 = g.grid[j].iter().sum();
            assert!((g.psi[j] - row).abs() < 1e-15);
        }
    }

    #[test]
    fn fire_step_cases() {
        let w = table1_fixture();
        assert_eq!(fire_step(&[0; 10], &w, 0.1).unwrap(), vec![0; 10]);

        let id = WeightMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(fire_step(&[1, 0], &id, 0.5).unwrap(), vec![1, 0]);

        let out = fire_step(&[1; 10], &w, 0.0).unwrap();
        let expected: Vec<u8> = w.row_sums().iter().map(|&s| u8::from(s > 0.0)).collect();
        assert_eq!(out, expected);
        assert_eq!(out[0], 1);

        assert!(fire_step(&[1, 0, 1], &w, 0.0).is_err());
    }

    #[test]
    fn csv_and_svg_exports() {
        let c = encode(&[vec![0.1, 0.3], vec![0.5, 0.0]], 0.2)
            .unwrap()
            .with_labels(vec!["a".into(), "b".into()])
            .unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n0,1\n1,0\n");

        let g = psi_ppi(&table1_fixture(), &all(10, 2, 1)).unwrap();
        let labels: Vec<String> = (1..=10).map(|i| format!("s<{i}>")).collect();
        let svg = g.to_svg(&labels);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 100);
        assert!(svg.contains("s&lt;1&gt;"));
        // Table 1 spans [-1, 1]: -1 maps to the green end, 1 to the blue end
        assert!(svg.contains("#c7e9c0") && svg.contains("#08306b"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
            (1usize..6, 1usize..20)
                .prop_flat_map(|(r, c)| proptest::collection::vec(proptest::collection::vec(-2.0..2.0f64, c), r))
        }

        proptest! {
            #[test]
            fn encode_is_binary_and_monotone(p in matrix(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let c_lo = encode(&p, lo).unwrap();
                let c_hi = encode(&p, hi).unwrap();
                for (rl, rh) in c_lo.entries.iter().zip(&c_hi.entries) {
                    for (&l, &h) in rl.iter().zip(rh) {
                        prop_assert!(l <= 1 && h <= 1);
                        prop_assert!(h <= l);
                    }
                }
            }

            #[test]
            fn encode_fixed_point_on_binary(p in matrix()) {
                let c = encode(&p, 0.0).unwrap();
                let as_f: Vec<Vec<f64>> = c.entries.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
                prop_assert_eq!(encode(&as_f, 0.5).unwrap().entries, c.entries);
            }

            #[test]
            fn fire_step_scale_invariant(seed in any::<u64>(), bits in proptest::collection::vec(0u8..2, 6), theta in -2.0..2.0f64, k in 0.01..1.0f64) {
                let w = init_weights(6, seed).unwrap();
                let scaled = WeightMatrix::new(w.scaled(k)).unwrap();
                // products are not exactly associative in floating point, so
                // skip draws that sit on the firing boundary
                let drive: Vec<f64> = w.entries().iter()
                    .map(|r| r.iter().zip(&bits).map(|(x, &c)| x * c as f64).sum())
                    .collect();
                prop_assume!(drive.iter().all(|d| (d - theta).abs() > 1e-9));
                prop_assert_eq!(
                    fire_step(&bits, &w, theta).unwrap(),
                    fire_step(&bits, &scaled, k * theta).unwrap()
                );
            }

            #[test]
            fn psi_ppi_sums(seed in any::<u64>(), bits in proptest::collection::vec(0u8..2, 5 * 8)) {
                let w = init_weights(5, seed).unwrap();
                let codes = CodeMatrix {
                    entries: bits.chunks(8).map(|c| c.to_vec()).collect(),
                    neuron_labels: vec![String::new(); 5],
                    time_base: 1.0,
                };
                let g = psi_ppi(&w, &codes).unwrap();
                let total_psi: f64 = g.psi.iter().sum();
                let total_ppi: f64 = g.ppi.iter().sum();
                prop_assert!((total_psi - total_ppi).abs() < 1e-9);
                for i in 0..5 {
                    let col: f64 = g.grid.iter().map(|r| r[i]).sum();
                    prop_assert!((g.ppi[i] - col).abs() < 1e-12);
                }
            }
        }
    }
}
