//! Cubic firing-rate surface over molecular weight `x` (g/mol) and peptide
//! length `y` (residues):
//!
//! ```text
//! f(x, y) = p00 + p10 x + p01 y + p20 x^2 + p11 x y + p02 y^2
//!         + p21 x^2 y + p12 x y^2 + p03 y^3
//! ```
//!
//! Fitting is ordinary least squares on the column-scaled design matrix:
//! rank is judged from its singular values, the solve goes through a
//! Householder QR. Coefficients are reported in the original units.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const BASIS_LEN: usize = 9;

/// Coefficient names in basis order.
pub const BASIS_NAMES: [&str; BASIS_LEN] = ["p00", "p10", "p01", "p20", "p11", "p02", "p21", "p12", "p03"];

/// Basis row `[1, x, y, x^2, xy, y^2, x^2 y, x y^2, y^3]`.
pub fn basis(x: f64, y: f64) -> [f64; BASIS_LEN] {
    [1.0, x, y, x * x, x * y, y * y, x * x * y, x * y * y, y * y * y]
}

/// Relative singular-value cutoff below which the design is rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QsarCoefficients {
    pub p00: f64,
    pub p10: f64,
    pub p01: f64,
    pub p20: f64,
    pub p11: f64,
    pub p02: f64,
    pub p21: f64,
    pub p12: f64,
    pub p03: f64,
    /// Per-coefficient `[low, high]` intervals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<CoefficientBounds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientBounds {
    pub p00: [f64; 2],
    pub p10: [f64; 2],
    pub p01: [f64; 2],
    pub p20: [f64; 2],
    pub p11: [f64; 2],
    pub p02: [f64; 2],
    pub p21: [f64; 2],
    pub p12: [f64; 2],
    pub p03: [f64; 2],
}

impl CoefficientBounds {
    pub fn from_array(b: [[f64; 2]; BASIS_LEN]) -> Self {
        CoefficientBounds {
            p00: b[0],
            p10: b[1],
            p01: b[2],
            p20: b[3],
            p11: b[4],
            p02: b[5],
            p21: b[6],
            p12: b[7],
            p03: b[8],
        }
    }

    pub fn to_array(&self) -> [[f64; 2]; BASIS_LEN] {
        [
            self.p00, self.p10, self.p01, self.p20, self.p11, self.p02, self.p21, self.p12, self.p03,
        ]
    }
}

impl QsarCoefficients {
    pub fn from_array(c: [f64; BASIS_LEN]) -> Self {
        QsarCoefficients {
            p00: c[0],
            p10: c[1],
            p01: c[2],
            p20: c[3],
            p11: c[4],
            p02: c[5],
            p21: c[6],
            p12: c[7],
            p03: c[8],
            bounds: None,
        }
    }

    pub fn to_array(&self) -> [f64; BASIS_LEN] {
        [
            self.p00, self.p10, self.p01, self.p20, self.p11, self.p02, self.p21, self.p12, self.p03,
        ]
    }

    /// The published surface, with its 95% bounds.
    pub fn published() -> Self {
        QsarCoefficients {
            bounds: Some(CoefficientBounds::from_array([
                [-3560.0, 8258.0],
                [-45.24, 21.07],
                [-1.172e4, 8182.0],
                [-0.6961, 0.4664],
                [-128.7, 225.7],
                [-1.132e4, 6227.0],
                [-0.1628, 0.2561],
                [-79.99, 45.5],
                [-2675.0, 4977.0],
            ])),
            ..QsarCoefficients::from_array([
                2349.0, -12.08, -1770.0, -0.1149, 48.49, -2545.0, 0.04667, -17.24, 1151.0,
            ])
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in BASIS_NAMES.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("coefficient {name}")));
            }
        }
        if let Some(b) = &self.bounds {
            for ((name, v), [lo, hi]) in BASIS_NAMES.iter().zip(self.to_array()).zip(b.to_array()) {
                if !(lo <= v && v <= hi) {
                    return Err(Error::Validation(format!(
                        "{name} = {v} lies outside its bounds [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn with_bounds(mut self, bounds: [[f64; 2]; BASIS_LEN]) -> Self {
        self.bounds = Some(CoefficientBounds::from_array(bounds));
        self
    }
}

/// Evaluate the surface at `(x, y)`.
pub fn predict(coeffs: &QsarCoefficients, x: f64, y: f64) -> Result<f64> {
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::NonFinite(format!("predictor ({x}, {y})")));
    }
    let c = coeffs.to_array();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coefficient".into()));
    }
    Ok(basis(x, y).iter().zip(c).map(|(b, p)| b * p).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePredictors {
    pub label: String,
    /// Molecular weight, g/mol.
    pub x: f64,
    /// Peptide length, residues.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsarObservation {
    pub predictors: SamplePredictors,
    /// Hz.
    pub mean_firing_rate: f64,
}

impl QsarObservation {
    pub fn new(label: impl Into<String>, x: f64, y: f64, rate: f64) -> Self {
        QsarObservation {
            predictors: SamplePredictors {
                label: label.into(),
                x,
                y,
            },
            mean_firing_rate: rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.predictors;
        if !(p.x.is_finite() && p.x > 0.0) {
            return Err(Error::Validation(format!("{}: molecular weight must be > 0", p.label)));
        }
        if !(p.y.is_finite() && p.y >= 1.0) {
            return Err(Error::Validation(format!("{}: peptide length must be >= 1", p.label)));
        }
        if !self.mean_firing_rate.is_finite() {
            return Err(Error::Validation(format!("{}: firing rate must be finite", p.label)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficients: QsarCoefficients,
    pub residual_sum_of_squares: f64,
    pub observations: usize,
}

/// Column-scaled design matrix and the per-column scale factors.
struct ScaledDesign {
    matrix: DMatrix<f64>,
    scale: [f64; BASIS_LEN],
}

fn scaled_design(observations: &[QsarObservation]) -> ScaledDesign {
    let m = observations.len();
    let mut matrix = DMatrix::<f64>::zeros(m, BASIS_LEN);
    for (r, o) in observations.iter().enumerate() {
        for (c, v) in basis(o.predictors.x, o.predictors.y).into_iter().enumerate() {
            matrix[(r, c)] = v;
        }
    }
    let mut scale = [1.0; BASIS_LEN];
    for (c, s) in scale.iter_mut().enumerate() {
        let max = matrix.column(c).amax();
        if max > 0.0 {
            *s = max;
            matrix.column_mut(c).unscale_mut(max);
        }
    }
    ScaledDesign { matrix, scale }
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > max * RANK_TOLERANCE).count()
}

/// Basis columns that are linear combinations of earlier ones.
fn dependent_columns(design: &DMatrix<f64>) -> Vec<&'static str> {
    let mut kept: Vec<usize> = Vec::new();
    let mut dependent = Vec::new();
    for (c, name) in BASIS_NAMES.iter().enumerate() {
        let mut trial = kept.clone();
        trial.push(c);
        let sub = design.select_columns(trial.iter());
        if numerical_rank(&sub) == trial.len() {
            kept.push(c);
        } else {
            dependent.push(*name);
        }
    }
    dependent
}

fn check_observations(observations: &[QsarObservation]) -> Result<()> {
    if observations.len() < BASIS_LEN {
        return Err(Error::TooFewObservations {
            required: BASIS_LEN,
            actual: observations.len(),
        });
    }
    observations.iter().try_for_each(QsarObservation::validate)
}

/// Least-squares fit of the nine-term surface.
pub fn fit(observations: &[QsarObservation]) -> Result<FitResult> {
    check_observations(observations)?;
    let design = scaled_design(observations);
    let rank = numerical_rank(&design.matrix);
    if rank < BASIS_LEN {
        return Err(Error::RankDeficient {
            rank,
            dependent: dependent_columns(&design.matrix),
        });
    }

    let rates = DVector::from_iterator(observations.len(), observations.iter().map(|o| o.mean_firing_rate));
    let qr = design.matrix.clone().qr();
    let qt_b = qr.q().transpose() * rates;
    let scaled_beta = qr
        .r()
        .solve_upper_triangular(&qt_b)
        .ok_or_else(|| Error::NonFinite("least-squares solve: singular R".into()))?;

    let mut values = [0.0; BASIS_LEN];
    for (c, v) in values.iter_mut().enumerate() {
        *v = scaled_beta[c] / design.scale[c];
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fitted coefficient".into()));
    }
    let coefficients = QsarCoefficients::from_array(values);
    let rss = residuals(&coefficients, observations).iter().map(|r| r * r).sum();
    Ok(FitResult {
        coefficients,
        residual_sum_of_squares: rss,
        observations: observations.len(),
    })
}

/// `rate - f(x, y)` per observation.
pub fn residuals(coeffs: &QsarCoefficients, observations: &[QsarObservation]) -> Vec<f64> {
    let c = coeffs.to_array();
    observations
        .iter()
        .map(|o| {
            let f: f64 = basis(o.predictors.x, o.predictors.y)
                .iter()
                .zip(c)
                .map(|(b, p)| b * p)
                .sum();
            o.mean_firing_rate - f
        })
        .collect()
}

/// Two-sided `level` intervals `beta +/- t * se` with the residual variance
/// on `m - 9` degrees of freedom.
pub fn confidence_bounds(
    fit: &FitResult,
    observations: &[QsarObservation],
    level: f64,
) -> Result<[[f64; 2]; BASIS_LEN]> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", "must lie in (0, 1)"));
    }
    check_observations(observations)?;
    let m = observations.len();
    if m <= BASIS_LEN {
        return Err(Error::InsufficientDegreesOfFreedom {
            observations: m,
            parameters: BASIS_LEN,
        });
    }
    let dof = (m - BASIS_LEN) as f64;
    let design = scaled_design(observations);
    let rank = numerical_rank(&design.matrix);
    if rank < BASIS_LEN {
        return Err(Error::RankDeficient {
            rank,
            dependent: dependent_columns(&design.matrix),
        });
    }
    // (A^T A)^-1 = R^-1 R^-T, so its diagonal is the squared row norms of R^-1
    let r_inv = design
        .matrix
        .clone()
        .qr()
        .r()
        .solve_upper_triangular(&DMatrix::identity(BASIS_LEN, BASIS_LEN))
        .ok_or_else(|| Error::NonFinite("singular R in covariance".into()))?;

    let rss: f64 = residuals(&fit.coefficients, observations).iter().map(|r| r * r).sum();
    let sigma2 = rss / dof;
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::invalid("level", e.to_string()))?
        .inverse_cdf(0.5 + level / 2.0);

    let values = fit.coefficients.to_array();
    let mut out = [[0.0; 2]; BASIS_LEN];
    for c in 0..BASIS_LEN {
        let var_scaled = r_inv.row(c).norm_squared();
        let se = (sigma2 * var_scaled).sqrt() / design.scale[c];
        out[c] = [values[c] - t * se, values[c] + t * se];
    }
    Ok(out)
}

/// `100 * (predicted - mean) / mean`.
pub fn percent_deviation(mean: f64, predicted: f64) -> Result<f64> {
    if mean == 0.0 {
        return Err(Error::ZeroMean);
    }
    if !mean.is_finite() || !predicted.is_finite() {
        return Err(Error::NonFinite("percent deviation input".into()));
    }
    Ok(100.0 * (predicted - mean) / mean)
}

pub const OBSERVATION_HEADER: &str = "label,molecular_weight_gmol,peptide_length,mean_firing_rate_hz";

pub fn read_observations<R: BufRead>(input: R, origin: &Path) -> Result<Vec<QsarObservation>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    let mut header_seen = false;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !header_seen {
            if trimmed != OBSERVATION_HEADER {
                return Err(parse_err(lineno, format!("expected header `{OBSERVATION_HEADER}`")));
            }
            header_seen = true;
            continue;
        }
        // labels may contain commas; the numeric fields are the last three
        let mut fields = trimmed.rsplitn(4, ',');
        let mut num = |what: &str| -> Result<f64> {
            let f = fields
                .next()
                .ok_or_else(|| parse_err(lineno, format!("missing {what}")))?;
            f.trim()
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad {what} `{f}`: {e}")))
        };
        let rate = num("mean_firing_rate_hz")?;
        let y = num("peptide_length")?;
        let x = num("molecular_weight_gmol")?;
        let label = fields.next().ok_or_else(|| parse_err(lineno, "missing label".into()))?;
        let obs = QsarObservation::new(label, x, y, rate);
        obs.validate()?;
        out.push(obs);
    }
    if !header_seen {
        return Err(parse_err(1, "missing header".into()));
    }
    Ok(out)
}

pub fn read_observations_csv(path: &Path) -> Result<Vec<QsarObservation>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_observations(BufReader::new(file), path)
}

pub fn write_observations<W: Write>(observations: &[QsarObservation], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{OBSERVATION_HEADER}")?;
    for o in observations {
        writeln!(
            out,
            "{},{},{},{}",
            o.predictors.label, o.predictors.x, o.predictors.y, o.mean_firing_rate
        )?;
    }
    Ok(())
}
