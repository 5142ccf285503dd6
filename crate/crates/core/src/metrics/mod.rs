//! Fréchet distance between Gaussian fits of two feature sets, and mean
//! pairwise cosine dissimilarity as a diversity score.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::cosine_similarity;

mod features;

pub use features::{
    extract_features, read_feature_file, write_feature_file, FeatureExtractor, PixelStats, PIXEL_STATS_DIM,
    PIXEL_STATS_NAME,
};

/// Negative distances down to this magnitude are rounding noise.
pub const NEGATIVE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("feature dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("feature matrix has a non-finite entry at row {row}")]
    NonFinite { row: usize },
    #[error("row {0} is all zeros")]
    ZeroRow(usize),
    #[error("Fréchet distance is not finite or significantly negative ({0})")]
    BadDistance(f64),
    #[error("feature extraction failed: {0}")]
    Extraction(String),
    #[error("feature file line {line}: {message}")]
    FeatureFile { line: usize, message: String },
}

/// `n` samples of `d` features, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub source: String,
    rows: Vec<Vec<f64>>,
    d: usize,
}

impl FeatureSet {
    pub fn new(source: impl Into<String>, rows: Vec<Vec<f64>>) -> Result<Self, MetricsError> {
        let d = rows.first().map_or(0, Vec::len);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(MetricsError::DimensionMismatch(d, r.len()));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(MetricsError::NonFinite { row: i });
            }
        }
        Ok(Self { source: source.into(), rows, d })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Sample mean and unbiased (n-1) covariance, symmetrized.
pub fn fit_gaussian(fs: &FeatureSet) -> Result<GaussianStats, MetricsError> {
    let n = fs.n();
    if n < 2 {
        return Err(MetricsError::TooFewSamples(n));
    }
    let d = fs.d();
    let x = DMatrix::from_fn(n, d, |i, j| fs.rows[i][j]);
    let mean = DVector::from_fn(d, |j, _| x.column(j).sum() / n as f64);
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianStats { mean, cov })
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix with everything below the roundoff
/// floor (negative or not) set to zero. Left alone, a zero eigenvalue that
/// comes out as 1e-16 turns into 1e-8 after the square root.
fn clipped_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let mut eig = SymmetricEigen::new(sym(m));
    let top = eig.eigenvalues.iter().fold(0f64, |acc, l| acc.max(l.abs()));
    let floor = top * m.nrows() as f64 * f64::EPSILON * 4.0;
    eig.eigenvalues.apply(|l| {
        if *l <= floor {
            *l = 0.0
        }
    });
    eig
}

/// Square root of a symmetric PSD matrix.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = clipped_eigen(m);
    let vals = eig.eigenvalues.map(f64::sqrt);
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Trace of `(a b)^{1/2}` computed as `tr((s b s)^{1/2})` with `s = a^{1/2}`,
/// which keeps the product symmetric.
fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let s = psd_sqrt(a);
    let m = sym(&(&s * b * &s));
    clipped_eigen(&m).eigenvalues.iter().map(|l| l.sqrt()).sum()
}

/// `|mu_a - mu_b|^2 + tr(cov_a + cov_b - 2 (cov_a cov_b)^{1/2})`.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64, MetricsError> {
    let d = a.mean.len();
    if b.mean.len() != d || a.cov.nrows() != d || b.cov.nrows() != d {
        return Err(MetricsError::DimensionMismatch(d, b.mean.len()));
    }
    let diff = (&a.mean - &b.mean).norm_squared();
    let dist = diff + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt_product(&a.cov, &b.cov);
    if !dist.is_finite() || dist < -NEGATIVE_TOLERANCE {
        return Err(MetricsError::BadDistance(dist));
    }
    if dist < 0.0 {
        tracing::debug!(dist, "clamping small negative Fréchet distance to zero");
        return Ok(0.0);
    }
    Ok(dist)
}

/// Mean over unordered pairs of `1 - cos(row_i, row_j)`, times 100.
pub fn generation_diversity(fs: &FeatureSet) -> Result<f64, MetricsError> {
    let n = fs.n();
    if n < 2 {
        return Err(MetricsError::TooFewSamples(n));
    }
    if let Some(i) = fs.rows.iter().position(|r| r.iter().all(|v| *v == 0.0)) {
        return Err(MetricsError::ZeroRow(i));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let c = cosine_similarity(&fs.rows[i], &fs.rows[j]).map_err(|e| MetricsError::Extraction(e.to_string()))?;
            total += 1.0 - c;
        }
    }
    Ok(100.0 * total / (n * (n - 1) / 2) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fid: f64,
    pub gd: f64,
    pub n_real: usize,
    pub n_gen: usize,
    pub extractor: String,
}

/// FID of `generated` against `real`, and GD of `generated`.
pub fn evaluate(real: &FeatureSet, generated: &FeatureSet, extractor: &str) -> Result<EvalReport, MetricsError> {
    if real.d() != generated.d() {
        return Err(MetricsError::DimensionMismatch(real.d(), generated.d()));
    }
    let fid = frechet_distance(&fit_gaussian(real)?, &fit_gaussian(generated)?)?;
    let gd = generation_diversity(generated)?;
    Ok(EvalReport { fid, gd, n_real: real.n(), n_gen: generated.n(), extractor: extractor.to_string() })
}
