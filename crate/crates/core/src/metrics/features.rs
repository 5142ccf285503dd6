use image::imageops::{self, FilterType};
use serde::{Deserialize, Serialize};

use super::{FeatureSet, MetricsError};
use crate::model::Raster;

pub const PIXEL_STATS_NAME: &str = "pixel-stats";
pub const PIXEL_STATS_DIM: usize = 70;
const SIDE: u32 = 512;
const GRID: u32 = 8;

pub trait FeatureExtractor {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn extract(&self, raster: &Raster) -> Result<Vec<f64>, MetricsError>;
}

/// Per-channel mean and standard deviation (RGB in 0..1) followed by an
/// 8x8 grid of mean grayscale values, computed at 512x512.
#[derive(Debug, Clone, Copy, Default)]
pub struct PixelStats;

impl FeatureExtractor for PixelStats {
    fn name(&self) -> &str {
        PIXEL_STATS_NAME
    }

    fn dim(&self) -> usize {
        PIXEL_STATS_DIM
    }

    fn extract(&self, raster: &Raster) -> Result<Vec<f64>, MetricsError> {
        if raster.width() == 0 || raster.height() == 0 {
            return Err(MetricsError::Extraction("empty image".into()));
        }
        let img = if (raster.width(), raster.height()) == (SIDE, SIDE) {
            raster.image().clone()
        } else {
            imageops::resize(raster.image(), SIDE, SIDE, FilterType::Triangle)
        };
        let n = f64::from(SIDE * SIDE);
        let mut sum = [0.0f64; 3];
        let mut sq = [0.0f64; 3];
        let cell = SIDE / GRID;
        let mut grid = vec![0.0f64; (GRID * GRID) as usize];
        for (x, y, p) in img.enumerate_pixels() {
            let c = [p[0], p[1], p[2]].map(|v| f64::from(v) / 255.0);
            for k in 0..3 {
                sum[k] += c[k];
                sq[k] += c[k] * c[k];
            }
            grid[((y / cell) * GRID + x / cell) as usize] += 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
        }
        let mut out = Vec::with_capacity(PIXEL_STATS_DIM);
        for k in 0..3 {
            let mean = sum[k] / n;
            out.push(mean);
            out.push((sq[k] / n - mean * mean).max(0.0).sqrt());
        }
        let per_cell = f64::from(cell * cell);
        out.extend(grid.into_iter().map(|g| g / per_cell));
        Ok(out)
    }
}

pub fn extract_features(
    images: &[Raster],
    extractor: &dyn FeatureExtractor,
    source: &str,
) -> Result<FeatureSet, MetricsError> {
    if images.is_empty() {
        return Err(MetricsError::Extraction("no images".into()));
    }
    let rows = images
        .iter()
        .map(|r| {
            let v = extractor.extract(r)?;
            if v.len() != extractor.dim() {
                return Err(MetricsError::DimensionMismatch(extractor.dim(), v.len()));
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>, _>>()?;
    FeatureSet::new(source, rows)
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    n: usize,
    d: usize,
    extractor: String,
}

/// JSON header line `{n, d, extractor}` then one row per line of
/// space-separated floats. Floats use the shortest exact representation, so
/// reading back gives the same bits.
pub fn write_feature_file(fs: &FeatureSet, extractor: &str) -> String {
    let header = Header { n: fs.n(), d: fs.d(), extractor: extractor.to_string() };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for r in fs.rows() {
        out.push_str(&r.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" "));
        out.push('\n');
    }
    out
}

/// Parses a feature file, returning the set and its extractor name.
pub fn read_feature_file(text: &str, source: &str) -> Result<(FeatureSet, String), MetricsError> {
    let err = |line: usize, message: String| MetricsError::FeatureFile { line, message };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let header: Header = serde_json::from_str(first).map_err(|e| err(1, e.to_string()))?;
    let mut rows = Vec::with_capacity(header.n);
    for (i, l) in lines {
        let row = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| err(i + 1, format!("{t:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.d {
            return Err(err(i + 1, format!("expected {} values, found {}", header.d, row.len())));
        }
        rows.push(row);
    }
    if rows.len() != header.n {
        return Err(err(0, format!("header promises {} rows, found {}", header.n, rows.len())));
    }
    Ok((FeatureSet::new(source, rows)?, header.extractor))
}
