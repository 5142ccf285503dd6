use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use maxproto_core::metrics::{
    evaluate, extract_features, read_feature_file, write_feature_file, FeatureExtractor, FeatureSet, MetricsError, PixelStats,
};
use maxproto_core::model::Raster;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ExtractorKind {
    #[default]
    PixelStats,
}

impl ExtractorKind {
    fn extractor(self) -> Box<dyn FeatureExtractor> {
        match self {
            ExtractorKind::PixelStats => Box::new(PixelStats),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Feature file, or a directory of PNG/JPEG images.
    #[arg(long)]
    pub real: PathBuf,
    /// Feature file, or a directory of PNG/JPEG images.
    #[arg(long)]
    pub gen: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub extractor: ExtractorKind,
    /// Report (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Also save extracted features here, as `real.features` and `gen.features`.
    #[arg(long)]
    pub features_out: Option<PathBuf>,
}

fn metrics_err(what: &Path) -> impl FnOnce(MetricsError) -> CliError + '_ {
    move |e| CliError::input(format!("{}: {e}", what.display()))
}

fn images_in(dir: &Path) -> Result<Vec<Raster>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::input(format!("cannot list {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| CliError::input(format!("cannot read {}: {e}", p.display())))?;
            Raster::decode(&bytes).map_err(|e| CliError::input(format!("cannot decode {}: {e}", p.display())))
        })
        .collect()
}

/// Features for `path` using `extractor`.
pub fn load_features(path: &Path, extractor: &dyn FeatureExtractor) -> Result<FeatureSet, CliError> {
    let source = path.display().to_string();
    if path.is_dir() {
        let images = images_in(path)?;
        if images.len() < 2 {
            return Err(CliError::input(format!("{source}: need at least 2 images, found {}", images.len())));
        }
        return extract_features(&images, extractor, &source).map_err(metrics_err(path));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {source}: {e}")))?;
    let (fs, name) = read_feature_file(&text, &source).map_err(metrics_err(path))?;
    if name != extractor.name() {
        return Err(CliError::input(format!("{source}: features come from {name:?}, expected {:?}", extractor.name())));
    }
    Ok(fs)
}

pub fn run(a: EvalArgs) -> Result<(), CliError> {
    let ex = a.extractor.extractor();
    let real = load_features(&a.real, ex.as_ref())?;
    let gen = load_features(&a.gen, ex.as_ref())?;
    if let Some(dir) = &a.features_out {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
        for (name, set) in [("real.features", &real), ("gen.features", &gen)] {
            let p = dir.join(name);
            fs::write(&p, write_feature_file(set, ex.name()))
                .map_err(|e| CliError::input(format!("cannot write {}: {e}", p.display())))?;
        }
    }
    let report = evaluate(&real, &gen, ex.name()).map_err(|e| CliError::input(e.to_string()))?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    fs::write(&a.out, &text).map_err(|e| CliError::input(format!("cannot write {}: {e}", a.out.display())))?;
    println!("fid={} gd={} n_real={} n_gen={}", report.fid, report.gd, report.n_real, report.n_gen);
    Ok(())
}
