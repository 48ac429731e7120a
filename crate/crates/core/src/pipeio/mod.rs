//! Files on disk and the pipeline that ties the stages together.

mod config;
mod dataset;
mod flo;
mod images;
mod pipeline;

pub use config::{
    AugVariant, CandidateConfig, PipelineConfig, TaxonomyConfig, VlmBackend, VlmSettings,
};
pub use dataset::{list_images, list_videos, load_video_dir, read_label_dir, VideoData};
pub use flo::{decode_flow, encode_flow, read_flow, write_flow, FLO_MAGIC};
pub use images::{
    encode_rgb_png, read_label_png, read_rgb, write_label_png, write_mask_png, write_rgb_png,
};
pub use pipeline::{
    run_pipeline, run_pipeline_with_client, write_json, PipelineLog, PipelineOutcome,
    SelectionRecord, VideoFailure,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tta::AugSpec;

/// One augmented prediction of a single frame, as listed in an ensemble
/// manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    #[serde(flatten)]
    pub aug: AugSpec,
}

/// Reads a JSON array of [`ManifestEntry`]; relative paths resolve against
/// the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<ManifestEntry> = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut entries {
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
    }
    Ok(entries)
}
