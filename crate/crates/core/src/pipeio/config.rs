use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::consistency::SsimParams;
use crate::error::{Error, Result};
use crate::flow::FarnebackParams;
use crate::frame::DEFAULT_IGNORE_LABEL;
use crate::mvc::MaskParams;
use crate::tta::{validate_ensemble, AugSpec};
use crate::vlmfix::{ConfusableGroup, DEFAULT_MIN_PIXEL_FRACTION};

fn default_ignore() -> BTreeSet<u16> {
    BTreeSet::from([DEFAULT_IGNORE_LABEL])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyConfig {
    /// Class names indexed by id.
    pub class_names: Vec<String>,
    #[serde(default = "default_ignore")]
    pub ignore_labels: BTreeSet<u16>,
    #[serde(default)]
    pub confusable_groups: Vec<ConfusableGroup>,
    /// Optional RGB color per class for colorized exports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palette: Option<Vec<[u8; 3]>>,
}

impl TaxonomyConfig {
    /// Taxonomy with placeholder names `class_0 .. class_{n-1}`.
    pub fn numbered(num_classes: u16) -> Self {
        Self {
            class_names: (0..num_classes).map(|i| format!("class_{i}")).collect(),
            ignore_labels: default_ignore(),
            confusable_groups: Vec::new(),
            palette: None,
        }
    }

    pub fn num_classes(&self) -> u16 {
        self.class_names.len() as u16
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.class_names.len();
        if n < 2 || n > usize::from(u16::MAX) {
            return Err(Error::Config(format!("taxonomy needs 2..65535 classes, has {n}")));
        }
        let mut seen = BTreeSet::new();
        for name in &self.class_names {
            if !seen.insert(name) {
                return Err(Error::Config(format!("class name {name:?} is repeated")));
            }
        }
        let nc = self.num_classes();
        if let Some(l) = self.ignore_labels.iter().find(|&&l| l < nc) {
            return Err(Error::Config(format!("ignore label {l} collides with a class id")));
        }
        for g in &self.confusable_groups {
            if let Some(m) = g.members().iter().find(|m| m.id >= nc) {
                return Err(Error::Config(format!(
                    "group {:?} member {:?} has id {} >= {nc}",
                    g.stuff(),
                    m.name,
                    m.id
                )));
            }
        }
        if let Some(p) = &self.palette {
            if p.len() != n {
                return Err(Error::Config(format!("palette has {} colors for {n} classes", p.len())));
            }
        }
        Ok(())
    }
}

/// One model's predictions: `<root>/<video>/<variant dir>/<stem>.png`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateConfig {
    pub name: String,
    pub root: PathBuf,
}

/// A test-time-augmentation variant and the subdirectory holding it. An
/// empty `dir` means the video directory itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugVariant {
    #[serde(default)]
    pub dir: String,
    #[serde(flatten)]
    pub spec: AugSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VlmBackend {
    #[default]
    Http,
    /// Canned answers from `mock_answers`, for offline runs.
    Mock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VlmSettings {
    pub enabled: bool,
    pub backend: VlmBackend,
    pub endpoint: Option<String>,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_secs: u64,
    pub min_pixel_fraction: f64,
    /// `video id -> answer text` for the mock backend; `"*"` answers all.
    pub mock_answers: BTreeMap<String, String>,
}

impl Default for VlmSettings {
    fn default() -> Self {
        Self {
            enabled: false,
            backend: VlmBackend::Http,
            endpoint: None,
            token_env: "VLM_API_TOKEN".into(),
            timeout_secs: 60,
            min_pixel_fraction: DEFAULT_MIN_PIXEL_FRACTION,
            mock_answers: BTreeMap::new(),
        }
    }
}

fn default_ks() -> BTreeSet<usize> {
    BTreeSet::from([8, 16])
}

fn default_augmentations() -> Vec<AugVariant> {
    vec![AugVariant {
        dir: String::new(),
        spec: AugSpec::identity(),
    }]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Frames and ground truth, laid out as `<video>/frames`, `<video>/masks`.
    pub dataset_root: PathBuf,
    /// One or two prediction sets; with two, each video keeps the more
    /// temporally consistent one.
    pub candidates: Vec<CandidateConfig>,
    pub taxonomy: TaxonomyConfig,
    #[serde(default = "default_augmentations")]
    pub augmentations: Vec<AugVariant>,
    #[serde(default)]
    pub farneback: FarnebackParams,
    #[serde(default)]
    pub ssim: SsimParams,
    #[serde(default)]
    pub mask: MaskParams,
    #[serde(default = "default_ks")]
    pub metric_ks: BTreeSet<usize>,
    #[serde(default)]
    pub vlm: VlmSettings,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Where the metric report goes; defaults to `<output_dir>/report.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_path: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Restricts the run to these video ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub videos: Option<Vec<String>>,
}

impl PipelineConfig {
    /// Minimal config with every other field at its default.
    pub fn new(dataset_root: impl Into<PathBuf>, candidates: Vec<CandidateConfig>, taxonomy: TaxonomyConfig) -> Self {
        Self {
            dataset_root: dataset_root.into(),
            candidates,
            taxonomy,
            augmentations: default_augmentations(),
            farneback: FarnebackParams::default(),
            ssim: SsimParams::default(),
            mask: MaskParams::default(),
            metric_ks: default_ks(),
            vlm: VlmSettings::default(),
            output_dir: default_output(),
            report_path: None,
            workers: default_workers(),
            videos: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    /// Reads a JSON config; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.dataset_root);
        resolve(&mut cfg.output_dir);
        if let Some(r) = cfg.report_path.as_mut() {
            resolve(r);
        }
        for c in &mut cfg.candidates {
            resolve(&mut c.root);
        }
        Ok(cfg)
    }

    pub fn report_path(&self) -> PathBuf {
        self.report_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join("report.json"))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        if self.candidates.is_empty() || self.candidates.len() > 2 {
            return Err(Error::Config(format!(
                "expected one or two candidates, found {}",
                self.candidates.len()
            )));
        }
        if self.candidates.len() == 2 && self.candidates[0].name == self.candidates[1].name {
            return Err(Error::Config("candidate names must differ".into()));
        }
        if self.augmentations.is_empty() {
            return Err(Error::Config("at least one augmentation variant is required".into()));
        }
        let specs: Vec<AugSpec> = self.augmentations.iter().map(|a| a.spec.clone()).collect();
        validate_ensemble(&specs).map_err(cfg_err)?;
        let dirs: BTreeSet<&str> = self.augmentations.iter().map(|a| a.dir.as_str()).collect();
        if dirs.len() != self.augmentations.len() {
            return Err(Error::Config("augmentation dirs must be distinct".into()));
        }
        if self.metric_ks.contains(&0) {
            return Err(Error::Config("metric window k must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        self.taxonomy.validate()?;
        self.farneback.validate().map_err(cfg_err)?;
        self.ssim.validate().map_err(cfg_err)?;
        self.mask.validate().map_err(cfg_err)?;
        if self.vlm.enabled {
            if self.vlm.backend == VlmBackend::Http && self.vlm.endpoint.is_none() {
                return Err(Error::Config("vlm enabled without an endpoint".into()));
            }
            if !(0.0..=1.0).contains(&self.vlm.min_pixel_fraction) {
                return Err(Error::Config("vlm.min_pixel_fraction must be in [0, 1]".into()));
            }
        }
        Ok(())
    }
}
