//! End-to-end run over a dataset: TTA vote per candidate, temporal
//! consistency selection between two candidates, VLM relabeling and
//! evaluation. Videos are independent; a failing video is logged and
//! skipped without affecting the others.

use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consistency::{reverse_flows, score_with_flows, select_per_video, VideoScore};
use crate::error::{Error, Result};
use crate::evalmetrics::{evaluate_video, reduce_metrics, MetricReport, VideoMetrics};
use crate::flow::GrayFrame;
use crate::frame::LabelMap;
use crate::tta::{fuse_ensemble, EnsemblePrediction};
use crate::vlmfix::{fix_video, Correction, HttpVlmClient, MockVlmClient, SkippedQuery, VlmClient};

use super::config::{AugVariant, CandidateConfig, PipelineConfig, VlmBackend};
use super::dataset::{list_videos, load_video_dir, read_label_dir, VideoData};
use super::images::write_label_png;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub video_id: String,
    pub chosen: String,
    pub scores: Vec<VideoScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoFailure {
    pub video_id: String,
    pub error: String,
}

/// Everything decided along the way, written as `log.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineLog {
    pub selections: Vec<SelectionRecord>,
    pub corrections: Vec<Correction>,
    pub skipped_queries: Vec<SkippedQuery>,
    pub failures: Vec<VideoFailure>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutcome {
    /// Present when at least one processed video had ground truth.
    pub report: Option<MetricReport>,
    pub log: PipelineLog,
    pub videos_processed: usize,
}

impl PipelineOutcome {
    /// 0 when every video went through, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.log.failures.is_empty())
    }
}

struct VideoResult {
    selection: Option<SelectionRecord>,
    corrections: Vec<Correction>,
    skipped: Vec<SkippedQuery>,
    metrics: Option<VideoMetrics>,
}

fn variant_dir(root: &Path, video_id: &str, variant: &AugVariant) -> PathBuf {
    let base = root.join(video_id);
    if variant.dir.is_empty() {
        base
    } else {
        base.join(&variant.dir)
    }
}

/// Reads every augmentation variant of one candidate and fuses them per
/// frame onto the base grid.
fn load_candidate(
    cfg: &PipelineConfig,
    candidate: &CandidateConfig,
    video_id: &str,
    base_dims: Option<(usize, usize)>,
) -> Result<(Vec<String>, Vec<LabelMap>)> {
    let nc = cfg.taxonomy.num_classes();
    let mut variants = Vec::with_capacity(cfg.augmentations.len());
    for v in &cfg.augmentations {
        let dir = variant_dir(&candidate.root, video_id, v);
        let (stems, maps) = read_label_dir(&dir, nc, None)?;
        if stems.is_empty() {
            return Err(Error::EmptyInput(format!("no predictions in {}", dir.display())));
        }
        variants.push((v, dir, stems, maps));
    }
    let stems = variants[0].2.clone();
    for (_, dir, s, _) in &variants[1..] {
        if let Some(stem) = stems.iter().chain(s).find(|x| !stems.contains(x) || !s.contains(x)) {
            return Err(Error::StemMismatch {
                stem: stem.clone(),
                dir: dir.clone(),
            });
        }
    }
    let (base_w, base_h) = match base_dims {
        Some(d) => d,
        None => {
            let (v, _, _, maps) = variants
                .iter()
                .min_by_key(|(v, ..)| v.spec.precedence_rank)
                .expect("at least one variant");
            let (w, h) = maps[0].dims();
            (
                (w as f64 / v.spec.scale).round() as usize,
                (h as f64 / v.spec.scale).round() as usize,
            )
        }
    };
    let mut fused = Vec::with_capacity(stems.len());
    for t in 0..stems.len() {
        let preds: Vec<EnsemblePrediction> = variants
            .iter()
            .map(|(v, _, _, maps)| EnsemblePrediction {
                aug: v.spec.clone(),
                labels: maps[t].clone(),
            })
            .collect();
        let labels = fuse_ensemble(&preds, base_w, base_h)?;
        labels.validate(&cfg.taxonomy.ignore_labels)?;
        fused.push(labels);
    }
    Ok((stems, fused))
}

fn process_video(cfg: &PipelineConfig, client: Option<&dyn VlmClient>, video_id: &str) -> Result<VideoResult> {
    let nc = cfg.taxonomy.num_classes();
    let ignore = &cfg.taxonomy.ignore_labels;
    let two_candidates = cfg.candidates.len() == 2;
    let vlm_active = client.is_some() && !cfg.taxonomy.confusable_groups.is_empty();

    let data: Option<VideoData> = if cfg.dataset_root.join(video_id).is_dir() || two_candidates || vlm_active {
        Some(load_video_dir(&cfg.dataset_root, video_id, nc)?)
    } else {
        None
    };
    let base_dims = data.as_ref().map(|d| d.frames[0].dims());

    let mut loaded = Vec::with_capacity(cfg.candidates.len());
    for c in &cfg.candidates {
        let (stems, labels) = load_candidate(cfg, c, video_id, base_dims)?;
        if let Some(d) = &data {
            if let Some(stem) = d.stems.iter().chain(&stems).find(|s| !d.stems.contains(s) || !stems.contains(s)) {
                return Err(Error::StemMismatch {
                    stem: stem.clone(),
                    dir: c.root.join(video_id),
                });
            }
        }
        loaded.push((c, stems, labels));
    }

    let (stems, mut labels, selection) = if two_candidates {
        let d = data.as_ref().expect("loaded for two candidates");
        let gray: Vec<GrayFrame<f32>> = d.frames.iter().map(GrayFrame::from_rgb).collect();
        let flows = reverse_flows(&gray, &cfg.farneback)?;
        let mut scores = Vec::with_capacity(2);
        for (c, _, labels) in &loaded {
            let (score, pairs_scored) = score_with_flows(&flows, labels, &cfg.ssim, nc)?;
            scores.push(VideoScore {
                video_id: video_id.to_owned(),
                candidate_id: c.name.clone(),
                score,
                pairs_scored,
            });
        }
        let chosen = select_per_video(&scores[..1], &scores[1..])?
            .remove(video_id)
            .expect("video present on both sides");
        let (_, stems, labels) = loaded
            .into_iter()
            .find(|(c, ..)| c.name == chosen)
            .expect("chosen candidate exists");
        let record = SelectionRecord {
            video_id: video_id.to_owned(),
            chosen,
            scores,
        };
        (stems, labels, Some(record))
    } else {
        let (_, stems, labels) = loaded.pop().expect("one candidate");
        (stems, labels, None)
    };

    let mut corrections = Vec::new();
    let mut skipped = Vec::new();
    if let (Some(client), true) = (client, vlm_active) {
        let d = data.as_ref().expect("loaded for vlm");
        let (fixed, log) = fix_video(
            client,
            video_id,
            &d.frames,
            &labels,
            &cfg.taxonomy.confusable_groups,
            cfg.vlm.min_pixel_fraction,
        )?;
        labels = fixed;
        corrections = log.corrections;
        skipped = log.skipped;
    }

    let metrics = match data.as_ref().and_then(|d| d.masks.as_ref()) {
        Some(gts) => {
            for g in gts {
                g.validate(ignore)?;
            }
            Some(evaluate_video(&labels, gts, &cfg.metric_ks, ignore, nc)?)
        }
        None => None,
    };

    let out_dir = cfg.output_dir.join(video_id);
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    for (stem, l) in stems.iter().zip(&labels) {
        write_label_png(&out_dir.join(format!("{stem}.png")), l)?;
    }

    Ok(VideoResult {
        selection,
        corrections,
        skipped,
        metrics,
    })
}

fn build_client(cfg: &PipelineConfig) -> Result<Option<Box<dyn VlmClient>>> {
    if !cfg.vlm.enabled {
        return Ok(None);
    }
    let client: Box<dyn VlmClient> = match cfg.vlm.backend {
        VlmBackend::Mock => {
            let mut mock = match cfg.vlm.mock_answers.get("*") {
                Some(text) => MockVlmClient::always(text.clone()),
                None => MockVlmClient::new(),
            };
            for (video, text) in cfg.vlm.mock_answers.iter().filter(|(k, _)| *k != "*") {
                mock = mock.with_answer(video.clone(), text.clone());
            }
            Box::new(mock)
        }
        VlmBackend::Http => {
            let endpoint = cfg
                .vlm
                .endpoint
                .clone()
                .ok_or_else(|| Error::Config("vlm endpoint missing".into()))?;
            Box::new(HttpVlmClient::from_env(
                endpoint,
                &cfg.vlm.token_env,
                Duration::from_secs(cfg.vlm.timeout_secs),
            )?)
        }
    };
    Ok(Some(client))
}

/// Runs the pipeline with the VLM client described by the config.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let client = build_client(cfg)?;
    run_pipeline_with_client(cfg, client.as_deref())
}

/// Runs the pipeline with an explicit client; `None` disables VLM fixes.
pub fn run_pipeline_with_client(cfg: &PipelineConfig, client: Option<&dyn VlmClient>) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let mut videos = list_videos(&cfg.candidates[0].root)?;
    if let Some(filter) = &cfg.videos {
        videos.retain(|v| filter.contains(v));
    }
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(String, Result<VideoResult>)> = pool.install(|| {
        videos
            .par_iter()
            .map(|v| (v.clone(), process_video(cfg, client, v)))
            .collect()
    });

    let mut log = PipelineLog::default();
    let mut metrics = Vec::new();
    let mut processed = 0;
    for (video_id, result) in results {
        match result {
            Ok(r) => {
                processed += 1;
                log.selections.extend(r.selection);
                log.corrections.extend(r.corrections);
                log.skipped_queries.extend(r.skipped);
                metrics.extend(r.metrics);
            }
            Err(e) => {
                log::error!("video {video_id} failed: {e}");
                log.failures.push(VideoFailure {
                    video_id,
                    error: e.to_string(),
                });
            }
        }
    }

    let report = if metrics.is_empty() {
        None
    } else {
        let r = reduce_metrics(&metrics, &cfg.metric_ks, cfg.taxonomy.num_classes())?;
        let path = cfg.report_path();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_json(&path, &r)?;
        Some(r)
    };
    write_json(&cfg.output_dir.join("log.json"), &log)?;
    Ok(PipelineOutcome {
        report,
        log,
        videos_processed: processed,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
