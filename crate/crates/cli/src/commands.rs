use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::Serialize;

use vidseg::consistency::{select_per_video, temporal_consistency_score, SsimParams, VideoScore};
use vidseg::evalmetrics::{evaluate_dataset, VideoPair};
use vidseg::flow::{farneback_flow, FarnebackParams, GrayFrame};
use vidseg::mvc::{apply_mask, sample_patch_mask, StreamId};
use vidseg::pipeio::{
    list_images, list_videos, load_video_dir, read_label_dir, read_label_png, read_manifest, read_rgb, run_pipeline,
    write_flow, write_json, write_label_png, write_mask_png, write_rgb_png, PipelineConfig, TaxonomyConfig,
    VlmBackend,
};
use vidseg::tta::{fuse_ensemble, EnsemblePrediction};
use vidseg::vlmfix::{fix_video, HttpVlmClient, MockVlmClient, VlmClient};
use vidseg::{Error, DEFAULT_IGNORE_LABEL};

use crate::GlobalArgs;

/// Bad command-line usage that clap cannot catch.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    let config = err.chain().any(|e| {
        e.downcast_ref::<UsageError>().is_some() || matches!(e.downcast_ref::<Error>(), Some(Error::Config(_)))
    });
    if config {
        2
    } else {
        1
    }
}

fn load_config(g: &GlobalArgs) -> Result<Option<PipelineConfig>> {
    let Some(path) = &g.config else { return Ok(None) };
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = g.seed {
        cfg.mask.seed = seed;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(v) = &g.videos {
        cfg.videos = Some(v.clone());
    }
    if let Some(e) = &g.vlm_endpoint {
        cfg.vlm.endpoint = Some(e.clone());
        cfg.vlm.backend = VlmBackend::Http;
        cfg.vlm.enabled = true;
    }
    if let Some(t) = &g.vlm_token_env {
        cfg.vlm.token_env = t.clone();
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if let Some(r) = &g.report {
        cfg.report_path = Some(r.clone());
    }
    cfg.validate()?;
    Ok(Some(cfg))
}

fn require_out(g: &GlobalArgs) -> Result<&Path> {
    g.out.as_deref().ok_or_else(|| usage("--out is required"))
}

/// Number of classes and ignore set from `--num-classes` or the config.
fn taxonomy(cfg: Option<&PipelineConfig>, num_classes: Option<u16>) -> Result<(u16, BTreeSet<u16>)> {
    match (num_classes, cfg) {
        (Some(n), _) if n < 1 => Err(usage("--num-classes must be >= 1")),
        (Some(n), Some(c)) => Ok((n, c.taxonomy.ignore_labels.clone())),
        (Some(n), None) => Ok((n, BTreeSet::from([DEFAULT_IGNORE_LABEL]))),
        (None, Some(c)) => Ok((c.taxonomy.num_classes(), c.taxonomy.ignore_labels.clone())),
        (None, None) => Err(usage("give --num-classes or a --config with a taxonomy")),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => Ok(write_json(p, value)?),
        None => print_json(value),
    }
}

fn read_frames(dir: &Path) -> Result<(Vec<String>, Vec<vidseg::RgbFrame>)> {
    let files = list_images(dir, &["png", "jpg", "jpeg"])?;
    if files.is_empty() {
        bail!("no frames in {}", dir.display());
    }
    let mut stems = Vec::new();
    let mut frames = Vec::new();
    for (stem, path) in files {
        frames.push(read_rgb(&path)?);
        stems.push(stem);
    }
    Ok((stems, frames))
}

fn check_same_stems(a: &[String], b: &[String], dir: &Path) -> Result<()> {
    if let Some(s) = a.iter().chain(b).find(|s| !a.contains(s) || !b.contains(s)) {
        return Err(Error::StemMismatch { stem: s.clone(), dir: dir.to_owned() }.into());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct VoteArgs {
    /// JSON array of `{path, scale, flipped, rank}`.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub num_classes: Option<u16>,
    /// Base grid width; inferred from the highest-priority entry if omitted.
    #[arg(long, requires = "height")]
    pub width: Option<usize>,
    #[arg(long, requires = "width")]
    pub height: Option<usize>,
}

pub fn vote(g: &GlobalArgs, a: &VoteArgs) -> Result<u8> {
    let cfg = load_config(g)?;
    let (nc, ignore) = taxonomy(cfg.as_ref(), a.num_classes)?;
    let out = require_out(g)?;
    let entries = read_manifest(&a.manifest)?;
    let preds = entries
        .into_iter()
        .map(|e| Ok(EnsemblePrediction { labels: read_label_png(&e.path, nc)?, aug: e.aug }))
        .collect::<Result<Vec<_>>>()?;
    let top = preds
        .iter()
        .min_by_key(|p| p.aug.precedence_rank)
        .ok_or_else(|| anyhow!("manifest {} is empty", a.manifest.display()))?;
    let (w, h) = match (a.width, a.height) {
        (Some(w), Some(h)) => (w, h),
        _ => (
            (top.labels.width() as f64 / top.aug.scale).round() as usize,
            (top.labels.height() as f64 / top.aug.scale).round() as usize,
        ),
    };
    let fused = fuse_ensemble(&preds, w, h)?;
    fused.validate(&ignore)?;
    write_label_png(out, &fused)?;
    log::info!("fused {} predictions into {}", preds.len(), out.display());
    Ok(0)
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Directory of RGB frames.
    #[arg(long)]
    pub frames: PathBuf,
    /// Directory of label PNGs with the same stems.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub num_classes: Option<u16>,
    #[arg(long, default_value = "video")]
    pub video_id: String,
    #[arg(long, default_value = "candidate")]
    pub candidate: String,
}

pub fn score(g: &GlobalArgs, a: &ScoreArgs) -> Result<u8> {
    let cfg = load_config(g)?;
    let (nc, ignore) = taxonomy(cfg.as_ref(), a.num_classes)?;
    let (fb, ssim) = cfg
        .as_ref()
        .map_or((FarnebackParams::default(), SsimParams::default()), |c| (c.farneback.clone(), c.ssim.clone()));
    let (stems, frames) = read_frames(&a.frames)?;
    let (label_stems, labels) = read_label_dir(&a.labels, nc, Some(frames[0].dims()))?;
    check_same_stems(&stems, &label_stems, &a.labels)?;
    for l in &labels {
        l.validate(&ignore)?;
    }
    let gray: Vec<GrayFrame<f32>> = frames.iter().map(GrayFrame::from_rgb).collect();
    let s = temporal_consistency_score(&a.video_id, &a.candidate, &gray, &labels, &fb, &ssim, nc)?;
    emit_json(g.out.as_deref(), &s)?;
    Ok(0)
}

#[derive(Args, Debug)]
pub struct AggregateArgs {
    /// JSON array of scores for candidate A (wins ties).
    #[arg(long)]
    pub scores_a: PathBuf,
    #[arg(long)]
    pub scores_b: PathBuf,
}

fn read_scores(path: &Path) -> Result<Vec<VideoScore>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    // A single score object is accepted as well as an array.
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let scores = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    Ok(scores)
}

pub fn aggregate(g: &GlobalArgs, a: &AggregateArgs) -> Result<u8> {
    let chosen = select_per_video(&read_scores(&a.scores_a)?, &read_scores(&a.scores_b)?)?;
    emit_json(g.out.as_deref(), &chosen)?;
    Ok(0)
}

#[derive(Args, Debug)]
pub struct MaskArgs {
    /// Directory of RGB frames.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long, default_value = "video")]
    pub video_id: String,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub ratio: Option<f64>,
}

pub fn mask(g: &GlobalArgs, a: &MaskArgs) -> Result<u8> {
    let mut params = load_config(g)?.map(|c| c.mask).unwrap_or_default();
    if let Some(s) = g.seed {
        params.seed = s;
    }
    if let Some(b) = a.patch_size {
        params.patch_size = b;
    }
    if let Some(r) = a.ratio {
        params.mask_ratio = r;
    }
    params.validate().map_err(|e| usage(e.to_string()))?;
    let out = require_out(g)?;
    let (stems, frames) = read_frames(&a.frames)?;
    let (mask_dir, frame_dir) = (out.join("masks"), out.join("masked"));
    for d in [&mask_dir, &frame_dir] {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    for (t, (stem, frame)) in stems.iter().zip(&frames).enumerate() {
        let (w, h) = frame.dims();
        let m = sample_patch_mask(w, h, &params, StreamId::for_frame(&a.video_id, t))?;
        write_mask_png(&mask_dir.join(format!("{stem}.png")), &m)?;
        write_rgb_png(&frame_dir.join(format!("{stem}.png")), &apply_mask(frame, &m)?)?;
    }
    Ok(0)
}

#[derive(Args, Debug)]
pub struct VlmFixArgs {
    /// Directory of RGB frames.
    #[arg(long)]
    pub frames: PathBuf,
    /// Directory of label PNGs with the same stems.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value = "video")]
    pub video_id: String,
}

fn client_from(cfg: &PipelineConfig) -> Result<Box<dyn VlmClient>> {
    let vlm = &cfg.vlm;
    Ok(match vlm.backend {
        VlmBackend::Mock => {
            let mut m = match vlm.mock_answers.get("*") {
                Some(t) => MockVlmClient::always(t.clone()),
                None => MockVlmClient::new(),
            };
            for (k, v) in vlm.mock_answers.iter().filter(|(k, _)| *k != "*") {
                m = m.with_answer(k.clone(), v.clone());
            }
            Box::new(m)
        }
        VlmBackend::Http => {
            let endpoint = vlm.endpoint.clone().ok_or_else(|| usage("no VLM endpoint configured"))?;
            Box::new(HttpVlmClient::from_env(endpoint, &vlm.token_env, Duration::from_secs(vlm.timeout_secs))?)
        }
    })
}

pub fn vlm_fix(g: &GlobalArgs, a: &VlmFixArgs) -> Result<u8> {
    let cfg = load_config(g)?.ok_or_else(|| usage("vlm-fix needs --config for the confusable groups"))?;
    let out = require_out(g)?;
    let client = client_from(&cfg)?;
    let tax: &TaxonomyConfig = &cfg.taxonomy;
    let (stems, frames) = read_frames(&a.frames)?;
    let (label_stems, labels) = read_label_dir(&a.labels, tax.num_classes(), Some(frames[0].dims()))?;
    check_same_stems(&stems, &label_stems, &a.labels)?;
    let (fixed, log) = fix_video(
        client.as_ref(),
        &a.video_id,
        &frames,
        &labels,
        &tax.confusable_groups,
        cfg.vlm.min_pixel_fraction,
    )?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (stem, l) in stems.iter().zip(&fixed) {
        write_label_png(&out.join(format!("{stem}.png")), l)?;
    }
    write_json(&out.join("corrections.json"), &log)?;
    Ok(0)
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Predictions laid out as `<pred>/<video>/<stem>.png`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Dataset root with `<video>/masks/<stem>.png`.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub num_classes: Option<u16>,
    /// Window lengths for mVC.
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
}

pub fn eval(g: &GlobalArgs, a: &EvalArgs) -> Result<u8> {
    let cfg = load_config(g)?;
    let (nc, ignore) = taxonomy(cfg.as_ref(), a.num_classes)?;
    let ks: BTreeSet<usize> = match (&a.ks, &cfg) {
        (Some(ks), _) => ks.iter().copied().collect(),
        (None, Some(c)) => c.metric_ks.clone(),
        (None, None) => BTreeSet::from([8, 16]),
    };
    if ks.contains(&0) {
        return Err(usage("--ks values must be >= 1"));
    }
    let mut videos = list_videos(&a.pred)?;
    if let Some(filter) = &g.videos {
        videos.retain(|v| filter.contains(v));
    }
    let mut pairs: Vec<VideoPair> = Vec::new();
    for v in &videos {
        let data = load_video_dir(&a.gt, v, nc)?;
        let gts = data.masks.ok_or_else(|| anyhow!("video {v} has no ground truth in {}", a.gt.display()))?;
        let dir = a.pred.join(v);
        let (stems, preds) = read_label_dir(&dir, nc, Some(gts[0].dims()))?;
        check_same_stems(&stems, &data.stems, &dir)?;
        for m in preds.iter().chain(&gts) {
            m.validate(&ignore)?;
        }
        pairs.push((preds, gts));
    }
    if pairs.is_empty() {
        bail!("no videos to evaluate under {}", a.pred.display());
    }
    let report = evaluate_dataset(&pairs, &ks, &ignore, nc)?;
    print!("{}", report.table());
    if let Some(p) = &g.report {
        write_json(p, &report)?;
    }
    Ok(0)
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[arg(long)]
    pub prev: PathBuf,
    #[arg(long)]
    pub next: PathBuf,
}

pub fn flow(g: &GlobalArgs, a: &FlowArgs) -> Result<u8> {
    let fb = load_config(g)?.map(|c| c.farneback).unwrap_or_default();
    let out = require_out(g)?;
    let prev = GrayFrame::<f32>::from_rgb(&read_rgb(&a.prev)?);
    let next = GrayFrame::<f32>::from_rgb(&read_rgb(&a.next)?);
    let f = farneback_flow(&prev, &next, &fb)?;
    write_flow(out, &f)?;
    Ok(0)
}

pub fn pipeline(g: &GlobalArgs) -> Result<u8> {
    let cfg = load_config(g)?.ok_or_else(|| usage("pipeline needs --config"))?;
    let outcome = run_pipeline(&cfg)?;
    if let Some(r) = &outcome.report {
        print!("{}", r.table());
    }
    for f in &outcome.log.failures {
        eprintln!("video {} failed: {}", f.video_id, f.error);
    }
    eprintln!(
        "{} videos processed, {} failed; outputs in {}",
        outcome.videos_processed,
        outcome.log.failures.len(),
        cfg.output_dir.display()
    );
    Ok(outcome.exit_code() as u8)
}

