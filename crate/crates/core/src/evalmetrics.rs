//! Segmentation metrics: confusion-matrix mIoU and windowed video
//! consistency (VC_k), reported the way the VSPW leaderboard does.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::LabelMap;

/// Pixel tallies indexed `[ground_truth][prediction]`.
///
/// Predictions that carry an ignore label on a scored pixel are counted in
/// `missed` so they still cost the ground-truth class a false negative.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_classes: u16,
    counts: Vec<u64>,
    missed: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: u16) -> Self {
        let n = usize::from(num_classes);
        Self {
            num_classes,
            counts: vec![0; n * n],
            missed: vec![0; n],
        }
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn get(&self, gt: u16, pred: u16) -> u64 {
        self.counts[usize::from(gt) * usize::from(self.num_classes) + usize::from(pred)]
    }

    pub fn missed(&self, gt: u16) -> u64 {
        self.missed[usize::from(gt)]
    }

    /// Number of scored pixels.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.missed.iter().sum::<u64>()
    }

    /// Adds one frame. Nothing is recorded if any value is out of range.
    pub fn update(&mut self, pred: &LabelMap, gt: &LabelMap, ignore: &BTreeSet<u16>) -> Result<()> {
        if pred.dims() != gt.dims() {
            return Err(Error::InvalidInput(format!(
                "prediction {:?} and ground truth {:?} differ in size",
                pred.dims(),
                gt.dims()
            )));
        }
        let nc = self.num_classes;
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            if ignore.contains(&g) {
                continue;
            }
            for v in [g, p] {
                if v >= nc && !ignore.contains(&v) {
                    return Err(Error::ClassOutOfRange {
                        value: v,
                        num_classes: nc,
                    });
                }
            }
        }
        let n = usize::from(nc);
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            if ignore.contains(&g) {
                continue;
            }
            if p < nc {
                self.counts[usize::from(g) * n + usize::from(p)] += 1;
            } else {
                self.missed[usize::from(g)] += 1;
            }
        }
        Ok(())
    }

    /// Elementwise sum with another matrix of the same size.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::InvalidInput("cannot merge matrices of different size".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.missed.iter_mut().zip(&other.missed) {
            *a += b;
        }
        Ok(())
    }

    /// Multiplies every tally by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        Self {
            num_classes: self.num_classes,
            counts: self.counts.iter().map(|c| c * factor).collect(),
            missed: self.missed.iter().map(|c| c * factor).collect(),
        }
    }
}

/// Functional form of [`ConfusionMatrix::update`].
pub fn confusion_update(
    mut cm: ConfusionMatrix,
    pred: &LabelMap,
    gt: &LabelMap,
    ignore: &BTreeSet<u16>,
) -> Result<ConfusionMatrix> {
    cm.update(pred, gt, ignore)?;
    Ok(cm)
}

/// Per-class IoU and their mean. Classes absent from both ground truth and
/// prediction are left out of both.
pub fn miou(cm: &ConfusionMatrix) -> Result<(BTreeMap<u16, f64>, f64)> {
    let nc = cm.num_classes;
    let mut per_class = BTreeMap::new();
    for c in 0..nc {
        let tp = cm.get(c, c);
        let gt_total: u64 = (0..nc).map(|p| cm.get(c, p)).sum::<u64>() + cm.missed(c);
        let pred_total: u64 = (0..nc).map(|g| cm.get(g, c)).sum();
        let union = gt_total + pred_total - tp;
        if union > 0 {
            per_class.insert(c, tp as f64 / union as f64);
        }
    }
    if per_class.is_empty() {
        return Err(Error::EmptyInput("no class has a non-empty union".into()));
    }
    let mean = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok((per_class, mean))
}

/// Mean over sliding windows of `k` frames of the share of GT-stable pixels
/// that are predicted correctly in every frame of the window.
///
/// Returns `None` when no window has a GT-stable pixel.
pub fn video_consistency(
    preds: &[LabelMap],
    gts: &[LabelMap],
    k: usize,
    ignore: &BTreeSet<u16>,
) -> Result<Option<f64>> {
    if k == 0 {
        return Err(Error::InvalidInput("window length must be >= 1".into()));
    }
    if preds.len() != gts.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions vs {} ground-truth frames",
            preds.len(),
            gts.len()
        )));
    }
    if gts.len() < k {
        return Err(Error::InvalidInput(format!(
            "video has {} frames, fewer than k = {k}",
            gts.len()
        )));
    }
    let dims = gts[0].dims();
    if preds.iter().chain(gts).any(|m| m.dims() != dims) {
        return Err(Error::InvalidInput("frames differ in size".into()));
    }
    let n = dims.0 * dims.1;
    let mut sum = 0.0;
    let mut windows = 0usize;
    for start in 0..=gts.len() - k {
        let (g_win, p_win) = (&gts[start..start + k], &preds[start..start + k]);
        let mut stable = 0u64;
        let mut correct = 0u64;
        for px in 0..n {
            let label = g_win[0].data()[px];
            if ignore.contains(&label) || g_win.iter().any(|g| g.data()[px] != label) {
                continue;
            }
            stable += 1;
            if p_win.iter().all(|p| p.data()[px] == label) {
                correct += 1;
            }
        }
        if stable > 0 {
            sum += correct as f64 / stable as f64;
            windows += 1;
        }
    }
    Ok((windows > 0).then(|| sum / windows as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub miou: f64,
    pub per_class_iou: BTreeMap<u16, f64>,
    /// `k -> mVC_k`; a `k` no video qualified for is absent.
    pub mvc: BTreeMap<usize, f64>,
    /// `k -> number of videos averaged into mVC_k`.
    pub videos_scored: BTreeMap<usize, usize>,
}

impl MetricReport {
    /// Fixed-width table in percent: one column per `k`, then mIoU.
    pub fn table(&self) -> String {
        let mut head = String::new();
        let mut row = String::new();
        for k in self.videos_scored.keys() {
            let _ = write!(head, "{:>10}", format!("mVC_{k}"));
            match self.mvc.get(k) {
                Some(v) => {
                    let _ = write!(row, "{:>10.2}", 100.0 * v);
                }
                None => {
                    let _ = write!(row, "{:>10}", "-");
                }
            }
        }
        let _ = write!(head, "{:>10}", "mIoU");
        let _ = write!(row, "{:>10.2}", 100.0 * self.miou);
        format!("{head}\n{row}\n")
    }
}

/// Everything the dataset-level report needs from a single video. Can be
/// computed independently per video and reduced afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoMetrics {
    pub confusion: ConfusionMatrix,
    /// `k -> VC_k` for each `k` the video is long enough for.
    pub vc: BTreeMap<usize, Option<f64>>,
}

pub fn evaluate_video(
    preds: &[LabelMap],
    gts: &[LabelMap],
    ks: &BTreeSet<usize>,
    ignore: &BTreeSet<u16>,
    num_classes: u16,
) -> Result<VideoMetrics> {
    if preds.len() != gts.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions vs {} ground-truth frames",
            preds.len(),
            gts.len()
        )));
    }
    let mut confusion = ConfusionMatrix::new(num_classes);
    for (p, g) in preds.iter().zip(gts) {
        confusion.update(p, g, ignore)?;
    }
    let mut vc = BTreeMap::new();
    for &k in ks {
        if gts.len() >= k {
            vc.insert(k, video_consistency(preds, gts, k, ignore)?);
        }
    }
    Ok(VideoMetrics { confusion, vc })
}

/// Reduces per-video results: one global confusion matrix for mIoU, and the
/// mean of per-video VC_k for each `k`.
pub fn reduce_metrics<'a>(
    videos: impl IntoIterator<Item = &'a VideoMetrics>,
    ks: &BTreeSet<usize>,
    num_classes: u16,
) -> Result<MetricReport> {
    let mut confusion = ConfusionMatrix::new(num_classes);
    let mut sums: BTreeMap<usize, (f64, usize)> = ks.iter().map(|&k| (k, (0.0, 0))).collect();
    let mut any = false;
    for v in videos {
        any = true;
        confusion.merge(&v.confusion)?;
        for (k, score) in &v.vc {
            if let (Some(s), Some(acc)) = (score, sums.get_mut(k)) {
                acc.0 += s;
                acc.1 += 1;
            }
        }
    }
    if !any {
        return Err(Error::EmptyInput("no videos to evaluate".into()));
    }
    let (per_class_iou, miou) = miou(&confusion)?;
    Ok(MetricReport {
        miou,
        per_class_iou,
        mvc: sums
            .iter()
            .filter(|(_, (_, n))| *n > 0)
            .map(|(&k, &(s, n))| (k, s / n as f64))
            .collect(),
        videos_scored: sums.iter().map(|(&k, &(_, n))| (k, n)).collect(),
    })
}

/// A video as `(predictions, ground truth)`.
pub type VideoPair = (Vec<LabelMap>, Vec<LabelMap>);

pub fn evaluate_dataset(
    videos: &[VideoPair],
    ks: &BTreeSet<usize>,
    ignore: &BTreeSet<u16>,
    num_classes: u16,
) -> Result<MetricReport> {
    let per_video = videos
        .iter()
        .map(|(p, g)| evaluate_video(p, g, ks, ignore, num_classes))
        .collect::<Result<Vec<_>>>()?;
    reduce_metrics(&per_video, ks, num_classes)
}
