//! Temporal-consistency scoring of segmentation sequences and per-video
//! selection between two candidate models.
//!
//! Consecutive label maps are compared by warping frame `t` onto frame
//! `t + 1` with optical flow and measuring a single global SSIM between the
//! warped and the actual map. Labels enter SSIM as normalized indices
//! `label / (num_classes - 1)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{farneback_flow, warp_labels, FarnebackParams, FlowField, GrayFrame};
use crate::frame::{LabelMap, ValidityMask};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.dynamic_range > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ssim constants must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub video_id: String,
    pub candidate_id: String,
    /// Mean SSIM over all scored consecutive-frame pairs.
    pub score: f64,
    pub pairs_scored: usize,
}

/// SSIM of two label maps from global statistics over the valid pixels.
///
/// Pixels holding a value `>= num_classes` in either map (ignore labels)
/// are treated as invalid as well. Variance is the population variance.
pub fn global_ssim<T: Scalar>(
    a: &LabelMap,
    b: &LabelMap,
    valid: &ValidityMask,
    params: &SsimParams,
    num_classes: u16,
) -> Result<T> {
    params.validate()?;
    if a.dims() != b.dims() || a.dims() != valid.dims() {
        return Err(Error::InvalidInput(format!(
            "ssim inputs differ in size: {:?}, {:?}, {:?}",
            a.dims(),
            b.dims(),
            valid.dims()
        )));
    }
    if num_classes < 2 {
        return Err(Error::InvalidInput("ssim needs num_classes >= 2".into()));
    }
    let norm = T::of(f64::from(num_classes - 1));
    let pairs: Vec<(T, T)> = a
        .data()
        .iter()
        .zip(b.data())
        .zip(valid.data())
        .filter(|((&va, &vb), &ok)| ok && va < num_classes && vb < num_classes)
        .map(|((&va, &vb), _)| (T::of(f64::from(va)) / norm, T::of(f64::from(vb)) / norm))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no valid pixels to compare".into()));
    }
    let n = T::of(pairs.len() as f64);
    let mu_a = pairs.iter().map(|p| p.0).sum::<T>() / n;
    let mu_b = pairs.iter().map(|p| p.1).sum::<T>() / n;
    let mut var_a = T::zero();
    let mut var_b = T::zero();
    let mut cov = T::zero();
    for &(va, vb) in &pairs {
        let da = va - mu_a;
        let db = vb - mu_b;
        var_a += da * da;
        var_b += db * db;
        cov += da * db;
    }
    var_a /= n;
    var_b /= n;
    cov /= n;
    let (c1, c2) = (T::of(params.c1()), T::of(params.c2()));
    let two = T::of(2.0);
    let num = (two * mu_a * mu_b + c1) * (two * cov + c2);
    let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
    Ok((num / den).max(-T::one()).min(T::one()))
}

/// Flows `OF(x_{t+1}, x_t)` for every consecutive pair: each field lives on
/// frame `t + 1`'s grid and points back into frame `t`.
pub fn reverse_flows<T: Scalar>(
    frames: &[GrayFrame<T>],
    params: &FarnebackParams,
) -> Result<Vec<FlowField<T>>> {
    frames
        .windows(2)
        .map(|w| farneback_flow(&w[1], &w[0], params))
        .collect()
}

/// Scores a label sequence against precomputed reverse flows.
pub fn score_with_flows<T: Scalar>(
    flows: &[FlowField<T>],
    labels: &[LabelMap],
    ssim: &SsimParams,
    num_classes: u16,
) -> Result<(f64, usize)> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("empty label sequence".into()));
    }
    if flows.len() + 1 != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} flows for {} label maps",
            flows.len(),
            labels.len()
        )));
    }
    let dims = labels[0].dims();
    if labels.iter().any(|l| l.dims() != dims) || flows.iter().any(|f| f.dims() != dims) {
        return Err(Error::InvalidInput("non-uniform dimensions in video".into()));
    }
    if labels.len() == 1 {
        return Ok((1.0, 0));
    }
    let mut total = 0.0;
    for (pair, flow) in labels.windows(2).zip(flows) {
        let (warped, valid) = warp_labels(&pair[0], flow)?;
        let s: T = global_ssim(&warped, &pair[1], &valid, ssim, num_classes)?;
        total += s.to_f64_lossy();
    }
    let pairs = labels.len() - 1;
    Ok((total / pairs as f64, pairs))
}

/// Mean warped-SSIM over all consecutive frame pairs of one video.
///
/// A single-frame video scores 1.0 with zero pairs.
pub fn temporal_consistency_score<T: Scalar>(
    video_id: &str,
    candidate_id: &str,
    frames: &[GrayFrame<T>],
    labels: &[LabelMap],
    fb: &FarnebackParams,
    ssim: &SsimParams,
    num_classes: u16,
) -> Result<VideoScore> {
    if frames.len() != labels.len() || frames.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} frames but {} label maps",
            frames.len(),
            labels.len()
        )));
    }
    let dims = frames[0].dims();
    if frames.iter().any(|f| f.dims() != dims) || labels.iter().any(|l| l.dims() != dims) {
        return Err(Error::InvalidInput("frames and labels must share one size".into()));
    }
    let flows = reverse_flows(frames, fb)?;
    let (score, pairs_scored) = score_with_flows(&flows, labels, ssim, num_classes)?;
    Ok(VideoScore {
        video_id: video_id.to_owned(),
        candidate_id: candidate_id.to_owned(),
        score,
        pairs_scored,
    })
}

fn index_by_video(scores: &[VideoScore], side: &str) -> Result<BTreeMap<String, VideoScore>> {
    let mut out = BTreeMap::new();
    for s in scores {
        if out.insert(s.video_id.clone(), s.clone()).is_some() {
            return Err(Error::InvalidInput(format!(
                "video {:?} listed twice for candidate {side}",
                s.video_id
            )));
        }
    }
    Ok(out)
}

/// Picks, per video, the candidate with the strictly higher score. Ties keep
/// candidate A.
pub fn select_per_video(
    scores_a: &[VideoScore],
    scores_b: &[VideoScore],
) -> Result<BTreeMap<String, String>> {
    let a = index_by_video(scores_a, "A")?;
    let b = index_by_video(scores_b, "B")?;
    let ids_a: BTreeSet<_> = a.keys().collect();
    let ids_b: BTreeSet<_> = b.keys().collect();
    if ids_a != ids_b {
        let missing: Vec<_> = ids_a.symmetric_difference(&ids_b).collect();
        return Err(Error::InvalidInput(format!(
            "candidates cover different videos: {missing:?}"
        )));
    }
    Ok(a
        .into_iter()
        .map(|(video, sa)| {
            let sb = &b[&video];
            let winner = if sb.score > sa.score {
                sb.candidate_id.clone()
            } else {
                sa.candidate_id
            };
            (video, winner)
        })
        .collect())
}
