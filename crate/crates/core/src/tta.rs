//! Test-time augmentation fusion: map every augmented prediction back onto
//! the base pixel grid, then take a per-pixel mode. Ties go to the label
//! backed by the highest-priority (lowest rank) variant, which by default
//! is the highest input resolution.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::LabelMap;

/// Multi-scale factors of the default ensemble.
pub const DEFAULT_SCALES: [f64; 4] = [0.9, 1.0, 1.1, 1.2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugSpec {
    pub scale: f64,
    #[serde(default)]
    pub flipped: bool,
    /// Lower rank wins ties.
    #[serde(rename = "rank")]
    pub precedence_rank: u32,
}

impl AugSpec {
    pub fn new(scale: f64, flipped: bool, precedence_rank: u32) -> Self {
        Self {
            scale,
            flipped,
            precedence_rank,
        }
    }

    pub fn identity() -> Self {
        Self::new(1.0, false, 0)
    }
}

/// One augmented prediction, still in its augmented geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsemblePrediction {
    pub aug: AugSpec,
    pub labels: LabelMap,
}

/// Every scale in `scales` with and without a horizontal flip, ranked by
/// descending scale and then non-flipped before flipped.
pub fn ensemble_for_scales(scales: &[f64]) -> Vec<AugSpec> {
    let mut sorted = scales.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
        .into_iter()
        .flat_map(|s| [(s, false), (s, true)])
        .enumerate()
        .map(|(rank, (s, f))| AugSpec::new(s, f, rank as u32))
        .collect()
}

/// The eight-variant ensemble over [`DEFAULT_SCALES`].
pub fn default_ensemble() -> Vec<AugSpec> {
    ensemble_for_scales(&DEFAULT_SCALES)
}

/// Fails if two specs share a precedence rank or a scale is not positive.
pub fn validate_ensemble(specs: &[AugSpec]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for s in specs {
        if !(s.scale > 0.0 && s.scale.is_finite()) {
            return Err(Error::InvalidInput(format!("augmentation scale {} must be > 0", s.scale)));
        }
        if !seen.insert(s.precedence_rank) {
            return Err(Error::InvalidInput(format!(
                "duplicate precedence rank {}",
                s.precedence_rank
            )));
        }
    }
    Ok(())
}

/// Nearest-neighbour resize; destination pixel centers are mapped onto the
/// source grid and floored.
pub fn resize_nearest(labels: &LabelMap, width: usize, height: usize) -> LabelMap {
    let (sw, sh) = labels.dims();
    if (sw, sh) == (width, height) {
        return labels.clone();
    }
    let src = |dst: usize, s: usize, d: usize| (((2 * dst + 1) * s) / (2 * d)).min(s - 1);
    let xs: Vec<usize> = (0..width).map(|x| src(x, sw, width)).collect();
    LabelMap::from_fn(width, height, labels.num_classes(), |x, y| {
        labels.get(xs[x], src(y, sh, height))
    })
}

pub fn flip_horizontal(labels: &LabelMap) -> LabelMap {
    let w = labels.width();
    LabelMap::from_fn(w, labels.height(), labels.num_classes(), |x, y| {
        labels.get(w - 1 - x, y)
    })
}

/// Undoes the flip, then resizes onto the `base_width x base_height` grid.
pub fn normalize_prediction(pred: &EnsemblePrediction, base_width: usize, base_height: usize) -> Result<LabelMap> {
    let (w, h) = pred.labels.dims();
    let scale = pred.aug.scale;
    let expect_w = (base_width as f64 * scale).round();
    let expect_h = (base_height as f64 * scale).round();
    if base_width == 0
        || base_height == 0
        || w == 0
        || h == 0
        || (w as f64 - expect_w).abs() > 1.0
        || (h as f64 - expect_h).abs() > 1.0
    {
        return Err(Error::InvalidInput(format!(
            "prediction {w}x{h} inconsistent with scale {scale} of base {base_width}x{base_height}"
        )));
    }
    let unflipped = if pred.aug.flipped {
        flip_horizontal(&pred.labels)
    } else {
        pred.labels.clone()
    };
    Ok(resize_nearest(&unflipped, base_width, base_height))
}

/// Per-pixel mode over an ensemble of aligned label maps.
///
/// When several labels share the top count, the winner is the tied label
/// carried by the lowest-ranked prediction among those voting for a tied
/// label. The result does not depend on the order of `preds`.
pub fn majority_vote(preds: &[(LabelMap, AugSpec)]) -> Result<LabelMap> {
    let first = preds
        .first()
        .ok_or_else(|| Error::InvalidInput("empty ensemble".into()))?;
    let dims = first.0.dims();
    if preds.iter().any(|(m, _)| m.dims() != dims) {
        return Err(Error::InvalidInput("ensemble maps differ in size".into()));
    }
    let specs: Vec<AugSpec> = preds.iter().map(|(_, a)| a.clone()).collect();
    validate_ensemble(&specs)?;

    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by_key(|&i| preds[i].1.precedence_rank);
    let maps: Vec<&[u16]> = order.iter().map(|&i| preds[i].0.data()).collect();

    let n = dims.0 * dims.1;
    let mut out = Vec::with_capacity(n);
    let mut counts: Vec<(u16, u32)> = Vec::with_capacity(preds.len());
    for p in 0..n {
        counts.clear();
        for m in &maps {
            let label = m[p];
            match counts.iter_mut().find(|(l, _)| *l == label) {
                Some(entry) => entry.1 += 1,
                None => counts.push((label, 1)),
            }
        }
        let best = counts.iter().map(|c| c.1).max().unwrap_or(0);
        // `counts` is in first-seen order over rank-sorted maps, so the first
        // entry reaching the top count is the lowest-ranked tied supporter.
        let winner = counts
            .iter()
            .find(|c| c.1 == best)
            .map(|c| c.0)
            .unwrap_or(0);
        out.push(winner);
    }
    LabelMap::new(dims.0, dims.1, first.0.num_classes(), out)
}

/// Normalizes each prediction to the base grid and votes.
pub fn fuse_ensemble(preds: &[EnsemblePrediction], base_width: usize, base_height: usize) -> Result<LabelMap> {
    let aligned = preds
        .iter()
        .map(|p| Ok((normalize_prediction(p, base_width, base_height)?, p.aug.clone())))
        .collect::<Result<Vec<_>>>()?;
    majority_vote(&aligned)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[u16]) -> LabelMap {
        LabelMap::new(v.len(), 1, 8, v.to_vec()).unwrap()
    }

    #[test]
    fn default_ensemble_ranks() {
        let e = default_ensemble();
        assert_eq!(e.len(), 8);
        assert_eq!(e[0], AugSpec::new(1.2, false, 0));
        assert_eq!(e[1], AugSpec::new(1.2, true, 1));
        assert_eq!(e[7], AugSpec::new(0.9, true, 7));
        validate_ensemble(&e).unwrap();
    }

    #[test]
    fn identity_normalization() {
        let m = LabelMap::from_fn(3, 2, 8, |x, y| (x + 3 * y) as u16);
        let p = EnsemblePrediction {
            aug: AugSpec::identity(),
            labels: m.clone(),
        };
        assert_eq!(normalize_prediction(&p, 3, 2).unwrap(), m);
    }

    #[test]
    fn mirror_normalization() {
        let p = EnsemblePrediction {
            aug: AugSpec::new(1.0, true, 0),
            labels: LabelMap::new(2, 2, 8, vec![1, 2, 3, 4]).unwrap(),
        };
        assert_eq!(normalize_prediction(&p, 2, 2).unwrap().data(), &[2, 1, 4, 3]);
    }

    #[test]
    fn quadrant_downscale() {
        let m = LabelMap::from_fn(4, 4, 8, |x, y| (x / 2 + 2 * (y / 2)) as u16 + 1);
        let p = EnsemblePrediction {
            aug: AugSpec::new(2.0, false, 0),
            labels: m,
        };
        assert_eq!(normalize_prediction(&p, 2, 2).unwrap().data(), &[1, 2, 3, 4]);
    }

    #[test]
    fn inconsistent_scale_rejected() {
        let p = EnsemblePrediction {
            aug: AugSpec::new(2.0, false, 0),
            labels: LabelMap::filled(3, 3, 8, 0),
        };
        assert!(normalize_prediction(&p, 4, 4).is_err());
    }

    #[test]
    fn strict_majority() {
        let v = majority_vote(&[
            (row(&[1]), AugSpec::new(1.0, false, 0)),
            (row(&[1]), AugSpec::new(1.0, true, 1)),
            (row(&[2]), AugSpec::new(1.2, false, 2)),
        ])
        .unwrap();
        assert_eq!(v.data(), &[1]);
    }

    #[test]
    fn tie_goes_to_highest_resolution() {
        let v = majority_vote(&[
            (row(&[1]), AugSpec::new(0.9, false, 3)),
            (row(&[2]), AugSpec::new(1.2, false, 0)),
        ])
        .unwrap();
        assert_eq!(v.data(), &[2]);
    }

    #[test]
    fn tie_ignores_non_tied_top_rank() {
        // rank 0 votes for 5 (count 1); 1 and 2 tie at count 2.
        let v = majority_vote(&[
            (row(&[5]), AugSpec::new(1.2, false, 0)),
            (row(&[1]), AugSpec::new(1.1, false, 3)),
            (row(&[2]), AugSpec::new(1.2, true, 1)),
            (row(&[1]), AugSpec::new(1.0, false, 4)),
            (row(&[2]), AugSpec::new(0.9, false, 6)),
        ])
        .unwrap();
        assert_eq!(v.data(), &[2]);
    }

    #[test]
    fn vote_errors() {
        assert!(majority_vote(&[]).is_err());
        assert!(majority_vote(&[
            (row(&[1]), AugSpec::new(1.0, false, 0)),
            (row(&[1, 2]), AugSpec::new(1.0, true, 1)),
        ])
        .is_err());
        assert!(majority_vote(&[
            (row(&[1]), AugSpec::new(1.0, false, 0)),
            (row(&[1]), AugSpec::new(1.0, true, 0)),
        ])
        .is_err());
    }
}
