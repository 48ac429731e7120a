//! Independent reference implementations used as test oracles.

use std::collections::{BTreeMap, BTreeSet};

use vidseg::tta::AugSpec;
use vidseg::LabelMap;

/// Direct substitution into the global SSIM formula, written independently
/// of the library (two separate passes, population statistics).
pub fn ssim_oracle(a: &[f64], b: &[f64], c1: f64, c2: f64) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let va = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / n;
    let vb = b.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / n;
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
    ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
}

/// Count every label, collect the tied top labels, then return the label of
/// the lowest-ranked prediction voting for one of them.
pub fn vote_oracle(preds: &[(LabelMap, AugSpec)]) -> LabelMap {
    let (w, h) = preds[0].0.dims();
    LabelMap::from_fn(w, h, preds[0].0.num_classes(), |x, y| {
        let mut counts: BTreeMap<u16, usize> = BTreeMap::new();
        for (m, _) in preds {
            *counts.entry(m.get(x, y)).or_default() += 1;
        }
        let top = *counts.values().max().unwrap();
        preds
            .iter()
            .filter(|(m, _)| counts[&m.get(x, y)] == top)
            .min_by_key(|(_, a)| a.precedence_rank)
            .map(|(m, _)| m.get(x, y))
            .unwrap()
    })
}

/// IoU straight from pixel sets, per class present in either side.
pub fn miou_oracle(preds: &[LabelMap], gts: &[LabelMap], nc: u16, ignore: &BTreeSet<u16>) -> Option<f64> {
    let pairs: Vec<(u16, u16)> = preds
        .iter()
        .zip(gts)
        .flat_map(|(p, g)| p.data().iter().copied().zip(g.data().iter().copied()))
        .filter(|(_, g)| !ignore.contains(g))
        .collect();
    let ious: Vec<f64> = (0..nc)
        .filter_map(|c| {
            let inter = pairs.iter().filter(|&&(p, g)| p == c && g == c).count();
            let union = pairs.iter().filter(|&&(p, g)| p == c || g == c).count();
            (union > 0).then(|| inter as f64 / union as f64)
        })
        .collect();
    (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64)
}

/// Window-by-window enumeration of GT-stable pixels.
pub fn vc_oracle(preds: &[LabelMap], gts: &[LabelMap], k: usize, ignore: &BTreeSet<u16>) -> Option<f64> {
    let n = gts[0].data().len();
    let scores: Vec<f64> = (0..gts.len() + 1 - k)
        .filter_map(|s| {
            let stable: Vec<usize> = (0..n)
                .filter(|&px| {
                    let l = gts[s].data()[px];
                    !ignore.contains(&l) && (s..s + k).all(|t| gts[t].data()[px] == l)
                })
                .collect();
            if stable.is_empty() {
                return None;
            }
            let good = stable
                .iter()
                .filter(|&&px| (s..s + k).all(|t| preds[t].data()[px] == gts[t].data()[px]))
                .count();
            Some(good as f64 / stable.len() as f64)
        })
        .collect();
    (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
}
