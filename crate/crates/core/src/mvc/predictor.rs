use crate::error::{Error, Result};
use crate::frame::{LabelMap, RgbFrame};

/// A segmentation model as seen by the masked-consistency utilities.
pub trait Predictor {
    /// One label map per frame, same size as the frame.
    fn predict(&self, frames: &[RgbFrame]) -> Result<Vec<LabelMap>>;

    /// Mean per-pixel loss of the model's output on `frames` against
    /// `ground_truth`. Non-negative and finite.
    fn pixel_loss(&self, frames: &[RgbFrame], ground_truth: &[LabelMap]) -> Result<f64>;
}

/// Nearest-centroid classifier in RGB space.
///
/// Colors are scaled to `[0, 1]`. The loss is the cross-entropy of a softmax
/// over `-|x - centroid|^2 / temperature`.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyCentroidSegmenter {
    centroids: Vec<[f64; 3]>,
    temperature: f64,
}

impl ToyCentroidSegmenter {
    /// Centroids are given as 8-bit RGB, one per class.
    pub fn new(centroids: &[[u8; 3]], temperature: f64) -> Result<Self> {
        if centroids.len() < 2 || centroids.len() > usize::from(u16::MAX) {
            return Err(Error::InvalidInput("need at least two class centroids".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidInput(format!("temperature {temperature} must be > 0")));
        }
        Ok(Self {
            centroids: centroids
                .iter()
                .map(|c| c.map(|v| f64::from(v) / 255.0))
                .collect(),
            temperature,
        })
    }

    pub fn num_classes(&self) -> u16 {
        self.centroids.len() as u16
    }

    fn logits(&self, rgb: &[u8]) -> impl Iterator<Item = f64> + '_ {
        let x = [rgb[0], rgb[1], rgb[2]].map(|v| f64::from(v) / 255.0);
        let t = self.temperature;
        self.centroids.iter().map(move |c| {
            let d2: f64 = c.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            -d2 / t
        })
    }

    fn classify(&self, rgb: &[u8]) -> u16 {
        let mut best = (0u16, f64::NEG_INFINITY);
        for (k, l) in self.logits(rgb).enumerate() {
            if l > best.1 {
                best = (k as u16, l);
            }
        }
        best.0
    }
}

impl Predictor for ToyCentroidSegmenter {
    fn predict(&self, frames: &[RgbFrame]) -> Result<Vec<LabelMap>> {
        frames
            .iter()
            .map(|f| {
                let data = f.data().chunks_exact(3).map(|px| self.classify(px)).collect();
                LabelMap::new(f.width(), f.height(), self.num_classes(), data)
            })
            .collect()
    }

    fn pixel_loss(&self, frames: &[RgbFrame], ground_truth: &[LabelMap]) -> Result<f64> {
        if frames.len() != ground_truth.len() {
            return Err(Error::InvalidInput(format!(
                "{} frames vs {} ground-truth maps",
                frames.len(),
                ground_truth.len()
            )));
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for (f, gt) in frames.iter().zip(ground_truth) {
            if f.dims() != gt.dims() {
                return Err(Error::InvalidInput("frame and ground truth differ in size".into()));
            }
            for (px, &label) in f.data().chunks_exact(3).zip(gt.data()) {
                if label >= self.num_classes() {
                    continue;
                }
                let logits: Vec<f64> = self.logits(px).collect();
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
                total += lse - logits[usize::from(label)];
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptyInput("no scored pixels".into()));
        }
        Ok(total / count as f64)
    }
}
