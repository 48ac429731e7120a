//! Masked video consistency: block-structured random patch masks, masked
//! inputs, masked predictions through any [`Predictor`], and the combined
//! clean + masked training objective.
//!
//! Mask convention: a grid cell value of `true` means the patch is *kept*.
//! A cell is kept iff its uniform draw `v` satisfies `v > r`, so the keep
//! probability is `1 - r`.

mod predictor;

pub use predictor::{Predictor, ToyCentroidSegmenter};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frame::{LabelMap, RgbFrame};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskParams {
    pub patch_size: usize,
    pub mask_ratio: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            patch_size: 32,
            mask_ratio: 0.5,
            lambda: 1.0,
            seed: 0,
        }
    }
}

impl MaskParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(Error::InvalidInput("patch_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.mask_ratio) {
            return Err(Error::InvalidInput(format!(
                "mask_ratio {} not in [0, 1]",
                self.mask_ratio
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda {} must be >= 0", self.lambda)));
        }
        Ok(())
    }
}

/// Identifies one independent random stream under a given seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StreamId(pub u64);

impl StreamId {
    /// Stream for frame `frame_index` of `video_id`.
    pub fn for_frame(video_id: &str, frame_index: usize) -> Self {
        let mut h = Sha256::new();
        h.update(video_id.as_bytes());
        h.update([0u8]);
        h.update((frame_index as u64).to_le_bytes());
        let digest = h.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        StreamId(u64::from_le_bytes(bytes))
    }
}

/// Uniform draw in `[0, 1)` for one cell, addressed by its counter so the
/// value never depends on evaluation order.
fn cell_uniform(seed: u64, stream: StreamId, cell: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.0);
    rng.set_word_pos(u128::from(cell) * 2);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Binary keep/drop grid of `patch_size`-sided cells covering an image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchMask {
    width: usize,
    height: usize,
    patch_size: usize,
    cols: usize,
    rows: usize,
    grid: Vec<bool>,
}

impl PatchMask {
    pub fn from_grid(width: usize, height: usize, patch_size: usize, grid: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || patch_size == 0 {
            return Err(Error::InvalidInput("mask dimensions must be positive".into()));
        }
        let cols = width.div_ceil(patch_size);
        let rows = height.div_ceil(patch_size);
        if grid.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "mask grid needs {rows}x{cols} cells, got {}",
                grid.len()
            )));
        }
        Ok(Self {
            width,
            height,
            patch_size,
            cols,
            rows,
            grid,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    /// Grid shape as `(rows, cols)`.
    pub fn grid_dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn grid(&self) -> &[bool] {
        &self.grid
    }

    pub fn cell(&self, row: usize, col: usize) -> bool {
        self.grid[row * self.cols + col]
    }

    pub fn kept(&self, x: usize, y: usize) -> bool {
        self.cell(y / self.patch_size, x / self.patch_size)
    }

    /// Row-major per-pixel keep flags.
    pub fn expand(&self) -> Vec<bool> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| self.kept(x, y))
            .collect()
    }

    pub fn kept_fraction(&self) -> f64 {
        self.grid.iter().filter(|&&k| k).count() as f64 / self.grid.len() as f64
    }
}

pub fn sample_patch_mask(width: usize, height: usize, params: &MaskParams, stream: StreamId) -> Result<PatchMask> {
    params.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput("mask dimensions must be positive".into()));
    }
    let cols = width.div_ceil(params.patch_size);
    let rows = height.div_ceil(params.patch_size);
    let grid = (0..(rows * cols) as u64)
        .map(|cell| cell_uniform(params.seed, stream, cell) > params.mask_ratio)
        .collect();
    PatchMask::from_grid(width, height, params.patch_size, grid)
}

/// Zeroes every pixel of a dropped patch; kept pixels are copied untouched.
pub fn apply_mask(frame: &RgbFrame, mask: &PatchMask) -> Result<RgbFrame> {
    if frame.dims() != (mask.width, mask.height) {
        return Err(Error::InvalidInput(format!(
            "mask {}x{} does not match frame {:?}",
            mask.width,
            mask.height,
            frame.dims()
        )));
    }
    let mut out = frame.clone();
    let w = frame.width();
    for (i, px) in out.data_mut().chunks_exact_mut(3).enumerate() {
        if !mask.kept(i % w, i / w) {
            px.fill(0);
        }
    }
    Ok(out)
}

/// Masks each frame with its own stream derived from `(video_id, index)`.
pub fn mask_video(frames: &[RgbFrame], params: &MaskParams, video_id: &str) -> Result<Vec<RgbFrame>> {
    let dims = frames
        .first()
        .ok_or_else(|| Error::InvalidInput("no frames to mask".into()))?
        .dims();
    if frames.iter().any(|f| f.dims() != dims) {
        return Err(Error::InvalidInput("frames differ in size".into()));
    }
    frames
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let mask = sample_patch_mask(dims.0, dims.1, params, StreamId::for_frame(video_id, t))?;
            apply_mask(f, &mask)
        })
        .collect()
}

/// Prediction on independently masked copies of `frames`.
pub fn masked_prediction<P: Predictor + ?Sized>(
    predictor: &P,
    frames: &[RgbFrame],
    params: &MaskParams,
    video_id: &str,
) -> Result<Vec<LabelMap>> {
    let masked = mask_video(frames, params, video_id)?;
    predictor.predict(&masked)
}

/// `(1/N) * sum_k (L_k + lambda * L^M_k)`.
pub fn combine_losses(clean: &[f64], masked: &[f64], lambda: f64) -> Result<f64> {
    if clean.len() != masked.len() {
        return Err(Error::InvalidInput(format!(
            "{} clean losses vs {} masked losses",
            clean.len(),
            masked.len()
        )));
    }
    if clean.is_empty() {
        return Err(Error::EmptyInput("no losses to combine".into()));
    }
    if clean
        .iter()
        .chain(masked)
        .chain(std::iter::once(&lambda))
        .any(|v| !v.is_finite() || *v < 0.0)
    {
        return Err(Error::InvalidInput("losses and lambda must be finite and >= 0".into()));
    }
    let total: f64 = clean.iter().zip(masked).map(|(l, m)| l + lambda * m).sum();
    Ok(total / clean.len() as f64)
}

/// One training sample: a clip and its ground truth.
#[derive(Clone, Debug)]
pub struct Sample<'a> {
    pub video_id: &'a str,
    pub frames: &'a [RgbFrame],
    pub ground_truth: &'a [LabelMap],
}

/// Clean and masked losses per sample, combined with `params.lambda`.
pub fn mvc_objective<P: Predictor + ?Sized>(predictor: &P, batch: &[Sample<'_>], params: &MaskParams) -> Result<f64> {
    let mut clean = Vec::with_capacity(batch.len());
    let mut masked = Vec::with_capacity(batch.len());
    for s in batch {
        clean.push(predictor.pixel_loss(s.frames, s.ground_truth)?);
        let hidden = mask_video(s.frames, params, s.video_id)?;
        masked.push(predictor.pixel_loss(&hidden, s.ground_truth)?);
    }
    combine_losses(&clean, &masked, params.lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(r: f64) -> MaskParams {
        MaskParams {
            patch_size: 16,
            mask_ratio: r,
            ..Default::default()
        }
    }

    #[test]
    fn extreme_ratios() {
        let keep_all = sample_patch_mask(64, 48, &params(0.0), StreamId(3)).unwrap();
        assert!(keep_all.grid().iter().all(|&k| k));
        let drop_all = sample_patch_mask(64, 48, &params(1.0), StreamId(3)).unwrap();
        assert!(drop_all.grid().iter().all(|&k| !k));
    }

    #[test]
    fn partial_cells_at_edges() {
        let m = sample_patch_mask(33, 17, &params(0.5), StreamId(0)).unwrap();
        assert_eq!(m.grid_dims(), (2, 3));
        assert_eq!(m.expand().len(), 33 * 17);
    }

    #[test]
    fn masks_are_reproducible() {
        let a = sample_patch_mask(64, 64, &params(0.5), StreamId(9)).unwrap();
        let b = sample_patch_mask(64, 64, &params(0.5), StreamId(9)).unwrap();
        let c = sample_patch_mask(64, 64, &params(0.5), StreamId(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn stream_ids_differ_per_frame() {
        assert_ne!(StreamId::for_frame("v", 0), StreamId::for_frame("v", 1));
        assert_ne!(StreamId::for_frame("v1", 0), StreamId::for_frame("v", 10));
    }

    #[test]
    fn apply_single_dropped_cell() {
        let frame = RgbFrame::filled(32, 32, [10, 20, 30]);
        let mask = PatchMask::from_grid(32, 32, 16, vec![false, true, true, true]).unwrap();
        let out = apply_mask(&frame, &mask).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                let expect = if x < 16 && y < 16 { [0, 0, 0] } else { [10, 20, 30] };
                assert_eq!(out.pixel(x, y), expect);
            }
        }
    }

    #[test]
    fn apply_identity_and_annihilation() {
        let frame = RgbFrame::new(2, 2, (0..12).collect()).unwrap();
        let ones = PatchMask::from_grid(2, 2, 4, vec![true]).unwrap();
        assert_eq!(apply_mask(&frame, &ones).unwrap(), frame);
        let zeros = PatchMask::from_grid(2, 2, 4, vec![false]).unwrap();
        assert!(apply_mask(&frame, &zeros).unwrap().data().iter().all(|&v| v == 0));
        let wrong = PatchMask::from_grid(3, 2, 4, vec![true]).unwrap();
        assert!(apply_mask(&frame, &wrong).is_err());
    }

    #[test]
    fn loss_combination() {
        assert_eq!(combine_losses(&[1.0], &[0.5], 1.0).unwrap(), 1.5);
        assert_eq!(combine_losses(&[1.0, 3.0], &[7.0, 9.0], 0.0).unwrap(), 2.0);
        assert!((combine_losses(&[1.0, 2.0], &[0.4, 0.6], 2.0).unwrap() - 2.5).abs() < 1e-15);
        assert!(combine_losses(&[1.0], &[0.5, 0.2], 1.0).is_err());
        assert!(combine_losses(&[], &[], 1.0).is_err());
        assert!(combine_losses(&[-1.0], &[0.5], 1.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(MaskParams { patch_size: 0, ..Default::default() }.validate().is_err());
        assert!(MaskParams { mask_ratio: 1.5, ..Default::default() }.validate().is_err());
        assert!(MaskParams { lambda: -1.0, ..Default::default() }.validate().is_err());
    }
}
