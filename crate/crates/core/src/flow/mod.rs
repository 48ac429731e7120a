//! Dense optical flow (Farneback two-frame polynomial expansion) and
//! flow-guided warping of label maps.

mod farneback;
mod poly;
mod pyramid;
mod warp;

pub use farneback::{farneback_flow, FarnebackParams};
pub use poly::{poly_expand, PolyExpansion};
pub use pyramid::{gaussian_blur, gaussian_pyramid, resize_bilinear};
pub use warp::{warp_labels, warp_labels_with_fill};

use crate::error::{Error, Result};
use crate::frame::RgbFrame;
use crate::scalar::Scalar;

/// Single-channel intensity image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayFrame<T = f32> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> GrayFrame<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::InvalidInput(format!(
                "gray frame {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(bad) = data
            .iter()
            .find(|v| !v.is_finite() || **v < T::zero() || **v > T::one())
        {
            return Err(Error::InvalidInput(format!(
                "gray intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds a frame without range checks; values are clamped into `[0, 1]`.
    pub(crate) fn from_raw_clamped(width: usize, height: usize, mut data: Vec<T>) -> Self {
        for v in &mut data {
            *v = if v.is_finite() {
                v.max(T::zero()).min(T::one())
            } else {
                T::zero()
            };
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Rec.601 luma, normalized to `[0, 1]`.
    pub fn from_rgb(frame: &RgbFrame) -> Self {
        let (wr, wg, wb) = (T::of(0.299), T::of(0.587), T::of(0.114));
        let scale = T::of(255.0);
        let data = frame
            .data()
            .chunks_exact(3)
            .map(|px| {
                let r = T::of(f64::from(px[0]));
                let g = T::of(f64::from(px[1]));
                let b = T::of(f64::from(px[2]));
                (wr * r + wg * g + wb * b) / scale
            })
            .collect();
        Self::from_raw_clamped(frame.width(), frame.height(), data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }
}

/// Per-pixel displacement `(dx, dy)` in pixels.
///
/// A flow computed from `prev` to `next` maps `prev(p)` onto `next(p + F(p))`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField<T = f32> {
    width: usize,
    height: usize,
    data: Vec<[T; 2]>,
}

impl<T: Scalar> FlowField<T> {
    pub fn new(width: usize, height: usize, data: Vec<[T; 2]>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::InvalidInput(format!(
                "flow field {width}x{height} needs {} vectors, got {}",
                width * height,
                data.len()
            )));
        }
        if data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("flow field contains NaN/Inf".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, T::zero(), T::zero())
    }

    pub fn constant(width: usize, height: usize, dx: T, dy: T) -> Self {
        Self {
            width,
            height,
            data: vec![[dx, dy]; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[[T; 2]] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [T; 2] {
        self.data[y * self.width + x]
    }

    /// Largest displacement magnitude in the field.
    pub fn max_norm(&self) -> T {
        self.data
            .iter()
            .map(|[dx, dy]| (*dx * *dx + *dy * *dy).sqrt())
            .fold(T::zero(), T::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_rejects_out_of_range() {
        assert!(GrayFrame::<f32>::new(2, 1, vec![0.0, 1.5]).is_err());
        assert!(GrayFrame::<f32>::new(2, 1, vec![0.0, f32::NAN]).is_err());
        assert!(GrayFrame::<f64>::new(2, 1, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn luma_weights() {
        let rgb = RgbFrame::new(3, 1, vec![255, 0, 0, 0, 255, 0, 255, 255, 255]).unwrap();
        let g = GrayFrame::<f64>::from_rgb(&rgb);
        assert!((g.get(0, 0) - 0.299).abs() < 1e-12);
        assert!((g.get(1, 0) - 0.587).abs() < 1e-12);
        assert!((g.get(2, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flow_rejects_nan() {
        assert!(FlowField::<f32>::new(1, 1, vec![[f32::INFINITY, 0.0]]).is_err());
    }
}
