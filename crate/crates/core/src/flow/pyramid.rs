use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::GrayFrame;

/// A level is only downsampled further while its smaller side is at least this.
const MIN_PYRAMID_SIDE: usize = 8;

/// Normalized 1-D Gaussian taps for offsets `-radius..=radius`.
pub(crate) fn gaussian_kernel<T: Scalar>(sigma: f64, radius: usize) -> Vec<T> {
    let r = radius as isize;
    let raw: Vec<f64> = (-r..=r)
        .map(|t| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| T::of(v / sum)).collect()
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Horizontal correlation with an odd-length kernel, edge replicated.
pub(crate) fn correlate_rows<T: Scalar>(src: &[T], width: usize, height: usize, kernel: &[T]) -> Vec<T> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![T::zero(); src.len()];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        let dst = &mut out[y * width..(y + 1) * width];
        for (x, d) in dst.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (k, &w) in kernel.iter().enumerate() {
                acc += w * row[clamp_index(x as isize + k as isize - r, width)];
            }
            *d = acc;
        }
    }
    out
}

/// Vertical correlation with an odd-length kernel, edge replicated.
pub(crate) fn correlate_cols<T: Scalar>(src: &[T], width: usize, height: usize, kernel: &[T]) -> Vec<T> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![T::zero(); src.len()];
    for y in 0..height {
        let dst = &mut out[y * width..(y + 1) * width];
        for (k, &w) in kernel.iter().enumerate() {
            let sy = clamp_index(y as isize + k as isize - r, height);
            let row = &src[sy * width..(sy + 1) * width];
            for (d, &s) in dst.iter_mut().zip(row) {
                *d += w * s;
            }
        }
    }
    out
}

/// Bilinear resampling of a plane with pixel-center alignment.
pub(crate) fn resize_plane<T: Scalar>(
    src: &[T],
    width: usize,
    height: usize,
    new_width: usize,
    new_height: usize,
) -> Vec<T> {
    let sx = width as f64 / new_width as f64;
    let sy = height as f64 / new_height as f64;
    let taps = |dst: usize, ratio: f64, len: usize| {
        let pos = ((dst as f64 + 0.5) * ratio - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, T::of(pos - i0 as f64))
    };
    let xs: Vec<_> = (0..new_width).map(|x| taps(x, sx, width)).collect();
    let mut out = Vec::with_capacity(new_width * new_height);
    for y in 0..new_height {
        let (y0, y1, fy) = taps(y, sy, height);
        let r0 = &src[y0 * width..(y0 + 1) * width];
        let r1 = &src[y1 * width..(y1 + 1) * width];
        for &(x0, x1, fx) in &xs {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
            out.push(top + (bottom - top) * fy);
        }
    }
    out
}

/// Separable Gaussian smoothing with edge replication.
pub fn gaussian_blur<T: Scalar>(frame: &GrayFrame<T>, sigma: f64) -> GrayFrame<T> {
    if sigma <= 0.0 {
        return frame.clone();
    }
    let radius = ((3.0 * sigma).ceil() as usize).max(1);
    let kernel = gaussian_kernel::<T>(sigma, radius);
    let (w, h) = frame.dims();
    let tmp = correlate_rows(frame.data(), w, h, &kernel);
    GrayFrame::from_raw_clamped(w, h, correlate_cols(&tmp, w, h, &kernel))
}

pub fn resize_bilinear<T: Scalar>(frame: &GrayFrame<T>, width: usize, height: usize) -> Result<GrayFrame<T>> {
    if width == 0 || height == 0 || frame.width() == 0 || frame.height() == 0 {
        return Err(Error::InvalidInput("cannot resize to or from an empty frame".into()));
    }
    let data = resize_plane(frame.data(), frame.width(), frame.height(), width, height);
    Ok(GrayFrame::from_raw_clamped(width, height, data))
}

/// Coarse-to-fine pyramid, finest level first.
///
/// Each level is the previous one smoothed with `sigma = (1/scale - 1) / 2`
/// and resampled to `round(dim * scale)`. A level smaller than 8 pixels on
/// its short side is not downsampled further, so the result may hold fewer
/// than `levels` entries.
pub fn gaussian_pyramid<T: Scalar>(frame: &GrayFrame<T>, levels: usize, scale: f64) -> Result<Vec<GrayFrame<T>>> {
    if frame.width() == 0 || frame.height() == 0 {
        return Err(Error::InvalidInput("zero-size frame".into()));
    }
    if levels == 0 {
        return Err(Error::InvalidInput("pyramid needs at least one level".into()));
    }
    if !(scale > 0.0 && scale < 1.0) {
        return Err(Error::InvalidInput(format!("pyramid scale {scale} not in (0, 1)")));
    }
    let sigma = (1.0 / scale - 1.0) * 0.5;
    let mut pyramid = vec![frame.clone()];
    while pyramid.len() < levels {
        let last = pyramid.last().expect("non-empty");
        if last.width().min(last.height()) < MIN_PYRAMID_SIDE {
            break;
        }
        let w = (last.width() as f64 * scale).round() as usize;
        let h = (last.height() as f64 * scale).round() as usize;
        if w == 0 || h == 0 {
            break;
        }
        let next = resize_bilinear(&gaussian_blur(last, sigma), w, h)?;
        pyramid.push(next);
    }
    Ok(pyramid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(w: usize, h: usize) -> GrayFrame<f32> {
        GrayFrame::from_fn(w, h, |x, y| ((x * 7 + y * 3) % 11) as f32 / 10.0).unwrap()
    }

    fn sizes(p: &[GrayFrame<f32>]) -> Vec<(usize, usize)> {
        p.iter().map(|f| f.dims()).collect()
    }

    #[test]
    fn halving_pyramid_sizes() {
        let p = gaussian_pyramid(&frame(64, 64), 3, 0.5).unwrap();
        assert_eq!(sizes(&p), vec![(64, 64), (32, 32), (16, 16)]);
    }

    #[test]
    fn single_level_is_identity() {
        let f = frame(13, 9);
        let p = gaussian_pyramid(&f, 1, 0.5).unwrap();
        assert_eq!(p, vec![f]);
    }

    #[test]
    fn small_frames_truncate() {
        let p = gaussian_pyramid(&frame(12, 12), 4, 0.5).unwrap();
        assert_eq!(sizes(&p), vec![(12, 12), (6, 6)]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(gaussian_pyramid(&frame(8, 8), 0, 0.5).is_err());
        assert!(gaussian_pyramid(&frame(8, 8), 2, 1.0).is_err());
        let empty = GrayFrame::<f32>::new(0, 0, vec![]).unwrap();
        assert!(gaussian_pyramid(&empty, 2, 0.5).is_err());
    }

    #[test]
    fn blur_preserves_constant() {
        let f = GrayFrame::<f64>::new(5, 4, vec![0.25; 20]).unwrap();
        let b = gaussian_blur(&f, 1.3);
        assert!(b.data().iter().all(|v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn resize_same_size_is_identity() {
        let f = frame(7, 5);
        assert_eq!(resize_bilinear(&f, 7, 5).unwrap(), f);
    }
}
