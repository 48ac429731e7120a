use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::poly::{poly_expand, PolyExpansion};
use super::pyramid::{correlate_cols, correlate_rows, gaussian_pyramid, resize_plane};
use super::{FlowField, GrayFrame};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FarnebackParams {
    pub pyr_scale: f64,
    pub levels: usize,
    /// Side of the uniform aggregation window; odd.
    pub winsize: usize,
    pub iterations: usize,
    pub poly_n: usize,
    pub poly_sigma: f64,
    /// Tikhonov term added to the 2x2 normal matrix of every pixel.
    pub regularization_eps: f64,
}

impl Default for FarnebackParams {
    fn default() -> Self {
        Self {
            pyr_scale: 0.5,
            levels: 3,
            winsize: 15,
            iterations: 3,
            poly_n: 5,
            poly_sigma: 1.1,
            regularization_eps: 1e-6,
        }
    }
}

impl FarnebackParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.pyr_scale > 0.0 && self.pyr_scale < 1.0) {
            return bad(format!("pyr_scale {} not in (0, 1)", self.pyr_scale));
        }
        if self.levels == 0 || self.iterations == 0 {
            return bad("levels and iterations must be >= 1".into());
        }
        if self.winsize < 3 || self.winsize % 2 == 0 {
            return bad(format!("winsize {} must be odd and >= 3", self.winsize));
        }
        if self.poly_n != 5 && self.poly_n != 7 {
            return bad(format!("poly_n {} must be 5 or 7", self.poly_n));
        }
        if !(self.poly_sigma > 0.0 && self.poly_sigma.is_finite()) {
            return bad(format!("poly_sigma {} must be > 0", self.poly_sigma));
        }
        if !(self.regularization_eps > 0.0 && self.regularization_eps.is_finite()) {
            return bad(format!("regularization_eps {} must be > 0", self.regularization_eps));
        }
        Ok(())
    }
}

/// Samples `plane` at a fractional position, clamping to the image.
#[inline]
fn sample<T: Scalar>(plane: &[T], width: usize, height: usize, x: T, y: T) -> T {
    let max_x = T::of((width - 1) as f64);
    let max_y = T::of((height - 1) as f64);
    let x = x.max(T::zero()).min(max_x);
    let y = y.max(T::zero()).min(max_y);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0.to_usize().unwrap_or(0);
    let y0 = y0.to_usize().unwrap_or(0);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let top = plane[y0 * width + x0] + (plane[y0 * width + x1] - plane[y0 * width + x0]) * fx;
    let bot = plane[y1 * width + x0] + (plane[y1 * width + x1] - plane[y1 * width + x0]) * fx;
    top + (bot - top) * fy
}

fn box_sum<T: Scalar>(plane: &[T], width: usize, height: usize, ones: &[T]) -> Vec<T> {
    let tmp = correlate_rows(plane, width, height, ones);
    correlate_cols(&tmp, width, height, ones)
}

/// One refinement round: re-linearize around `flow` and solve the
/// regularized windowed least-squares system at every pixel.
fn refine<T: Scalar>(
    e1: &PolyExpansion<T>,
    e2: &PolyExpansion<T>,
    flow: &mut [[T; 2]],
    winsize: usize,
    eps: T,
) {
    let (w, h) = (e1.width, e1.height);
    let n = w * h;
    let half = T::of(0.5);
    let mut g11 = Vec::with_capacity(n);
    let mut g12 = Vec::with_capacity(n);
    let mut g22 = Vec::with_capacity(n);
    let mut h1 = Vec::with_capacity(n);
    let mut h2 = Vec::with_capacity(n);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let [dx, dy] = flow[i];
            let sx = T::of(x as f64) + dx;
            let sy = T::of(y as f64) + dy;
            let axx2 = sample(&e2.a_xx, w, h, sx, sy);
            let axy2 = sample(&e2.a_xy, w, h, sx, sy);
            let ayy2 = sample(&e2.a_yy, w, h, sx, sy);
            let bx2 = sample(&e2.b_x, w, h, sx, sy);
            let by2 = sample(&e2.b_y, w, h, sx, sy);

            let axx = (e1.a_xx[i] + axx2) * half;
            let axy = (e1.a_xy[i] + axy2) * half;
            let ayy = (e1.a_yy[i] + ayy2) * half;
            let dbx = -(bx2 - e1.b_x[i]) * half + axx * dx + axy * dy;
            let dby = -(by2 - e1.b_y[i]) * half + axy * dx + ayy * dy;

            // A is symmetric, so A^T A = A A and A^T db = A db.
            g11.push(axx * axx + axy * axy);
            g12.push(axx * axy + axy * ayy);
            g22.push(axy * axy + ayy * ayy);
            h1.push(axx * dbx + axy * dby);
            h2.push(axy * dbx + ayy * dby);
        }
    }
    let ones = vec![T::one(); winsize];
    let g11 = box_sum(&g11, w, h, &ones);
    let g12 = box_sum(&g12, w, h, &ones);
    let g22 = box_sum(&g22, w, h, &ones);
    let h1 = box_sum(&h1, w, h, &ones);
    let h2 = box_sum(&h2, w, h, &ones);
    for (i, d) in flow.iter_mut().enumerate() {
        let a = g11[i] + eps;
        let b = g12[i];
        let c = g22[i] + eps;
        let det = a * c - b * b;
        let dx = (c * h1[i] - b * h2[i]) / det;
        let dy = (a * h2[i] - b * h1[i]) / det;
        *d = if dx.is_finite() && dy.is_finite() {
            [dx, dy]
        } else {
            [T::zero(), T::zero()]
        };
    }
}

/// Dense flow from `prev` to `next`: `prev(p)` corresponds to `next(p + F(p))`.
///
/// Coarse-to-fine over a Gaussian pyramid. At each level the coarser flow is
/// upsampled and rescaled, then refined `iterations` times.
pub fn farneback_flow<T: Scalar>(
    prev: &GrayFrame<T>,
    next: &GrayFrame<T>,
    params: &FarnebackParams,
) -> Result<FlowField<T>> {
    params.validate()?;
    if prev.dims() != next.dims() {
        return Err(Error::InvalidInput(format!(
            "frame dimensions differ: {:?} vs {:?}",
            prev.dims(),
            next.dims()
        )));
    }
    let (width, height) = prev.dims();
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput("zero-size frame".into()));
    }
    let pyr_prev = gaussian_pyramid(prev, params.levels, params.pyr_scale)?;
    let pyr_next = gaussian_pyramid(next, params.levels, params.pyr_scale)?;
    let eps = T::of(params.regularization_eps);

    let mut flow: Vec<[T; 2]> = Vec::new();
    let mut flow_dims = (0usize, 0usize);
    for (f1, f2) in pyr_prev.iter().zip(&pyr_next).rev() {
        let (w, h) = f1.dims();
        flow = if flow.is_empty() {
            vec![[T::zero(), T::zero()]; w * h]
        } else {
            let (pw, ph) = flow_dims;
            let dx: Vec<T> = flow.iter().map(|d| d[0]).collect();
            let dy: Vec<T> = flow.iter().map(|d| d[1]).collect();
            let sx = T::of(w as f64 / pw as f64);
            let sy = T::of(h as f64 / ph as f64);
            let dx = resize_plane(&dx, pw, ph, w, h);
            let dy = resize_plane(&dy, pw, ph, w, h);
            dx.into_iter().zip(dy).map(|(a, b)| [a * sx, b * sy]).collect()
        };
        flow_dims = (w, h);
        let e1 = poly_expand(f1, params.poly_n, params.poly_sigma)?;
        let e2 = poly_expand(f2, params.poly_n, params.poly_sigma)?;
        for _ in 0..params.iterations {
            refine(&e1, &e2, &mut flow, params.winsize, eps);
        }
    }
    FlowField::new(width, height, flow)
}
