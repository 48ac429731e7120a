use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::pyramid::{correlate_cols, correlate_rows};
use super::GrayFrame;

/// Per-pixel quadratic model `f(u) ~ u^T A u + b^T u + c` around each pixel,
/// with `u = (x, y)` measured in pixels (x right, y down). Stored as planes.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyExpansion<T = f32> {
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) a_xx: Vec<T>,
    pub(crate) a_xy: Vec<T>,
    pub(crate) a_yy: Vec<T>,
    pub(crate) b_x: Vec<T>,
    pub(crate) b_y: Vec<T>,
    pub(crate) c: Vec<T>,
}

impl<T: Scalar> PolyExpansion<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Symmetric matrix `A` at a pixel, as `[[a_xx, a_xy], [a_xy, a_yy]]`.
    pub fn a(&self, x: usize, y: usize) -> [[T; 2]; 2] {
        let i = y * self.width + x;
        [[self.a_xx[i], self.a_xy[i]], [self.a_xy[i], self.a_yy[i]]]
    }

    pub fn b(&self, x: usize, y: usize) -> [T; 2] {
        let i = y * self.width + x;
        [self.b_x[i], self.b_y[i]]
    }

    pub fn c(&self, x: usize, y: usize) -> T {
        self.c[y * self.width + x]
    }
}

/// Inverts a small dense matrix by Gauss-Jordan elimination with partial
/// pivoting. Only used on the constant 6x6 Gram matrix of the basis.
fn invert<const N: usize>(mut m: [[f64; N]; N]) -> Option<[[f64; N]; N]> {
    let mut inv = [[0.0; N]; N];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..N {
        let pivot = (col..N).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col];
        for k in 0..N {
            m[col][k] /= p;
            inv[col][k] /= p;
        }
        for row in 0..N {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    for k in 0..N {
                        m[row][k] -= f * m[col][k];
                        inv[row][k] -= f * inv[col][k];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Weighted least-squares fit of a quadratic over each `poly_n x poly_n`
/// neighborhood with Gaussian applicability of std `poly_sigma`.
///
/// The six basis responses `{1, x, y, x^2, y^2, xy}` are obtained with
/// separable correlations, then mapped to coefficients through the inverse
/// of the (position independent) Gram matrix. Borders replicate edges.
pub fn poly_expand<T: Scalar>(frame: &GrayFrame<T>, poly_n: usize, poly_sigma: f64) -> Result<PolyExpansion<T>> {
    if poly_n < 3 || poly_n % 2 == 0 {
        return Err(Error::InvalidInput(format!("poly_n must be odd and >= 3, got {poly_n}")));
    }
    if !(poly_sigma > 0.0 && poly_sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("poly_sigma must be > 0, got {poly_sigma}")));
    }
    let (w, h) = frame.dims();
    let r = (poly_n / 2) as isize;
    let offsets: Vec<f64> = (-r..=r).map(|t| t as f64).collect();
    let g: Vec<f64> = offsets
        .iter()
        .map(|t| (-t * t / (2.0 * poly_sigma * poly_sigma)).exp())
        .collect();

    // Gram matrix G_pq = sum g(x) g(y) phi_p phi_q over the window.
    let basis = |x: f64, y: f64| [1.0, x, y, x * x, y * y, x * y];
    let mut gram = [[0.0f64; 6]; 6];
    for (j, &y) in offsets.iter().enumerate() {
        for (i, &x) in offsets.iter().enumerate() {
            let wgt = g[i] * g[j];
            let phi = basis(x, y);
            for p in 0..6 {
                for q in 0..6 {
                    gram[p][q] += wgt * phi[p] * phi[q];
                }
            }
        }
    }
    let ginv = invert(gram).ok_or_else(|| Error::InvalidInput("singular applicability".into()))?;

    let taps = |pow: i32| -> Vec<T> {
        offsets
            .iter()
            .zip(&g)
            .map(|(&t, &gv)| T::of(gv * t.powi(pow)))
            .collect()
    };
    let (k0, k1, k2) = (taps(0), taps(1), taps(2));

    // Offsetting by one pixel's value leaves A and b unchanged and makes
    // flat images expand to exact zeros.
    let base = frame.data().first().copied().unwrap_or_else(T::zero);
    let shifted: Vec<T> = frame.data().iter().map(|&v| v - base).collect();
    let data = &shifted[..];
    let v0 = correlate_cols(data, w, h, &k0);
    let v1 = correlate_cols(data, w, h, &k1);
    let v2 = correlate_cols(data, w, h, &k2);

    let r_1 = correlate_rows(&v0, w, h, &k0);
    let r_x = correlate_rows(&v0, w, h, &k1);
    let r_y = correlate_rows(&v1, w, h, &k0);
    let r_xx = correlate_rows(&v0, w, h, &k2);
    let r_yy = correlate_rows(&v2, w, h, &k0);
    let r_xy = correlate_rows(&v1, w, h, &k1);

    let ginv_t: Vec<[T; 6]> = ginv.iter().map(|row| row.map(T::of)).collect();
    let n = w * h;
    let mut out = PolyExpansion {
        width: w,
        height: h,
        a_xx: Vec::with_capacity(n),
        a_xy: Vec::with_capacity(n),
        a_yy: Vec::with_capacity(n),
        b_x: Vec::with_capacity(n),
        b_y: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
    };
    let half = T::of(0.5);
    for i in 0..n {
        let resp = [r_1[i], r_x[i], r_y[i], r_xx[i], r_yy[i], r_xy[i]];
        let coef: Vec<T> = ginv_t
            .iter()
            .map(|row| row.iter().zip(&resp).map(|(&a, &b)| a * b).sum())
            .collect();
        out.c.push(coef[0] + base);
        out.b_x.push(coef[1]);
        out.b_y.push(coef[2]);
        out.a_xx.push(coef[3]);
        out.a_yy.push(coef[4]);
        out.a_xy.push(coef[5] * half);
    }
    Ok(out)
}
