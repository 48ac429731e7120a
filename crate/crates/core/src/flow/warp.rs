use crate::error::{Error, Result};
use crate::frame::{LabelMap, ValidityMask, DEFAULT_IGNORE_LABEL};
use crate::scalar::Scalar;

use super::FlowField;

/// Backward nearest-neighbour warp with the default ignore label as fill.
///
/// See [`warp_labels_with_fill`].
pub fn warp_labels<T: Scalar>(labels: &LabelMap, flow: &FlowField<T>) -> Result<(LabelMap, ValidityMask)> {
    warp_labels_with_fill(labels, flow, DEFAULT_IGNORE_LABEL)
}

/// `out(p) = labels(round(p + flow(p)))` with `round(v) = floor(v + 0.5)`.
///
/// `flow` lives on the output grid and points back into `labels`. Pixels
/// whose source falls outside the image get `fill` and are marked invalid.
pub fn warp_labels_with_fill<T: Scalar>(
    labels: &LabelMap,
    flow: &FlowField<T>,
    fill: u16,
) -> Result<(LabelMap, ValidityMask)> {
    if labels.dims() != flow.dims() {
        return Err(Error::InvalidInput(format!(
            "label map {:?} and flow {:?} differ in size",
            labels.dims(),
            flow.dims()
        )));
    }
    let (w, h) = labels.dims();
    let half = T::of(0.5);
    let mut out = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let [dx, dy] = flow.get(x, y);
            let sx = (T::of(x as f64) + dx + half).floor();
            let sy = (T::of(y as f64) + dy + half).floor();
            let inside = sx >= T::zero()
                && sy >= T::zero()
                && sx < T::of(w as f64)
                && sy < T::of(h as f64);
            if inside {
                let (sx, sy) = (sx.to_usize().unwrap_or(0), sy.to_usize().unwrap_or(0));
                out.push(labels.get(sx, sy));
                valid.push(true);
            } else {
                out.push(fill);
                valid.push(false);
            }
        }
    }
    Ok((
        LabelMap::new(w, h, labels.num_classes(), out)?,
        ValidityMask::new(w, h, valid)?,
    ))
}
