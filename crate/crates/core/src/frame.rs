//! Raster containers shared by every stage: RGB frames, label maps and
//! validity masks. All are row-major with no padding.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Label used for pixels that carry no class (VSPW void).
pub const DEFAULT_IGNORE_LABEL: u16 = 255;

fn check_len(what: &str, width: usize, height: usize, per_px: usize, len: usize) -> Result<()> {
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(per_px))
        .ok_or_else(|| Error::InvalidInput(format!("{what}: {width}x{height} overflows")))?;
    if expected != len {
        return Err(Error::InvalidInput(format!(
            "{what}: {width}x{height} needs {expected} values, got {len}"
        )));
    }
    Ok(())
}

/// 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_len("rgb frame", width, height, 3, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self {
            width,
            height,
            data,
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Per-pixel class indices.
///
/// Values `>= num_classes` are only legal when they belong to the ignore set
/// of whoever consumes the map; [`LabelMap::validate`] checks that.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    num_classes: u16,
    data: Vec<u16>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, num_classes: u16, data: Vec<u16>) -> Result<Self> {
        check_len("label map", width, height, 1, data.len())?;
        Ok(Self {
            width,
            height,
            num_classes,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, num_classes: u16, label: u16) -> Self {
        Self {
            width,
            height,
            num_classes,
            data: vec![label; width * height],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        num_classes: u16,
        mut f: impl FnMut(usize, usize) -> u16,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            num_classes,
            data,
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

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u16] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u16) {
        self.data[y * self.width + x] = label;
    }

    pub fn with_num_classes(mut self, num_classes: u16) -> Self {
        self.num_classes = num_classes;
        self
    }

    /// Fails on the first value that is neither a class nor ignored.
    pub fn validate(&self, ignore: &BTreeSet<u16>) -> Result<()> {
        match self
            .data
            .iter()
            .find(|&&v| v >= self.num_classes && !ignore.contains(&v))
        {
            Some(&value) => Err(Error::ClassOutOfRange {
                value,
                num_classes: self.num_classes,
            }),
            None => Ok(()),
        }
    }

    /// Sorted set of values present in the map.
    pub fn value_set(&self) -> BTreeSet<u16> {
        self.data.iter().copied().collect()
    }
}

/// Marks which pixels of a companion [`LabelMap`] carry meaningful values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl ValidityMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_len("validity mask", width, height, 1, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn all_valid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
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

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count_valid(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }
}
