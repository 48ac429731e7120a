use std::fs::File;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use crate::error::{Error, Result};
use crate::frame::{LabelMap, RgbFrame};
use crate::mvc::PatchMask;

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|source| Error::Decode {
        path: path.to_owned(),
        source,
    })
}

/// Reads any PNG/JPEG as 8-bit RGB.
pub fn read_rgb(path: &Path) -> Result<RgbFrame> {
    let img = decode(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    RgbFrame::new(w as usize, h as usize, img.into_raw())
}

/// Reads an 8- or 16-bit single-channel PNG of class indices.
pub fn read_label_png(path: &Path, num_classes: u16) -> Result<LabelMap> {
    let (w, h, data) = match decode(path)? {
        DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            (w, h, img.into_raw().into_iter().map(u16::from).collect())
        }
        DynamicImage::ImageLuma16(img) => {
            let (w, h) = img.dimensions();
            (w, h, img.into_raw())
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "{}: label maps must be single-channel, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    LabelMap::new(w as usize, h as usize, num_classes, data)
}

fn encode_err(path: &Path, e: impl ToString) -> Error {
    Error::Encode {
        path: path.to_owned(),
        reason: e.to_string(),
    }
}

/// Writes class indices as a grayscale PNG: 8-bit when every value fits,
/// 16-bit otherwise.
pub fn write_label_png(path: &Path, labels: &LabelMap) -> Result<()> {
    let (w, h) = (labels.width() as u32, labels.height() as u32);
    let result = if labels.data().iter().all(|&v| v <= 255) {
        let raw: Vec<u8> = labels.data().iter().map(|&v| v as u8).collect();
        ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw)
            .ok_or_else(|| encode_err(path, "buffer size"))?
            .save_with_format(path, ImageFormat::Png)
    } else {
        ImageBuffer::<Luma<u16>, _>::from_raw(w, h, labels.data().to_vec())
            .ok_or_else(|| encode_err(path, "buffer size"))?
            .save_with_format(path, ImageFormat::Png)
    };
    result.map_err(|e| encode_err(path, e))
}

pub fn write_rgb_png(path: &Path, frame: &RgbFrame) -> Result<()> {
    std::fs::write(path, encode_rgb_png(frame)?).map_err(|e| Error::io(path, e))
}

/// In-memory PNG encoding of an RGB frame.
pub fn encode_rgb_png(frame: &RgbFrame) -> Result<Vec<u8>> {
    let img = ImageBuffer::<Rgb<u8>, _>::from_raw(
        frame.width() as u32,
        frame.height() as u32,
        frame.data().to_vec(),
    )
    .ok_or_else(|| encode_err(Path::new("<memory>"), "buffer size"))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| encode_err(Path::new("<memory>"), e))?;
    Ok(out.into_inner())
}

/// Pixel-expanded mask as a 1-bit grayscale PNG: white = kept.
pub fn write_mask_png(path: &Path, mask: &PatchMask) -> Result<()> {
    let (w, h) = (mask.width(), mask.height());
    let stride = w.div_ceil(8);
    let mut packed = vec![0u8; stride * h];
    for (i, kept) in mask.expand().into_iter().enumerate() {
        if kept {
            let (x, y) = (i % w, i / w);
            packed[y * stride + x / 8] |= 0x80 >> (x % 8);
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::One);
    let mut writer = enc.write_header().map_err(|e| encode_err(path, e))?;
    writer.write_image_data(&packed).map_err(|e| encode_err(path, e))?;
    writer.finish().map_err(|e| encode_err(path, e))
}
