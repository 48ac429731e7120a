//! Middlebury `.flo`: magic `202021.25f32` ("PIEH"), `i32` width, `i32`
//! height, then row-major interleaved `(dx, dy)` as `f32`, all little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;
const HEADER_LEN: usize = 12;

pub fn encode_flow(flow: &FlowField<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * flow.data().len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for [dx, dy] in flow.data() {
        out.extend_from_slice(&dx.to_le_bytes());
        out.extend_from_slice(&dy.to_le_bytes());
    }
    out
}

/// `path` only labels errors.
pub fn decode_flow(bytes: &[u8], path: &Path) -> Result<FlowField<f32>> {
    let fail = |reason: String| Error::FlowFormat {
        path: path.to_owned(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(fail(format!("{} bytes is shorter than the header", bytes.len())));
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    let magic = f32::from_le_bytes(word(0));
    if magic.to_bits() != FLO_MAGIC.to_bits() {
        return Err(fail(format!("bad magic {magic}")));
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width < 0 || height < 0 {
        return Err(fail(format!("negative size {width}x{height}")));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| fail("size overflows".into()))?;
    if bytes.len() != expected {
        return Err(fail(format!(
            "expected {expected} bytes for {width}x{height}, found {}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            ]
        })
        .collect();
    FlowField::new(width, height, data).map_err(|e| fail(e.to_string()))
}

pub fn write_flow(path: &Path, flow: &FlowField<f32>) -> Result<()> {
    std::fs::write(path, encode_flow(flow)).map_err(|e| Error::io(path, e))
}

pub fn read_flow(path: &Path) -> Result<FlowField<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flow(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_byte_layout() {
        let f = FlowField::new(2, 1, vec![[1.5, -2.0], [0.0, 0.0]]).unwrap();
        let bytes = encode_flow(&f);
        let expected: [u8; 28] = [
            b'P', b'I', b'E', b'H', // magic
            2, 0, 0, 0, // width
            1, 0, 0, 0, // height
            0x00, 0x00, 0xc0, 0x3f, // 1.5
            0x00, 0x00, 0x00, 0xc0, // -2.0
            0, 0, 0, 0, 0, 0, 0, 0,
        ];
        assert_eq!(bytes, expected);
        assert_eq!(decode_flow(&bytes, Path::new("x")).unwrap(), f);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let f = FlowField::new(2, 1, vec![[1.5, -2.0], [0.0, 0.0]]).unwrap();
        let mut bytes = encode_flow(&f);
        assert!(matches!(
            decode_flow(&bytes[..27], Path::new("t.flo")),
            Err(Error::FlowFormat { .. })
        ));
        assert!(decode_flow(&bytes[..5], Path::new("t.flo")).is_err());
        bytes[0] = b'X';
        assert!(matches!(decode_flow(&bytes, Path::new("m.flo")), Err(Error::FlowFormat { .. })));
    }

    #[test]
    fn nan_payload_rejected() {
        let f = FlowField::new(1, 1, vec![[0.0, 0.0]]).unwrap();
        let mut bytes = encode_flow(&f);
        bytes[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode_flow(&bytes, Path::new("n.flo")).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.flo");
        let f = FlowField::new(3, 2, (0..6).map(|i| [i as f32 * 0.25, -(i as f32)]).collect()).unwrap();
        write_flow(&p, &f).unwrap();
        assert_eq!(read_flow(&p).unwrap(), f);
    }
}
