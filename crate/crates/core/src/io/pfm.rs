//! Grayscale Portable Float Map.
//!
//! Header `Pf`, `width height`, scale (negative = little-endian), each followed
//! by a single whitespace byte, then `width·height` 32-bit floats stored bottom
//! row first. Depths are written as f32; invalid pixels are written as 0.0 and
//! anything non-finite or ≤ 0 reads back as invalid.

use crate::error::{Error, Result};
use crate::grid::DepthMap;

pub fn write_pfm(depth: &DepthMap) -> Vec<u8> {
    let samples: Vec<f32> = depth
        .values()
        .iter()
        .map(|&v| {
            if DepthMap::is_valid_value(v) {
                v as f32
            } else {
                0.0
            }
        })
        .collect();
    write_pfm_raw(depth.width(), depth.height(), &samples)
}

/// Writes arbitrary f32 samples (row-major, top row first) without any
/// validity mapping.
pub fn write_pfm_raw(width: usize, height: usize, samples: &[f32]) -> Vec<u8> {
    assert_eq!(samples.len(), width * height, "sample count");
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(samples.len() * 4);
    for row in samples.chunks(width).rev() {
        for s in row {
            out.extend_from_slice(&s.to_le_bytes());
        }
    }
    out
}

struct Header {
    width: usize,
    height: usize,
    little_endian: bool,
    data_offset: usize,
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Result<(usize, String)> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::parse(
            format!("byte {start}"),
            "unexpected end of PFM header",
        ));
    }
    let tok = std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| Error::parse(format!("byte {start}"), "non-ASCII PFM header"))?;
    Ok((start, tok.to_string()))
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let (at, id) = next_token(bytes, &mut pos)?;
    match id.as_str() {
        "Pf" => {}
        "PF" => {
            return Err(Error::parse(
                format!("byte {at}"),
                "colour PFM (PF) is not a depth map; expected Pf",
            ))
        }
        other => {
            return Err(Error::parse(
                format!("byte {at}"),
                format!("bad PFM identifier '{other}'"),
            ))
        }
    }
    let mut dim = |name: &str| -> Result<usize> {
        let (at, tok) = next_token(bytes, &mut pos)?;
        match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(Error::parse(
                format!("byte {at}"),
                format!("bad PFM {name} '{tok}'"),
            )),
        }
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let (at, tok) = next_token(bytes, &mut pos)?;
    let scale: f64 = tok
        .parse()
        .map_err(|_| Error::parse(format!("byte {at}"), format!("bad PFM scale '{tok}'")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::parse(
            format!("byte {at}"),
            format!("PFM scale must be finite and non-zero, got '{tok}'"),
        ));
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::parse(
            format!("byte {pos}"),
            "missing whitespace after PFM scale",
        ));
    }
    Ok(Header {
        width,
        height,
        little_endian: scale < 0.0,
        data_offset: pos + 1,
    })
}

pub fn read_pfm(bytes: &[u8]) -> Result<DepthMap> {
    let h = parse_header(bytes)?;
    let n = h
        .width
        .checked_mul(h.height)
        .ok_or_else(|| Error::parse("header", "PFM dimensions overflow"))?;
    let payload = &bytes[h.data_offset..];
    if payload.len() < n * 4 {
        return Err(Error::parse(
            format!("byte {}", h.data_offset + payload.len()),
            format!(
                "truncated PFM payload: {} floats for a {}x{} map",
                payload.len() / 4,
                h.width,
                h.height
            ),
        ));
    }
    let mut values = vec![0.0f64; n];
    for (file_row, chunk) in payload[..n * 4].chunks_exact(h.width * 4).enumerate() {
        let y = h.height - 1 - file_row;
        for (x, b) in chunk.chunks_exact(4).enumerate() {
            let raw = [b[0], b[1], b[2], b[3]];
            let v = if h.little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            } as f64;
            values[y * h.width + x] = if DepthMap::is_valid_value(v) {
                v
            } else {
                f64::NAN
            };
        }
    }
    DepthMap::new(h.width, h.height, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_pixel_golden_bytes() {
        let d = DepthMap::filled(1, 1, 8.0);
        let bytes = write_pfm(&d);
        let mut expected = b"Pf\n1 1\n-1.0\n".to_vec();
        // 8.0f32 = 0x41000000, little-endian
        expected.extend_from_slice(&[0x00, 0x00, 0x00, 0x41]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn rows_stored_bottom_to_top() {
        let d = DepthMap::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let bytes = write_pfm(&d);
        let payload = &bytes[b"Pf\n2 2\n-1.0\n".len()..];
        let floats: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        assert_eq!(floats, vec![3.0, 4.0, 1.0, 2.0]);
        assert_eq!(read_pfm(&bytes).unwrap(), d);
    }

    #[test]
    fn big_endian_input() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        bytes.extend_from_slice(&(-1.0f32).to_be_bytes());
        let d = read_pfm(&bytes).unwrap();
        assert_eq!(d.get(0, 0), 2.5);
        assert!(!d.is_valid(1, 0));
    }

    #[test]
    fn invalid_written_as_zero() {
        let d = DepthMap::new(3, 1, vec![1.0, f64::NAN, -4.0]).unwrap();
        let bytes = write_pfm(&d);
        let tail = &bytes[bytes.len() - 8..];
        assert_eq!(tail, &[0u8; 8]);
        assert_eq!(
            read_pfm(&bytes).unwrap().valid_mask(),
            vec![true, false, false]
        );
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = b"Pf\n4 4\n-1.0\n".to_vec();
        bytes.extend(std::iter::repeat_n(0u8, 15 * 4));
        let err = read_pfm(&bytes).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn malformed_headers() {
        for h in [
            &b"P5\n1 1\n-1.0\n\0\0\0\0"[..],
            b"PF\n1 1\n-1.0\n\0\0\0\0",
            b"Pf\n1 x\n-1.0\n\0\0\0\0",
            b"Pf\n0 1\n-1.0\n",
            b"Pf\n1 1\n0.0\n\0\0\0\0",
            b"Pf\n1 1\n",
            b"",
        ] {
            assert!(
                matches!(read_pfm(h), Err(Error::Parse { .. })),
                "{:?}",
                String::from_utf8_lossy(h)
            );
        }
    }

    proptest! {
        #[test]
        fn round_trip_preserves_f32_values_and_mask(
            w in 1usize..9, h in 1usize..9,
            seed in proptest::collection::vec((0.001f64..1e4, any::<bool>()), 64)
        ) {
            let vals: Vec<f64> = (0..w * h)
                .map(|i| { let (v, ok) = seed[i]; if ok { v } else { f64::NAN } })
                .collect();
            let d = DepthMap::new(w, h, vals).unwrap();
            let back = read_pfm(&write_pfm(&d)).unwrap();
            prop_assert_eq!(back.valid_mask(), d.valid_mask());
            for (a, b) in back.values().iter().zip(d.values()) {
                if DepthMap::is_valid_value(*b) {
                    prop_assert_eq!(*a, (*b as f32) as f64);
                }
            }
        }
    }
}
