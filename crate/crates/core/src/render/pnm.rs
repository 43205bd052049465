//! Binary portable bitmap (P4) and graymap (P5) encoding.

use std::path::Path;

use crate::error::RenderError;

use super::image::{BinaryImage, InkParams, MeanImage, Resolution};

pub fn encode_pbm(img: &BinaryImage) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let mut out = format!("P4\n{w} {h}\n").into_bytes();
    let row_bytes = w.div_ceil(8);
    for y in 0..h {
        let mut row = vec![0u8; row_bytes];
        for x in 0..w {
            if img.get(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

pub fn decode_pbm(bytes: &[u8]) -> Result<BinaryImage, RenderError> {
    let (header, body) = parse_header(bytes, b"P4", false)?;
    let (w, h) = (header[0], header[1]);
    let row_bytes = w.div_ceil(8);
    if body.len() < row_bytes * h {
        return Err(RenderError::Format(format!("expected {} data bytes, found {}", row_bytes * h, body.len())));
    }
    Ok(BinaryImage::from_fn(Resolution::new(w, h), |x, y| body[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0))
}

pub fn encode_pgm(m: &MeanImage) -> Vec<u8> {
    let res = m.resolution();
    let mut out = format!("P5\n{} {}\n255\n", res.width, res.height).into_bytes();
    out.extend(m.probs().iter().map(|p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

/// Decodes a graymap as probabilities `value / 255`, clamped to the noise
/// floor of `ink`.
pub fn decode_pgm(bytes: &[u8], ink: &InkParams) -> Result<MeanImage, RenderError> {
    let (header, body) = parse_header(bytes, b"P5", true)?;
    let (w, h, maxval) = (header[0], header[1], header[2]);
    if maxval != 255 {
        return Err(RenderError::Format(format!("unsupported maxval {maxval}")));
    }
    if body.len() < w * h {
        return Err(RenderError::Format(format!("expected {} data bytes, found {}", w * h, body.len())));
    }
    let probs = body[..w * h].iter().map(|&v| v as f64 / 255.0).collect();
    MeanImage::from_probs(Resolution::new(w, h), probs, ink)
}

/// Parses magic, whitespace-separated numbers and comments, returning the
/// numbers and the raster bytes after the single whitespace that ends the
/// header.
fn parse_header<'a>(bytes: &'a [u8], magic: &[u8], with_maxval: bool) -> Result<(Vec<usize>, &'a [u8]), RenderError> {
    if !bytes.starts_with(magic) {
        return Err(RenderError::Format(format!("missing {} magic", String::from_utf8_lossy(magic))));
    }
    let wanted = if with_maxval { 3 } else { 2 };
    let mut values = Vec::with_capacity(wanted);
    let mut i = magic.len();
    while values.len() < wanted {
        match bytes.get(i) {
            None => return Err(RenderError::Format("truncated header".into())),
            Some(b'#') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            Some(c) if c.is_ascii_whitespace() => i += 1,
            Some(c) if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let text = std::str::from_utf8(&bytes[start..i]).expect("ascii digits");
                values.push(text.parse().map_err(|_| RenderError::Format(format!("bad number {text}")))?);
            }
            Some(c) => return Err(RenderError::Format(format!("unexpected byte {c:#x} in header"))),
        }
    }
    match bytes.get(i) {
        Some(c) if c.is_ascii_whitespace() => Ok((values, &bytes[i + 1..])),
        _ => Err(RenderError::Format("header must end with whitespace".into())),
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RenderError + '_ {
    move |source| RenderError::File { path: path.to_path_buf(), source }
}

pub fn write_pbm(path: &Path, img: &BinaryImage) -> Result<(), RenderError> {
    std::fs::write(path, encode_pbm(img)).map_err(io(path))
}

pub fn read_pbm(path: &Path) -> Result<BinaryImage, RenderError> {
    decode_pbm(&std::fs::read(path).map_err(io(path))?)
}

pub fn write_pgm(path: &Path, m: &MeanImage) -> Result<(), RenderError> {
    std::fs::write(path, encode_pgm(m)).map_err(io(path))
}

pub fn read_pgm(path: &Path, ink: &InkParams) -> Result<MeanImage, RenderError> {
    decode_pgm(&std::fs::read(path).map_err(io(path))?, ink)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pbm_round_trip_odd_width() {
        let img = BinaryImage::from_fn(Resolution::new(13, 5), |x, y| (x * 7 + y * 3) % 5 == 0);
        let bytes = encode_pbm(&img);
        let back = decode_pbm(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(encode_pbm(&back), bytes);
    }

    #[test]
    fn pgm_round_trip_is_bit_exact() {
        let ink = InkParams::default();
        let probs = (0..60).map(|i| i as f64 / 59.0).collect();
        let m = MeanImage::from_probs(Resolution::new(10, 6), probs, &ink).unwrap();
        let bytes = encode_pgm(&m);
        let back = decode_pgm(&bytes, &ink).unwrap();
        assert_eq!(encode_pgm(&back), bytes);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P4\n# made by hand\n8 1\n".to_vec();
        bytes.push(0b1000_0001);
        let img = decode_pbm(&bytes).unwrap();
        assert!(img.get(0, 0) && img.get(7, 0) && !img.get(1, 0));
    }

    #[test]
    fn malformed_inputs() {
        assert!(decode_pbm(b"P5\n1 1\n").is_err());
        assert!(decode_pbm(b"P4\n8 2\n\x00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n65535\n\x00\x00", &InkParams::default()).is_err());
    }
}
