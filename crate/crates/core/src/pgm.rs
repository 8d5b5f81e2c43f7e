//! Binary (P5) 8-bit PGM images with pixels held as reals in `[0, 1]`.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major.
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimension(format!("image is {width}×{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_bytes(width: usize, height: usize, raster: &[u8]) -> Result<Self> {
        Self::new(width, height, raster.iter().map(|&b| f64::from(b) / 255.0).collect())
    }

    /// Clamped to `[0, 1]` and rounded to the nearest level.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| quantize(v)).collect()
    }
}

pub fn quantize(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0).round() as u8
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { offset: self.pos, message: message.into() })
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.fail(format!("expected {what}"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        match text.parse() {
            Ok(v) => Ok(v),
            Err(_) => Err(Error::Parse { offset: start, message: format!("{what} out of range") }),
        }
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    if !bytes.starts_with(b"P5") {
        return cur.fail("not a binary PGM (missing P5 magic)");
    }
    cur.pos = 2;
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return cur.fail("expected whitespace after magic");
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_space_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.number("maximum gray value")?;
    if maxval != 255 {
        return Err(Error::Parse {
            offset: maxval_at,
            message: format!("only 8-bit images with maximum gray value 255 are supported (got {maxval})"),
        });
    }
    if width == 0 || height == 0 {
        return cur.fail(format!("empty image {width}×{height}"));
    }
    if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return cur.fail("expected a single whitespace byte before the raster");
    }
    cur.pos += 1;
    let need =
        width.checked_mul(height).ok_or_else(|| Error::Parse { offset: cur.pos, message: "image too large".into() })?;
    let raster = &bytes[cur.pos..];
    if raster.len() < need {
        return cur.fail(format!("raster truncated: expected {need} bytes, found {}", raster.len()));
    }
    GrayImage::from_bytes(width, height, &raster[..need])
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.to_bytes());
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_pgm(&std::fs::read(path)?)
}

pub fn write_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_pgm(image))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_known_bytes() {
        let img = decode_pgm(b"P5\n2 2\n255\n\x00\x55\xaa\xff").unwrap();
        assert_eq!((img.width, img.height), (2, 2));
        assert_eq!(img.pixels, vec![0.0, 85.0 / 255.0, 170.0 / 255.0, 1.0]);
    }

    #[test]
    fn comments_and_whitespace_in_header() {
        let img = decode_pgm(b"P5 # made by hand\n# another\n 3\t1 \n255 \x01\x02\x03").unwrap();
        assert_eq!(img.to_bytes(), vec![1, 2, 3]);
    }

    #[test]
    fn rejects_other_maxval() {
        let err = decode_pgm(b"P5\n2 2\n65535\n\x00\x00").unwrap_err();
        match err {
            Error::Parse { offset, message } => {
                assert_eq!(offset, 7);
                assert!(message.contains("255"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn malformed_headers_report_offsets() {
        let cases: [(&[u8], usize); 5] = [
            (b"P2\n1 1\n255\n0", 0),
            (b"P5\nx 1\n255\n\x00", 3),
            (b"P5\n1\n", 5),
            (b"P5\n2 2\n255\n\x00", 11),
            (b"P5\n1 1\n255", 10),
        ];
        for (bytes, offset) in cases {
            match decode_pgm(bytes) {
                Err(Error::Parse { offset: o, .. }) => assert_eq!(o, offset, "{:?}", String::from_utf8_lossy(bytes)),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn quantization_clamps() {
        assert_eq!(quantize(-0.3), 0);
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(f64::NAN), 0);
        assert_eq!(quantize(0.5), 128);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let img = GrayImage::from_bytes(3, 2, &[0, 10, 20, 200, 254, 255]).unwrap();
        write_pgm(&img, &path).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), img);
    }

    proptest! {
        #[test]
        fn raster_round_trip(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
            let raster: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8).collect();
            let img = GrayImage::from_bytes(w, h, &raster).unwrap();
            let back = decode_pgm(&encode_pgm(&img)).unwrap();
            prop_assert_eq!(back.to_bytes(), raster);
        }
    }
}
