//! Image loading (PGM P2/P5, 8-bit grayscale PNG) and the binary field cache.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::ScalarField;
use crate::{Error, Real, Result};

/// Magic prefix of the cached field format.
pub const FIELD_MAGIC: &[u8; 8] = b"HAMFLD01";

const PNG_SIGNATURE: &[u8] = &[0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

/// Loads a grayscale image as a landscape with intensities in `[0, 255]`.
/// Row 0 is the top image row.
pub fn load_scalar_field<T: Real>(path: impl AsRef<Path>) -> Result<ScalarField<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub(crate) fn decode_image<T: Real>(bytes: &[u8]) -> Result<ScalarField<T>> {
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(FIELD_MAGIC) {
        decode_field_binary(bytes)
    } else {
        Err(Error::Format("not a PGM (P2/P5) or PNG file".into()))
    }
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("PGM: missing or malformed {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("PGM: {what} out of range")))
    }
}

fn decode_pgm<T: Real>(bytes: &[u8]) -> Result<ScalarField<T>> {
    let binary = bytes[1] == b'5';
    let mut cur = PgmCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM: invalid maxval {maxval}")));
    }
    if width == 0 || height == 0 || width < 2 || height < 2 {
        return Err(Error::DegenerateImage { width, height });
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("PGM: dimensions overflow".into()))?;

    let raw: Vec<u32> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(Error::Format("PGM: truncated header".into()));
        }
        let data = &bytes[cur.pos + 1..];
        let bpp = if maxval > 255 { 2 } else { 1 };
        if data.len() < n * bpp {
            return Err(Error::Format(format!(
                "PGM: raster has {} bytes, expected {}",
                data.len(),
                n * bpp
            )));
        }
        if bpp == 1 {
            data[..n].iter().map(|&b| b as u32).collect()
        } else {
            data[..2 * n].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).collect()
        }
    } else {
        (0..n)
            .map(|_| cur.number("pixel").map(|v| v as u32))
            .collect::<Result<_>>()?
    };
    if raw.iter().any(|&v| v as usize > maxval) {
        return Err(Error::Format("PGM: pixel exceeds maxval".into()));
    }
    let scale = 255.0 / maxval as f64;
    let values = raw
        .into_iter()
        .map(|v| if maxval == 255 { T::of(v as f64) } else { T::of(v as f64 * scale) })
        .collect();
    ScalarField::new(width, height, values)
}

fn decode_png<T: Real>(bytes: &[u8]) -> Result<ScalarField<T>> {
    use image::{DynamicImage, ImageFormat};
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::Format(format!("PNG: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w < 2 || h < 2 {
        return Err(Error::DegenerateImage { width: w, height: h });
    }
    let values = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| T::of(v as f64)).collect(),
        DynamicImage::ImageLuma16(g) => g
            .into_raw()
            .into_iter()
            .map(|v| T::of(v as f64 * 255.0 / 65535.0))
            .collect(),
        other => {
            return Err(Error::Format(format!(
                "PNG: only grayscale images are supported, got {:?}",
                other.color()
            )))
        }
    };
    ScalarField::new(w, h, values)
}

fn decode_field_binary<T: Real>(bytes: &[u8]) -> Result<ScalarField<T>> {
    if bytes.len() < 16 {
        return Err(Error::Format("field cache: truncated header".into()));
    }
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != width * height * 8 {
        return Err(Error::Format(format!(
            "field cache: {} payload bytes for {width}x{height}",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    ScalarField::new(width, height, values)
}

/// Reads a field written by [`write_field_binary`].
pub fn read_field_binary<T: Real>(path: impl AsRef<Path>) -> Result<ScalarField<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if !bytes.starts_with(FIELD_MAGIC) {
        return Err(Error::Format("field cache: bad magic".into()));
    }
    decode_field_binary(&bytes)
}

/// Little-endian cache: 8-byte magic, `u32` width, `u32` height, `f64` values row-major.
pub fn encode_field_binary<T: Real>(field: &ScalarField<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * field.values().len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(field.width() as u32).to_le_bytes());
    out.extend_from_slice(&(field.height() as u32).to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

pub fn write_field_binary<T: Real>(field: &ScalarField<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_field_binary(field)).map_err(|e| Error::io(path, e))
}

fn to_bytes<T: Real>(field: &ScalarField<T>) -> Vec<u8> {
    field
        .values()
        .iter()
        .map(|v| v.as_f64().round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Writes a binary PGM (P5), rounding and clamping to `[0, 255]`.
pub fn write_pgm<T: Real>(field: &ScalarField<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write!(buf, "P5\n{} {}\n255\n", field.width(), field.height()).expect("in-memory write");
    buf.extend(to_bytes(field));
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes an 8-bit grayscale PNG, rounding and clamping to `[0, 255]`.
pub fn write_png<T: Real>(field: &ScalarField<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = image::GrayImage::from_raw(field.width() as u32, field.height() as u32, to_bytes(field))
        .expect("buffer matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("PNG encode: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_pgm_direct_copy() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 128, 64]);
        let f: ScalarField<f64> = decode_image(&bytes).unwrap();
        assert_eq!(f.values(), &[0.0, 255.0, 128.0, 64.0]);
    }

    #[test]
    fn ascii_pgm_with_comments() {
        let text = b"P2\n# made by hand\n2 2\n# max\n255\n0 255\n128 64\n";
        let f: ScalarField<f64> = decode_image(text).unwrap();
        assert_eq!(f.values(), &[0.0, 255.0, 128.0, 64.0]);
    }

    #[test]
    fn maxval_rescales_to_255() {
        let f: ScalarField<f64> = decode_image(b"P2 2 2 15 0 15 5 10").unwrap();
        assert_eq!(f.values(), &[0.0, 255.0, 85.0, 170.0]);
    }

    #[test]
    fn truncated_header_is_corrupt() {
        for bad in [&b"P5\n2"[..], b"P5\n2 2\n", b"P2 2", b"P5\n2 2\n255\n\x00\x01"] {
            let err = decode_image::<f64>(bad).unwrap_err();
            assert!(matches!(err, Error::Format(_)), "{err:?}");
            assert!(err.to_string().contains("unsupported/corrupt format"));
        }
        assert!(matches!(decode_image::<f64>(b"GIF89a"), Err(Error::Format(_))));
    }

    #[test]
    fn one_pixel_wide_image_is_degenerate() {
        let mut bytes = b"P5\n1 5\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5]);
        assert!(matches!(
            decode_image::<f64>(&bytes),
            Err(Error::DegenerateImage { width: 1, height: 5 })
        ));
    }

    #[test]
    fn png_and_pgm_writers_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = ScalarField::from_fn(5, 3, |x, y| (x * 40 + y * 7) as f64).unwrap();
        let png = dir.path().join("f.png");
        write_png(&f, &png).unwrap();
        assert_eq!(load_scalar_field::<f64>(&png).unwrap(), f);
        let pgm = dir.path().join("f.pgm");
        write_pgm(&f, &pgm).unwrap();
        assert_eq!(load_scalar_field::<f64>(&pgm).unwrap(), f);
    }

    #[test]
    fn field_cache_layout() {
        let f = ScalarField::from_fn(3, 2, |x, y| x as f64 * 0.5 - y as f64).unwrap();
        let bytes = encode_field_binary(&f);
        assert_eq!(&bytes[..8], FIELD_MAGIC);
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 6 * 8);
        assert_eq!(decode_field_binary::<f64>(&bytes).unwrap(), f);
        assert!(decode_field_binary::<f64>(&bytes[..20]).is_err());
    }
}
