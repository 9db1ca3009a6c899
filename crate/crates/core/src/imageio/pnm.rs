//! Binary PNM (P5 grayscale / P6 RGB) codec, maxval 255 only.
//!
//! The canonical header written by [`save_pnm`] is `P5\n<w> <h>\n255\n`
//! (resp. `P6`), so `save(load(bytes))` reproduces canonical files byte for
//! byte. The reader additionally accepts `#` comments and arbitrary
//! whitespace per the PNM spec.

use super::{Image, ImageIoError, Result};
use std::path::Path;

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) -> Result<()> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => return Ok(()),
                None => {
                    return Err(ImageIoError::PnmBadHeader {
                        reason: "unexpected end of header".into(),
                    })
                }
            }
        }
    }

    fn read_u32(&mut self) -> Result<u32> {
        self.skip_space_and_comments()?;
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_digit())
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(ImageIoError::PnmBadHeader {
                reason: "expected integer field".into(),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageIoError::PnmBadHeader {
                reason: "integer field out of range".into(),
            })
    }
}

/// Decode binary PGM/PPM bytes. Byte `v` maps to the pixel value `v/255`.
pub fn load_pnm_bytes(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 {
        return Err(ImageIoError::PnmBadMagic);
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(ImageIoError::PnmBadMagic),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.read_u32()? as usize;
    let height = cur.read_u32()? as usize;
    let maxval = cur.read_u32()?;
    if maxval != 255 {
        return Err(ImageIoError::PnmBadMaxval { maxval });
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(ImageIoError::PnmBadHeader {
                reason: "missing whitespace before raster".into(),
            })
        }
    }
    let expected = width * height * channels;
    let raster = &bytes[cur.pos..];
    if raster.len() < expected {
        return Err(ImageIoError::PnmTruncated {
            expected,
            got: raster.len(),
        });
    }
    // Interleaved raster -> planar buffer.
    let mut pixels = vec![0.0; expected];
    let plane = width * height;
    for i in 0..plane {
        for c in 0..channels {
            pixels[c * plane + i] = raster[i * channels + c] as f64 / 255.0;
        }
    }
    Image::new(width, height, channels, pixels)
}

pub fn load_pnm(path: impl AsRef<Path>) -> Result<Image> {
    load_pnm_bytes(&std::fs::read(path)?)
}

/// Encode as canonical binary PGM/PPM; values quantize by `round(v*255)`
/// (half away from zero).
pub fn save_pnm_bytes(img: &Image) -> Vec<u8> {
    let magic = if img.is_gray() { "P5" } else { "P6" };
    let mut out = format!("{}\n{} {}\n255\n", magic, img.width(), img.height()).into_bytes();
    let plane = img.width() * img.height();
    for i in 0..plane {
        for c in 0..img.channels() {
            out.push((img.pixels()[c * plane + i] * 255.0).round() as u8);
        }
    }
    out
}

pub fn save_pnm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, save_pnm_bytes(img))?;
    Ok(())
}
