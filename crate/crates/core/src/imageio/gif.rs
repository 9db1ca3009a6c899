//! GIF87a/89a decoding: LZW decompression, frame compositing per disposal
//! semantics, interlacing and transparency. Read-only; the style corpus this
//! crate ingests ships as animated GIF galleries.

use super::{Image, ImageIoError, Result};
use std::path::Path;

// Disposal 0 (unspecified) and 1 (do not dispose) both keep the canvas as
// drawn; only 2 (restore background) and 3 (restore previous) act.
#[cfg(test)]
const DISPOSAL_NONE: u8 = 1;
const DISPOSAL_BACKGROUND: u8 = 2;
const DISPOSAL_PREVIOUS: u8 = 3;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u8(&mut self, context: &'static str) -> Result<u8> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or(ImageIoError::GifTruncated { context })?;
        self.pos += 1;
        Ok(b)
    }

    fn u16le(&mut self, context: &'static str) -> Result<u16> {
        let lo = self.u8(context)? as u16;
        let hi = self.u8(context)? as u16;
        Ok(lo | (hi << 8))
    }

    fn take(&mut self, n: usize, context: &'static str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(ImageIoError::GifTruncated { context });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Concatenate data sub-blocks up to the 0x00 terminator.
    fn sub_blocks(&mut self, context: &'static str) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        loop {
            let len = self.u8(context)? as usize;
            if len == 0 {
                return Ok(out);
            }
            out.extend_from_slice(self.take(len, context)?);
        }
    }

    fn skip_sub_blocks(&mut self, context: &'static str) -> Result<()> {
        loop {
            let len = self.u8(context)? as usize;
            if len == 0 {
                return Ok(());
            }
            self.take(len, context)?;
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Gce {
    disposal: u8,
    transparent: Option<u8>,
}

fn read_color_table(r: &mut Reader, size_field: u8) -> Result<Vec<[u8; 3]>> {
    let n = 2usize << size_field;
    let raw = r.take(3 * n, "color table")?;
    Ok(raw.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// LZW decompression of one image's pixel indices.
fn lzw_decode(min_code_size: u8, data: &[u8], expected: usize) -> Result<Vec<u8>> {
    if !(2..=11).contains(&min_code_size) {
        return Err(ImageIoError::GifCorruptLzw {
            reason: format!("bad minimum code size {min_code_size}"),
        });
    }
    let clear = 1u16 << min_code_size;
    let eoi = clear + 1;
    const MAX_CODES: usize = 4096;
    // Dictionary entry = (prefix code, appended byte); literals are implicit.
    let mut prefix = vec![0u16; MAX_CODES];
    let mut suffix = vec![0u8; MAX_CODES];
    let mut first_byte = vec![0u8; MAX_CODES];
    for c in 0..clear {
        suffix[c as usize] = c as u8;
        first_byte[c as usize] = c as u8;
    }

    let mut out = Vec::with_capacity(expected);
    let mut code_size = min_code_size as u32 + 1;
    let mut next_code = eoi + 1;
    let mut prev: Option<u16> = None;
    let mut acc: u32 = 0;
    let mut acc_bits: u32 = 0;
    let mut byte_pos = 0usize;
    let mut stack = Vec::with_capacity(MAX_CODES);

    let emit = |code: u16, stack: &mut Vec<u8>, out: &mut Vec<u8>, prefix: &[u16], suffix: &[u8]| {
        let mut c = code;
        stack.clear();
        while c >= clear {
            stack.push(suffix[c as usize]);
            c = prefix[c as usize];
        }
        stack.push(suffix[c as usize]);
        out.extend(stack.iter().rev());
    };

    'outer: loop {
        while acc_bits < code_size {
            if byte_pos >= data.len() {
                if out.len() >= expected {
                    break 'outer;
                }
                return Err(ImageIoError::GifCorruptLzw {
                    reason: "bitstream exhausted before raster complete".into(),
                });
            }
            acc |= (data[byte_pos] as u32) << acc_bits;
            acc_bits += 8;
            byte_pos += 1;
        }
        let code = (acc & ((1 << code_size) - 1)) as u16;
        acc >>= code_size;
        acc_bits -= code_size;

        if code == clear {
            code_size = min_code_size as u32 + 1;
            next_code = eoi + 1;
            prev = None;
            continue;
        }
        if code == eoi {
            break;
        }

        match prev {
            None => {
                // First code after a clear must be a literal.
                if code >= clear {
                    return Err(ImageIoError::GifCorruptLzw {
                        reason: format!("non-literal code {code} after clear"),
                    });
                }
                out.push(code as u8);
            }
            Some(p) => {
                if code < next_code {
                    // Known sequence: record p + first(code), then emit it.
                    if next_code < MAX_CODES as u16 {
                        prefix[next_code as usize] = p;
                        suffix[next_code as usize] = first_byte[code as usize];
                        first_byte[next_code as usize] = first_byte[p as usize];
                        next_code += 1;
                        if next_code == (1 << code_size) && code_size < 12 {
                            code_size += 1;
                        }
                    }
                    emit(code, &mut stack, &mut out, &prefix, &suffix);
                } else if code == next_code && next_code < MAX_CODES as u16 {
                    // KwKwK: the new entry is p + first(p) and is emitted
                    // immediately.
                    prefix[next_code as usize] = p;
                    suffix[next_code as usize] = first_byte[p as usize];
                    first_byte[next_code as usize] = first_byte[p as usize];
                    next_code += 1;
                    if next_code == (1 << code_size) && code_size < 12 {
                        code_size += 1;
                    }
                    emit(code, &mut stack, &mut out, &prefix, &suffix);
                } else {
                    return Err(ImageIoError::GifCorruptLzw {
                        reason: format!("code {code} out of range (next {next_code})"),
                    });
                }
            }
        }
        prev = Some(code);

        if out.len() >= expected {
            break;
        }
    }

    if out.len() < expected {
        return Err(ImageIoError::GifCorruptLzw {
            reason: format!("raster incomplete: {} of {expected} pixels", out.len()),
        });
    }
    out.truncate(expected);
    Ok(out)
}

/// Row order of a (possibly interlaced) GIF image.
fn row_order(h: usize, interlaced: bool) -> Vec<usize> {
    if !interlaced {
        return (0..h).collect();
    }
    let mut rows = Vec::with_capacity(h);
    for (start, step) in [(0, 8), (4, 8), (2, 4), (1, 2)] {
        let mut y = start;
        while y < h {
            rows.push(y);
            y += step;
        }
    }
    rows
}

/// Decode every frame of a GIF, composited onto the logical screen.
///
/// Disposal methods 0/1 leave the canvas as drawn, method 2 restores the
/// frame's region to the background color, and method 3 (restore previous)
/// is rejected loudly rather than guessed.
pub fn decode_gif_frames_bytes(bytes: &[u8]) -> Result<Vec<Image>> {
    if bytes.len() < 6 || (&bytes[..6] != b"GIF87a" && &bytes[..6] != b"GIF89a") {
        return Err(ImageIoError::GifBadMagic);
    }
    let mut r = Reader { bytes, pos: 6 };
    let width = r.u16le("logical screen descriptor")? as usize;
    let height = r.u16le("logical screen descriptor")? as usize;
    let packed = r.u8("logical screen descriptor")?;
    let bg_index = r.u8("logical screen descriptor")?;
    let _aspect = r.u8("logical screen descriptor")?;
    let global_table = if packed & 0x80 != 0 {
        Some(read_color_table(&mut r, packed & 0x07)?)
    } else {
        None
    };

    let background: [u8; 3] = global_table
        .as_ref()
        .and_then(|t| t.get(bg_index as usize).copied())
        .unwrap_or([0, 0, 0]);

    let mut canvas: Vec<[u8; 3]> = vec![background; width * height];
    let mut frames: Vec<Image> = Vec::new();
    let mut pending_gce = Gce::default();

    loop {
        let introducer = match r.u8("block introducer") {
            Ok(b) => b,
            Err(_) => return Err(ImageIoError::GifMissingTrailer),
        };
        match introducer {
            0x3B => break,
            0x21 => {
                let label = r.u8("extension label")?;
                if label == 0xF9 {
                    let data = r.sub_blocks("graphic control extension")?;
                    if data.len() >= 4 {
                        let p = data[0];
                        pending_gce = Gce {
                            disposal: (p >> 2) & 0x07,
                            transparent: if p & 0x01 != 0 { Some(data[3]) } else { None },
                        };
                    }
                } else {
                    r.skip_sub_blocks("extension data")?;
                }
            }
            0x2C => {
                let left = r.u16le("image descriptor")? as usize;
                let top = r.u16le("image descriptor")? as usize;
                let fw = r.u16le("image descriptor")? as usize;
                let fh = r.u16le("image descriptor")? as usize;
                let ipacked = r.u8("image descriptor")?;
                let local_table = if ipacked & 0x80 != 0 {
                    Some(read_color_table(&mut r, ipacked & 0x07)?)
                } else {
                    None
                };
                let interlaced = ipacked & 0x40 != 0;
                let palette = local_table
                    .as_ref()
                    .or(global_table.as_ref())
                    .ok_or_else(|| ImageIoError::GifCorruptLzw {
                        reason: "image without any color table".into(),
                    })?;

                let min_code_size = r.u8("LZW minimum code size")?;
                let data = r.sub_blocks("image data")?;
                let indices = lzw_decode(min_code_size, &data, fw * fh)?;

                if pending_gce.disposal == DISPOSAL_PREVIOUS {
                    return Err(ImageIoError::GifUnsupportedDisposal);
                }

                for (row_i, &y) in row_order(fh, interlaced).iter().enumerate() {
                    let cy = top + y;
                    if cy >= height {
                        continue;
                    }
                    for x in 0..fw {
                        let cx = left + x;
                        if cx >= width {
                            continue;
                        }
                        let idx = indices[row_i * fw + x];
                        if pending_gce.transparent == Some(idx) {
                            continue;
                        }
                        canvas[cy * width + cx] =
                            palette.get(idx as usize).copied().unwrap_or([0, 0, 0]);
                    }
                }

                // Snapshot the composited logical screen as an RGB frame.
                let mut pixels = vec![0.0; 3 * width * height];
                let plane = width * height;
                for (i, rgb) in canvas.iter().enumerate() {
                    for c in 0..3 {
                        pixels[c * plane + i] = rgb[c] as f64 / 255.0;
                    }
                }
                frames.push(Image::new(width, height, 3, pixels)?);

                // Methods 0 and DISPOSAL_NONE keep the canvas as drawn.
                if pending_gce.disposal == DISPOSAL_BACKGROUND {
                    for y in top..(top + fh).min(height) {
                        for x in left..(left + fw).min(width) {
                            canvas[y * width + x] = background;
                        }
                    }
                }
                pending_gce = Gce::default();
            }
            other => {
                return Err(ImageIoError::GifCorruptLzw {
                    reason: format!("unknown block introducer 0x{other:02X}"),
                })
            }
        }
    }

    if frames.is_empty() {
        return Err(ImageIoError::GifNoFrames);
    }
    Ok(frames)
}

pub fn decode_gif_frames(path: impl AsRef<Path>) -> Result<Vec<Image>> {
    decode_gif_frames_bytes(&std::fs::read(path)?)
}

/// Minimal GIF **encoder** used by tests as an independent oracle for the
/// decoder. It emits a clear code before every pixel code, so the code width
/// never grows and no compression logic is shared with the decode path.
#[doc(hidden)]
pub mod oracle {
    /// One frame: raster of palette indices placed at (left, top), with
    /// optional disposal method and transparent index.
    pub struct OracleFrame {
        pub left: u16,
        pub top: u16,
        pub width: u16,
        pub height: u16,
        pub indices: Vec<u8>,
        pub disposal: u8,
        pub transparent: Option<u8>,
    }

    impl OracleFrame {
        pub fn full(width: u16, height: u16, indices: Vec<u8>) -> Self {
            Self {
                left: 0,
                top: 0,
                width,
                height,
                indices,
                disposal: 0,
                transparent: None,
            }
        }
    }

    struct BitWriter {
        out: Vec<u8>,
        acc: u32,
        bits: u32,
    }

    impl BitWriter {
        fn push(&mut self, code: u16, width: u32) {
            self.acc |= (code as u32) << self.bits;
            self.bits += width;
            while self.bits >= 8 {
                self.out.push((self.acc & 0xFF) as u8);
                self.acc >>= 8;
                self.bits -= 8;
            }
        }

        fn finish(mut self) -> Vec<u8> {
            if self.bits > 0 {
                self.out.push((self.acc & 0xFF) as u8);
            }
            self.out
        }
    }

    /// Encode a GIF89a with the given palette (padded to a power of two) and
    /// frames of palette indices.
    pub fn encode_gif(
        width: u16,
        height: u16,
        palette: &[[u8; 3]],
        bg_index: u8,
        frames: &[OracleFrame],
    ) -> Vec<u8> {
        let mut size_field = 0u8;
        while (2usize << size_field) < palette.len().max(2) {
            size_field += 1;
        }
        let table_len = 2usize << size_field;

        let mut out = b"GIF89a".to_vec();
        out.extend_from_slice(&width.to_le_bytes());
        out.extend_from_slice(&height.to_le_bytes());
        out.push(0x80 | size_field); // global color table present
        out.push(bg_index);
        out.push(0); // aspect
        for i in 0..table_len {
            let rgb = palette.get(i).copied().unwrap_or([0, 0, 0]);
            out.extend_from_slice(&rgb);
        }

        // Literal codes must exceed the palette's bit width.
        let mut min_code = 2u8;
        while (1usize << min_code) < table_len {
            min_code += 1;
        }
        let clear = 1u16 << min_code;
        let eoi = clear + 1;
        let code_width = min_code as u32 + 1;

        for f in frames {
            if f.disposal != 0 || f.transparent.is_some() {
                out.extend_from_slice(&[0x21, 0xF9, 4]);
                let packed = (f.disposal << 2) | u8::from(f.transparent.is_some());
                out.push(packed);
                out.extend_from_slice(&[0, 0]); // delay
                out.push(f.transparent.unwrap_or(0));
                out.push(0);
            }
            out.push(0x2C);
            out.extend_from_slice(&f.left.to_le_bytes());
            out.extend_from_slice(&f.top.to_le_bytes());
            out.extend_from_slice(&f.width.to_le_bytes());
            out.extend_from_slice(&f.height.to_le_bytes());
            out.push(0); // no local table, not interlaced
            out.push(min_code);

            let mut bw = BitWriter {
                out: Vec::new(),
                acc: 0,
                bits: 0,
            };
            for &px in &f.indices {
                bw.push(clear, code_width);
                bw.push(px as u16, code_width);
            }
            bw.push(eoi, code_width);
            let data = bw.finish();
            for chunk in data.chunks(255) {
                out.push(chunk.len() as u8);
                out.extend_from_slice(chunk);
            }
            out.push(0); // data terminator
        }
        out.push(0x3B);
        out
    }
}
