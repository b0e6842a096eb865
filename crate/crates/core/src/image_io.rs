//! 8-bit image export and import (binary PPM and PNG).
//!
//! Values map to bytes by `round(255·v)` after clamping to `[0, 1]`, and
//! back by `v = b / 255`.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

pub fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn from_u8(b: u8) -> f32 {
    b as f32 / 255.0
}

/// Interleaved RGB bytes of batch item 0.
fn interleave(image: &Tensor) -> Result<(usize, usize, Vec<u8>)> {
    let s = image.shape();
    if s.c != 3 {
        return Err(Error::shape(format!("expected a 3-channel image, got {s}")));
    }
    let plane = s.plane();
    let mut out = Vec::with_capacity(plane * 3);
    for p in 0..plane {
        for c in 0..3 {
            out.push(to_u8(image.data()[c * plane + p]));
        }
    }
    Ok((s.h, s.w, out))
}

fn deinterleave(h: usize, w: usize, rgb: &[u8]) -> Result<Tensor> {
    let plane = h * w;
    let mut data = vec![0.0f32; 3 * plane];
    for p in 0..plane {
        for c in 0..3 {
            data[c * plane + p] = from_u8(rgb[p * 3 + c]);
        }
    }
    Tensor::new(Shape::new(1, 3, h, w), data)
}

pub fn encode_ppm(image: &Tensor) -> Result<Vec<u8>> {
    let (h, w, rgb) = interleave(image)?;
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(&rgb);
    Ok(out)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Tensor> {
    // Header: magic, width, height, maxval separated by whitespace, with
    // optional '#' comments, then exactly one whitespace byte.
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format("truncated PPM header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::format("non-ASCII PPM header"))?);
    }
    if fields[0] != "P6" {
        return Err(Error::format(format!("unsupported PPM magic {:?}", fields[0])));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::format(format!("bad PPM header field {s:?}")));
    let (w, h, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval != 255 {
        return Err(Error::format(format!("only 8-bit PPM is supported (maxval {maxval})")));
    }
    let data = bytes.get(pos + 1..).ok_or_else(|| Error::format("truncated PPM header"))?;
    if data.len() != w * h * 3 {
        return Err(Error::format(format!("PPM payload is {} bytes, expected {}", data.len(), w * h * 3)));
    }
    deinterleave(h, w, data)
}

pub fn encode_png(image: &Tensor) -> Result<Vec<u8>> {
    let (h, w, rgb) = interleave(image)?;
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::format(e.to_string()))?;
        writer.write_image_data(&rgb).map_err(|e| Error::format(e.to_string()))?;
    }
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<Tensor> {
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder.read_info().map_err(|e| Error::format(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::format(e.to_string()))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(format!("unsupported PNG layout {:?}/{:?}", info.color_type, info.bit_depth)));
    }
    deinterleave(info.height as usize, info.width as usize, &buf[..info.buffer_size()])
}

/// Write an image; the extension (`.ppm` or `.png`) picks the encoding.
pub fn save_image(image: &Tensor, path: &Path) -> Result<()> {
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some("png") => encode_png(image)?,
        Some("ppm") => encode_ppm(image)?,
        other => return Err(Error::config(format!("unsupported image extension {other:?}"))),
    };
    let mut f = BufWriter::new(fs::File::create(path)?);
    std::io::Write::write_all(&mut f, &bytes)?;
    Ok(())
}

pub fn load_image(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => decode_png(&bytes),
        Some("ppm") => decode_ppm(&bytes),
        other => Err(Error::config(format!("unsupported image extension {other:?}"))),
    }
}
