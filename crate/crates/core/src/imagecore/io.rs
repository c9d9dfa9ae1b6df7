use std::fs;
use std::io::{self, ErrorKind};
use std::path::Path;

use image::{DynamicImage, ImageError, ImageFormat};

use super::GrayImage;
use crate::error::{FusionError, Result};

/// Reads a PGM (P5, maxval <= 255) or 8-bit PNG, reducing colour to luma.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P5") {
        return decode_pgm(&bytes);
    }
    decode_with_image(&bytes)
}

/// Writes `round_half_up(v * 255)` as 8-bit grayscale. Files ending in
/// `.png` are written as PNG, everything else as binary PGM.
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, quantize(img))
            .ok_or_else(|| FusionError::Internal("raster buffer size mismatch".into()))?;
        buf.save_with_format(path, ImageFormat::Png).map_err(map_image_err)
    } else {
        fs::write(path, encode_pgm(img))?;
        Ok(())
    }
}

fn quantize(img: &GrayImage) -> Vec<u8> {
    img.data().iter().map(|&v| (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8).collect()
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(quantize(img));
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let mut fields = [0usize; 4];
    for (i, field) in fields.iter_mut().enumerate() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(eof("PGM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        let token = std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad_header())?;
        if i == 0 {
            if token != "P5" {
                return Err(FusionError::Format(format!("unsupported PGM magic {token:?}")));
            }
        } else {
            *field = token.parse().map_err(|_| bad_header())?;
        }
    }
    // exactly one whitespace byte separates the header from the raster
    if bytes.get(pos).is_none() {
        return Err(eof("PGM header"));
    }
    pos += 1;
    let [_, width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(FusionError::Format(format!("unsupported PGM maxval {maxval}; only 8-bit is supported")));
    }
    let count = width.checked_mul(height).ok_or_else(|| FusionError::Format("PGM dimensions overflow".into()))?;
    let raster = &bytes[pos..];
    if raster.len() < count {
        return Err(eof("PGM raster"));
    }
    let scale = maxval as f64;
    let data = raster[..count].iter().map(|&b| (b as f64 / scale).min(1.0)).collect();
    GrayImage::new(height, width, data).map_err(|e| FusionError::Format(e.to_string()))
}

fn decode_with_image(bytes: &[u8]) -> Result<GrayImage> {
    let img = image::load_from_memory(bytes).map_err(map_image_err)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect(),
        DynamicImage::ImageRgba8(buf) => buf.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect(),
        other => {
            return Err(FusionError::Format(format!(
                "unsupported pixel layout {:?}; only 8-bit gray or RGB is supported",
                other.color()
            )))
        }
    };
    GrayImage::new(h, w, data).map_err(|e| FusionError::Format(e.to_string()))
}

fn luma(r: u8, g: u8, b: u8) -> f64 {
    ((0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0).clamp(0.0, 1.0)
}

fn map_image_err(e: ImageError) -> FusionError {
    match e {
        ImageError::IoError(io) => FusionError::Io(io),
        other => FusionError::Format(other.to_string()),
    }
}

fn eof(what: &str) -> FusionError {
    FusionError::Io(io::Error::new(ErrorKind::UnexpectedEof, format!("truncated {what}")))
}

fn bad_header() -> FusionError {
    FusionError::Format("malformed PGM header".into())
}
