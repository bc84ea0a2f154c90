//! File formats: PFM depth, PNG images and masks, camera JSON.
//!
//! * Depth: single-channel PFM (`Pf`), little-endian (scale `-1.0`), rows
//!   stored bottom-to-top as in the reference format; NaN marks invalid pixels.
//! * Images: 8-bit RGB PNG. Masks: 8-bit grayscale PNG, `0`/`255` on write,
//!   any nonzero luma reads as `true`.
//! * Cameras: JSON array of [`CameraRecord`].

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, Rgb};

use super::{Camera, CameraRecord, DepthMap, Image, Mask};
use crate::error::{Error, Result};

pub fn encode_pfm(depth: &DepthMap) -> Vec<u8> {
    let (w, h) = (depth.width(), depth.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            let v = depth.get(x, y).map_or(f32::NAN, |d| d as f32);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8], origin: &Path) -> Result<DepthMap> {
    let bad = |msg: &str| Error::format(origin, msg);
    let mut pos = 0usize;
    let mut next_line = || -> Result<String> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| bad("truncated PFM header"))?;
        pos += end + 1;
        Ok(String::from_utf8_lossy(&rest[..end]).trim().to_string())
    };
    match next_line()?.as_str() {
        "Pf" => {}
        "PF" => return Err(bad("3-channel PFM is not a depth map")),
        _ => return Err(bad("not a PFM file")),
    }
    let dims = next_line()?;
    let mut it = dims.split_whitespace().map(str::parse::<usize>);
    let (w, h) = match (it.next(), it.next(), it.next()) {
        (Some(Ok(w)), Some(Ok(h)), None) if w > 0 && h > 0 => (w, h),
        _ => return Err(bad("invalid PFM dimensions")),
    };
    let scale: f32 = next_line()?.parse().map_err(|_| bad("invalid PFM scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("invalid PFM scale"));
    }
    let little = scale < 0.0;
    let data = &bytes[pos..];
    if data.len() < w * h * 4 {
        return Err(bad("truncated PFM data"));
    }
    let mut d = DepthMap::invalid(w, h);
    for (k, chunk) in data.chunks_exact(4).take(w * h).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (x, row) = (k % w, k / w);
        d.set(x, h - 1 - row, Some(v as f64).filter(|v| v.is_finite()));
    }
    Ok(d)
}

pub fn read_pfm(path: &Path) -> Result<DepthMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes, path)
}

pub fn write_pfm(path: &Path, depth: &DepthMap) -> Result<()> {
    write_bytes(path, &encode_pfm(depth))
}

fn to_u8(c: f32) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_png_rgb(img: &Image) -> Vec<u8> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
            Rgb(img.get(x as usize, y as usize).map(to_u8))
        });
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    out.into_inner()
}

pub fn encode_png_mask(mask: &Mask) -> Vec<u8> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
            Luma([if mask.get(x as usize, y as usize) {
                255
            } else {
                0
            }])
        });
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    out.into_inner()
}

pub fn decode_png_rgb(bytes: &[u8], origin: &Path) -> Result<Image> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::format(origin, e.to_string()))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| p.0.map(|c| c as f32 / 255.0))
        .collect();
    Ok(Image::from_pixels(w, h, data))
}

pub fn decode_png_mask(bytes: &[u8], origin: &Path) -> Result<Mask> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::format(origin, e.to_string()))?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Mask::from_bits(
        w,
        h,
        img.pixels().map(|p| p.0[0] != 0).collect(),
    ))
}

pub fn read_png_rgb(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png_rgb(&bytes, path)
}

pub fn read_png_mask(path: &Path) -> Result<Mask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png_mask(&bytes, path)
}

pub fn write_png_rgb(path: &Path, img: &Image) -> Result<()> {
    write_bytes(path, &encode_png_rgb(img))
}

pub fn write_png_mask(path: &Path, mask: &Mask) -> Result<()> {
    write_bytes(path, &encode_png_mask(mask))
}

pub fn encode_cameras(cameras: &[Camera]) -> Vec<u8> {
    let records: Vec<CameraRecord> = cameras.iter().map(Camera::to_record).collect();
    let mut out = serde_json::to_vec_pretty(&records).expect("camera records serialize");
    out.push(b'\n');
    out
}

/// Parses and validates a camera list; cameras are returned sorted by frame.
pub fn decode_cameras(bytes: &[u8], origin: &Path) -> Result<Vec<Camera>> {
    let records: Vec<CameraRecord> =
        serde_json::from_slice(bytes).map_err(|e| Error::format(origin, e.to_string()))?;
    let mut cams = records
        .into_iter()
        .map(Camera::try_from)
        .collect::<Result<Vec<_>>>()?;
    cams.sort_by_key(Camera::frame_index);
    Ok(cams)
}

pub fn read_cameras(path: &Path) -> Result<Vec<Camera>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cameras(&bytes, path)
}

pub fn write_cameras(path: &Path, cameras: &[Camera]) -> Result<()> {
    write_bytes(path, &encode_cameras(cameras))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
