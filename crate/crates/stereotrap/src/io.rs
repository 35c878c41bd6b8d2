//! Frame and raster file formats.
//!
//! Frames load from 8/16-bit PNG or PGM/PPM, scaled to `[0, 1]`; colour
//! frames are averaged to grayscale. Float rasters use PFM with NaN for
//! invalid pixels: `Pf` for scalar maps, `PF` for flow (u, v, 0).

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use stereotrap_core::flow::FlowField;
use stereotrap_core::ingest::{to_grayscale, RgbFrame};
use stereotrap_core::raster::{DisparityMap, GrayImage, Raster};

use crate::error::{Error, Result};

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Writes via a sibling temporary file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Loads a frame as grayscale in `[0, 1]`. `.pfm` files load verbatim.
pub fn read_frame(path: &Path) -> Result<GrayImage> {
    if has_extension(path, "pfm") {
        return read_pfm(path);
    }
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = match img {
        DynamicImage::ImageLuma8(b) => {
            Raster::from_vec(w, h, b.pixels().map(|p| p.0[0] as f32 / 255.0).collect())?
        }
        DynamicImage::ImageLuma16(b) => {
            Raster::from_vec(w, h, b.pixels().map(|p| p.0[0] as f32 / 65535.0).collect())?
        }
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            let b = img.to_luma32f();
            Raster::from_vec(w, h, b.into_raw())?
        }
        other => {
            let rgb = other.to_rgb32f();
            let pixels = rgb.pixels().map(|p| p.0).collect();
            to_grayscale(&RgbFrame::new(w, h, pixels)?)
        }
    };
    Ok(gray)
}

/// Stores a grayscale image: lossless PFM for `.pfm`, otherwise 16-bit
/// PNG/PGM with values clamped to `[0, 1]`.
pub fn write_frame(path: &Path, img: &GrayImage) -> Result<()> {
    if has_extension(path, "pfm") {
        return write_pfm(path, img);
    }
    let data: Vec<u16> = img
        .data()
        .iter()
        .zip(img.valid_mask())
        .map(|(v, ok)| {
            if *ok {
                (v.clamp(0.0, 1.0) * 65535.0).round() as u16
            } else {
                0
            }
        })
        .collect();
    write_luma16(path, img.width(), img.height(), data)
}

fn write_luma16(path: &Path, w: usize, h: usize, data: Vec<u16>) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(w as u32, h as u32, data)
        .ok_or_else(|| Error::format(path, "buffer size"))?;
    let format = image::ImageFormat::from_path(path).unwrap_or(image::ImageFormat::Png);
    let mut bytes = std::io::Cursor::new(Vec::new());
    DynamicImage::ImageLuma16(buf)
        .write_to(&mut bytes, format)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    write_atomic(path, &bytes.into_inner())
}

/// 16-bit PNG with disparity scaled by 256; 0 marks invalid pixels.
pub fn write_disparity_png16(path: &Path, disparity: &DisparityMap) -> Result<()> {
    let r = disparity.raster();
    let data = r
        .data()
        .iter()
        .zip(r.valid_mask())
        .map(|(d, ok)| {
            if *ok {
                (d * 256.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            }
        })
        .collect();
    write_luma16(path, r.width(), r.height(), data)
}

fn pfm_bytes(
    tag: &str,
    w: usize,
    h: usize,
    channels: usize,
    value: impl Fn(usize, usize, usize) -> f32,
) -> Vec<u8> {
    let mut out = format!("{tag}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * channels * 4);
    // rows run bottom to top
    for y in (0..h).rev() {
        for x in 0..w {
            for c in 0..channels {
                out.extend_from_slice(&value(x, y, c).to_le_bytes());
            }
        }
    }
    out
}

struct Pfm {
    width: usize,
    height: usize,
    channels: usize,
    /// Top-to-bottom, interleaved.
    data: Vec<f32>,
}

fn parse_pfm(path: &Path) -> Result<Pfm> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PFM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the samples
    pos += 1;
    let channels = match fields[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        _ => return Err(Error::format(path, "not a PFM file")),
    };
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(path, "bad PFM dimensions"))
    };
    let (width, height) = (parse(&fields[1])?, parse(&fields[2])?);
    let scale: f32 = fields[3]
        .parse()
        .map_err(|_| Error::format(path, "bad PFM scale"))?;
    let n = width * height * channels;
    let body = bytes
        .get(pos..pos + n * 4)
        .ok_or_else(|| Error::format(path, "truncated PFM data"))?;
    let mut data = vec![0.0f32; n];
    let row = width * channels;
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if scale < 0.0 {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (file_row, col) = (i / row, i % row);
        data[(height - 1 - file_row) * row + col] = v;
    }
    Ok(Pfm {
        width,
        height,
        channels,
        data,
    })
}

pub fn write_pfm(path: &Path, raster: &Raster) -> Result<()> {
    let bytes = pfm_bytes("Pf", raster.width(), raster.height(), 1, |x, y, _| {
        raster.get(x, y).unwrap_or(f32::NAN)
    });
    write_atomic(path, &bytes)
}

pub fn read_pfm(path: &Path) -> Result<Raster> {
    let pfm = parse_pfm(path)?;
    if pfm.channels != 1 {
        return Err(Error::format(path, "expected a single-channel PFM"));
    }
    Ok(Raster::from_vec(pfm.width, pfm.height, pfm.data)?)
}

pub fn write_flow_pfm(path: &Path, flow: &FlowField) -> Result<()> {
    let bytes = pfm_bytes("PF", flow.width(), flow.height(), 3, |x, y, c| {
        match (flow.get(x, y), c) {
            (Some(m), 0 | 1) => m[c],
            (None, 0 | 1) => f32::NAN,
            _ => 0.0,
        }
    });
    write_atomic(path, &bytes)
}

pub fn read_flow_pfm(path: &Path) -> Result<FlowField> {
    let pfm = parse_pfm(path)?;
    if pfm.channels != 3 {
        return Err(Error::format(path, "expected a three-channel flow PFM"));
    }
    Ok(FlowField::from_fn(pfm.width, pfm.height, |x, y| {
        let i = (y * pfm.width + x) * 3;
        let m = [pfm.data[i], pfm.data[i + 1]];
        (m[0].is_finite() && m[1].is_finite()).then_some(m)
    }))
}
