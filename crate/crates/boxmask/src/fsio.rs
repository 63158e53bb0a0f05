//! File IO for masks, images, point clouds and calibration.

use std::io::Write;
use std::path::Path;

use boxmask_core::lidar::{PointCloudFrame, ProjectionModel};
use boxmask_core::SemanticMask;
use image::{ColorType, ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::Builder::new()
        .prefix(".boxmask-")
        .tempfile_in(dir)
        .map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Single-channel 8-bit PNG; pixel value is the label id.
pub fn encode_mask_png(mask: &SemanticMask) -> Vec<u8> {
    let mut out = Vec::new();
    image::write_buffer_with_format(
        &mut std::io::Cursor::new(&mut out),
        mask.as_slice(),
        mask.width(),
        mask.height(),
        ColorType::L8,
        ImageFormat::Png,
    )
    .expect("in-memory PNG encoding cannot fail");
    out
}

pub fn decode_mask_png(bytes: &[u8], origin: &Path) -> Result<SemanticMask> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::format(origin, e))?;
    let image::DynamicImage::ImageLuma8(gray) = img else {
        return Err(Error::format(origin, "mask must be a single-channel 8-bit PNG"));
    };
    let (w, h) = gray.dimensions();
    SemanticMask::from_raw(w, h, gray.into_raw()).map_err(|e| Error::format(origin, e))
}

pub fn write_mask(path: &Path, mask: &SemanticMask) -> Result<()> {
    write_atomic(path, &encode_mask_png(mask))
}

pub fn read_mask(path: &Path) -> Result<SemanticMask> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask_png(&bytes, path)
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    Ok(reader.decode().map_err(|e| Error::format(path, e))?.into_rgb8())
}

pub fn encode_rgb_png(img: &RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut out), ImageFormat::Png)
        .expect("in-memory PNG encoding cannot fail");
    out
}

/// Little-endian `f32` triples, 12 bytes per point.
pub fn decode_point_cloud(bytes: &[u8], origin: &Path) -> Result<PointCloudFrame> {
    if !bytes.len().is_multiple_of(12) {
        return Err(Error::format(
            origin,
            format!("point cloud size {} is not a multiple of 12 bytes", bytes.len()),
        ));
    }
    let points = bytes
        .chunks_exact(12)
        .map(|c| {
            let f = |i: usize| f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]);
            [f(0), f(4), f(8)]
        })
        .collect();
    Ok(PointCloudFrame { points })
}

pub fn encode_point_cloud(cloud: &PointCloudFrame) -> Vec<u8> {
    cloud
        .points
        .iter()
        .flat_map(|p| p.iter().flat_map(|v| v.to_le_bytes()))
        .collect()
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloudFrame> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_point_cloud(&bytes, path)
}

pub fn write_point_cloud(path: &Path, cloud: &PointCloudFrame) -> Result<()> {
    write_atomic(path, &encode_point_cloud(cloud))
}

/// Calibration file: the 3x4 projection matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub projection: [[f64; 4]; 3],
}

pub fn read_calibration(path: &Path) -> Result<ProjectionModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cal: Calibration = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
    if cal.projection.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::format(path, "projection matrix must be finite"));
    }
    Ok(ProjectionModel {
        matrix: cal.projection,
    })
}

pub fn write_calibration(path: &Path, proj: &ProjectionModel) -> Result<()> {
    let cal = Calibration {
        projection: proj.matrix,
    };
    let text = serde_json::to_string_pretty(&cal).expect("calibration serializes");
    write_atomic(path, format!("{text}\n").as_bytes())
}
