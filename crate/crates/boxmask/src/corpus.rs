//! Seeded synthetic corpus: images, boxes, point clouds and calibration.
//!
//! Used by the end-to-end tests and handy for trying the CLI without real
//! data. Boxes include the usual detector noise (tiny, elongated, duplicate
//! and out-of-frame boxes) so every filter rule fires.

use std::path::{Path, PathBuf};

use boxmask_core::lidar::{PointCloudFrame, ProjectionModel};
use boxmask_core::{BoundingBox, FrameRecord, InputClass, Weather};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fsio::{encode_rgb_png, write_atomic, write_calibration, write_point_cloud};
use crate::manifest::write_manifest;
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub struct CorpusSpec {
    pub frames: usize,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub lidar_points: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            frames: 10,
            width: 480,
            height: 320,
            seed: 1,
            lidar_points: 4000,
        }
    }
}

fn class_color(c: InputClass) -> Rgb<u8> {
    match c {
        InputClass::Vehicle => Rgb([40, 60, 200]),
        InputClass::Sign => Rgb([230, 200, 30]),
        InputClass::Pedestrian => Rgb([210, 40, 40]),
        InputClass::Cyclist => Rgb([200, 90, 160]),
    }
}

fn random_boxes(rng: &mut ChaCha8Rng, w: f64, h: f64) -> Vec<BoundingBox> {
    let n = rng.random_range(4..=12);
    let mut boxes = Vec::with_capacity(n + 4);
    for _ in 0..n {
        let class = InputClass::ALL[rng.random_range(0..4)];
        let (bw, bh) = match class {
            InputClass::Vehicle => (rng.random_range(20.0..180.0), rng.random_range(20.0..110.0)),
            InputClass::Sign => (rng.random_range(10.0..45.0), rng.random_range(10.0..45.0)),
            _ => (rng.random_range(10.0..40.0), rng.random_range(25.0..90.0)),
        };
        let x = rng.random_range(-10.0..w - 5.0);
        let y = rng.random_range(-10.0..h - 5.0);
        boxes.push(BoundingBox::new(x, y, x + bw, y + bh, class));
    }
    if rng.random_bool(0.7) {
        let b = boxes[0];
        let j = rng.random_range(-3.0..3.0);
        boxes.push(BoundingBox::new(b.x_min + j, b.y_min - j, b.x_max + j, b.y_max, b.class));
    }
    if rng.random_bool(0.5) {
        boxes.push(BoundingBox::new(5.0, 100.0, 300.0, 118.0, InputClass::Vehicle));
    }
    if rng.random_bool(0.5) {
        boxes.push(BoundingBox::new(50.0, 50.0, 58.0, 57.0, InputClass::Pedestrian));
    }
    boxes
}

fn render(rng: &mut ChaCha8Rng, w: u32, h: u32, boxes: &[BoundingBox]) -> RgbImage {
    let tint: [u8; 3] = [rng.random_range(60..140), rng.random_range(60..140), rng.random_range(60..140)];
    let mut img = RgbImage::from_fn(w, h, |x, y| {
        let g = ((x + y) % 64) as u8;
        Rgb([tint[0] + g, tint[1] + g / 2, tint[2]])
    });
    for b in boxes {
        let win = b.pixel_window(w, h);
        for y in win.y0..win.y1 {
            for x in win.x0..win.x1 {
                img.put_pixel(x, y, class_color(b.class));
            }
        }
    }
    img
}

fn random_cloud(rng: &mut ChaCha8Rng, proj: &ProjectionModel, w: u32, h: u32, n: usize) -> PointCloudFrame {
    let [[f, _, cx, _], [_, _, cy, _], _] = proj.matrix;
    let mut points = Vec::with_capacity(n + 3);
    for _ in 0..n {
        let u = rng.random_range(0.0..f64::from(w));
        let v = rng.random_range(0.0..f64::from(h));
        let depth = rng.random_range(2.0..110.0);
        points.push([
            ((u - cx) * depth / f) as f32,
            ((v - cy) * depth / f) as f32,
            depth as f32,
        ]);
    }
    points.push([f32::NAN, 0.0, 5.0]);
    points.push([0.0, 0.0, -4.0]);
    points.push([500.0, 0.0, 1.0]);
    PointCloudFrame { points }
}

/// Writes the corpus under `dir` and returns the manifest path.
pub fn write_synthetic_corpus(dir: &Path, spec: &CorpusSpec) -> Result<PathBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width, spec.height);
    let proj = ProjectionModel::pinhole(0.8 * f64::from(w), 0.5 * f64::from(w), 0.5 * f64::from(h));
    let mut frames = Vec::with_capacity(spec.frames);
    for i in 0..spec.frames {
        let id = format!("frame_{i:04}");
        let boxes = random_boxes(&mut rng, f64::from(w), f64::from(h));
        let img = render(&mut rng, w, h, &boxes);
        write_atomic(&dir.join("images").join(format!("{id}.png")), &encode_rgb_png(&img))?;
        let (lidar, calibration) = if spec.lidar_points > 0 {
            let cloud = random_cloud(&mut rng, &proj, w, h, spec.lidar_points);
            write_point_cloud(&dir.join("lidar").join(format!("{id}.bin")), &cloud)?;
            write_calibration(&dir.join("calib").join(format!("{id}.json")), &proj)?;
            (Some(format!("lidar/{id}.bin")), Some(format!("calib/{id}.json")))
        } else {
            (None, None)
        };
        frames.push(FrameRecord {
            frame_id: id.clone(),
            image: format!("images/{id}.png"),
            width: w,
            height: h,
            weather: Weather::ALL[i % Weather::ALL.len()],
            boxes,
            lidar,
            calibration,
        });
    }
    let manifest = dir.join("manifest.jsonl");
    write_manifest(&manifest, &frames)?;
    Ok(manifest)
}
