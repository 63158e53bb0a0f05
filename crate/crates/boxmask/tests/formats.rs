//! Checked-in examples of every on-disk and wire format.

use std::path::{Path, PathBuf};

use boxmask::config::PipelineConfig;
use boxmask::fsio::{decode_mask_png, encode_mask_png, read_calibration, read_mask, read_point_cloud, read_rgb};
use boxmask::manifest::{parse_manifest, to_jsonl, Manifest};
use boxmask::protocol::{decode_request, decode_response, encode_request, PredictRequest, PredictResponse};
use boxmask::review::load_log;
use boxmask_core::backend::ImageView;
use boxmask_core::curation::{CurationView, Decision};
use boxmask_core::resize::ResizeMode;
use boxmask_core::{BoundingBox, InputClass, Prompt, Weather};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn json(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

#[test]
fn manifest_lines() {
    let m = Manifest::load(&fixture("manifest.jsonl")).unwrap();
    assert_eq!(m.frames.len(), 3);
    let day = &m.frames[0];
    assert_eq!((day.width, day.height, day.weather), (1920, 1080, Weather::DayFair));
    assert_eq!(day.boxes[1], BoundingBox::new(900.5, 380.0, 960.0, 560.25, InputClass::Pedestrian));
    assert_eq!(m.resolve(&day.image), fixture("images/0001_day.png"));
    assert_eq!(m.resolve(day.calibration.as_deref().unwrap()), fixture("calib/0001_day.json"));

    let night = &m.frames[1];
    assert_eq!(night.weather, Weather::NightRain);
    assert_eq!(m.resolve(&night.image), Path::new("/data/night/0002.jpg"));
    assert_eq!(night.boxes[0].class, InputClass::Sign);
    assert!(night.lidar.is_none());
    assert!(m.frames[2].boxes.is_empty());

    let again = parse_manifest(&to_jsonl(&m.frames), Path::new("x")).unwrap();
    assert_eq!(again, m.frames);
}

#[test]
fn manifest_errors_carry_line_numbers() {
    let text = std::fs::read_to_string(fixture("manifest.jsonl")).unwrap();
    let dup = format!("{text}{}\n", text.lines().next().unwrap());
    let err = parse_manifest(&dup, Path::new("m.jsonl")).unwrap_err().to_string();
    assert!(err.contains("m.jsonl:5") && err.contains("duplicate"), "{err}");
    let bad = text.replace("\"snow\"", "\"hail\"");
    let err = parse_manifest(&bad, Path::new("m.jsonl")).unwrap_err().to_string();
    assert!(err.contains("m.jsonl:4"), "{err}");
    let traversal = text.replace("0003_snow\",\"image", "../up\",\"image");
    assert!(parse_manifest(&traversal, Path::new("m")).is_err());
}

#[test]
fn config_file() {
    let cfg = PipelineConfig::load(&fixture("config.toml")).unwrap();
    assert_eq!(cfg.output_root, Path::new("runs/2024-snow"));
    assert_eq!(cfg.workers, 4);
    assert_eq!(cfg.filter.min_dim_vehicle, 24.0);
    assert_eq!(cfg.filter.min_dim_small, 15.0);
    assert_eq!(cfg.filter.top_k, 50);
    assert_eq!(cfg.fusion.output_side, 512);
    assert_eq!(cfg.fusion.resize_mode, ResizeMode::Nearest);
    assert_eq!(cfg.fusion.working_long_side, 1024);
    assert!(cfg.variants.camera && cfg.variants.lidar);
    assert_eq!(cfg.camera.min_component_px, 40);
    assert_eq!(cfg.lidar.max_range, 60.0);
    assert_eq!(cfg.refine.max_change_fraction, 0.05);
    assert_eq!(cfg.backend.endpoint, "http://10.0.0.5:8500");
    assert_eq!(cfg.backend.timeout_secs, 12.5);
}

#[test]
fn calibration_file() {
    let p = read_calibration(&fixture("calibration.json")).unwrap();
    assert_eq!(p.matrix[0], [721.5, 0.0, 609.5, 44.85]);
    assert_eq!(p.matrix[2][3], 0.002746);
}

#[test]
fn point_cloud_file() {
    let c = read_point_cloud(&fixture("cloud.bin")).unwrap();
    assert_eq!(c.points, vec![[1.0, -2.5, 10.0], [0.0, 0.0, 95.0], [-3.25, 1.5, -4.0]]);
}

#[test]
fn mask_and_image_files() {
    let m = read_mask(&fixture("mask.png")).unwrap();
    assert_eq!(m.dims(), (4, 3));
    assert_eq!(m.as_slice(), &[0, 1, 1, 0, 2, 3, 3, 0, 255, 255, 255, 255]);
    assert_eq!(decode_mask_png(&encode_mask_png(&m), Path::new("m")).unwrap(), m);
    let rgb = read_rgb(&fixture("rgb.png")).unwrap();
    assert_eq!(rgb.get_pixel(3, 2).0, [10, 20, 30]);
    assert!(read_mask(&fixture("rgb.png")).is_err());
}

#[test]
fn verdict_log() {
    let records = load_log(&fixture("verdicts.jsonl")).unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records[1].note.as_deref(), Some("sign mask bleeds into pole"));
    assert_eq!(records[1].idempotency_key.as_deref(), Some("b7e4c1"));
    let view = CurationView::replay(&records);
    assert_eq!(view.decision("0001_day"), Some(Decision::Reject));
    assert_eq!((view.reviewed(), view.accepted()), (2, 0));
    assert_eq!(view.by_key("b7e4c1").unwrap().seq, 1);
    let line = serde_json::to_string(&records[1]).unwrap();
    assert_eq!(line, std::fs::read_to_string(fixture("verdicts.jsonl")).unwrap().lines().nth(1).unwrap());
}

#[test]
fn predict_request_wire_form() {
    let vehicle = BoundingBox::new(0.0, 0.0, 4.0, 3.0, InputClass::Vehicle);
    let person = BoundingBox::new(1.0, 0.0, 3.0, 2.0, InputClass::Pedestrian);
    let prompts = [Prompt::Box(vehicle), Prompt::center_of(&person)];
    let req = encode_request(&ImageView::dims_only(4, 3), &prompts);
    assert_eq!(serde_json::to_value(&req).unwrap(), json("predict_request.json"));

    let parsed: PredictRequest = serde_json::from_value(json("predict_request.json")).unwrap();
    let d = decode_request(&parsed).unwrap();
    assert_eq!((d.width, d.height), (4, 3));
    assert!(d.rgb.is_empty());
    assert_eq!(d.prompts, prompts);
}

#[test]
fn predict_response_wire_form() {
    let resp: PredictResponse = serde_json::from_value(json("predict_response.json")).unwrap();
    let mut proposals = decode_response(&resp).unwrap();
    proposals.sort_by_key(|p| p.slot);
    assert_eq!(proposals[0].mask.count_ones(), 12);
    let on: Vec<(u32, u32)> = (0..3)
        .flat_map(|y| (0..4).map(move |x| (x, y)))
        .filter(|&(x, y)| proposals[1].mask.get(x, y))
        .collect();
    assert_eq!(on, [(1, 1), (2, 1)]);
    assert_eq!(proposals[1].score, Some(0.5));

    let mut wrong = json("predict_response.json");
    wrong["masks"][0]["rle"] = serde_json::json!([5, 2, 4]);
    let resp: PredictResponse = serde_json::from_value(wrong).unwrap();
    assert!(decode_response(&resp).is_err());
}
