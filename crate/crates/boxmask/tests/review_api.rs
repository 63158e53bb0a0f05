use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use boxmask::config::PipelineConfig;
use boxmask::corpus::{write_synthetic_corpus, CorpusSpec};
use boxmask::manifest::{parse_manifest, Manifest};
use boxmask::pipeline::{run_pipeline, RunOptions, MASK_DIR};
use boxmask::review::{
    load_log, router, AcceptanceStats, FramePage, FrameSummary, ReviewState, ReviewStore, IDEMPOTENCY_HEADER,
    REVIEWER_HEADER,
};
use boxmask_core::curation::{Decision, VerdictRecord};
use boxmask_core::SyntheticBackend;
use serde::de::DeserializeOwned;
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    manifest: PathBuf,
    masks: PathBuf,
    log: PathBuf,
    ui: PathBuf,
}

fn fixture(frames: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        frames,
        lidar_points: 0,
        ..CorpusSpec::default()
    };
    let manifest = write_synthetic_corpus(dir.path(), &spec).unwrap();
    let mut cfg = PipelineConfig {
        output_root: dir.path().join("out"),
        ..PipelineConfig::default()
    };
    cfg.fusion.output_side = 64;
    let m = Manifest::load(&manifest).unwrap();
    assert!(run_pipeline(&cfg, &m, &SyntheticBackend, RunOptions::default()).unwrap().success());
    let ui = dir.path().join("ui");
    std::fs::create_dir_all(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<!doctype html><title>review</title>").unwrap();
    Fixture {
        masks: dir.path().join("out").join(MASK_DIR),
        log: dir.path().join("state/verdicts.jsonl"),
        manifest,
        ui,
        _dir: dir,
    }
}

fn app(fx: &Fixture) -> Router {
    let store = ReviewStore::open(Manifest::load(&fx.manifest).unwrap(), &fx.masks, &fx.log).unwrap();
    router(Arc::new(store), Some(&fx.ui))
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>, Option<String>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let ct = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_string());
    let body = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, body.to_vec(), ct)
}

async fn get_json<T: DeserializeOwned>(app: &Router, uri: &str) -> T {
    let (status, body, _) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK, "{uri}: {}", String::from_utf8_lossy(&body));
    serde_json::from_slice(&body).unwrap()
}

fn verdict(id: &str, decision: &str, key: Option<&str>) -> Request<Body> {
    let mut b = Request::post(format!("/api/v1/frames/{id}/verdict"))
        .header(header::CONTENT_TYPE, "application/json")
        .header(REVIEWER_HEADER, "rev-1");
    if let Some(k) = key {
        b = b.header(IDEMPOTENCY_HEADER, k);
    }
    b.body(Body::from(format!(r#"{{"decision":"{decision}"}}"#))).unwrap()
}

fn frame_id(i: usize) -> String {
    format!("frame_{i:04}")
}

#[tokio::test]
async fn listing_filters_and_pages() {
    let fx = fixture(7);
    let app = app(&fx);
    let page: FramePage = get_json(&app, "/api/v1/frames?page_size=3&page=3").await;
    assert_eq!((page.total, page.page, page.frames.len()), (7, 3, 1));
    assert_eq!(page.frames[0].frame_id, frame_id(6));

    let day: FramePage = get_json(&app, "/api/v1/frames?weather=day_fair").await;
    assert!(day.total >= 1 && day.frames.iter().all(|f| f.weather == boxmask_core::Weather::DayFair));

    for bad in ["page=0", "page_size=0", "page_size=501", "state=maybe", "colour=red"] {
        let (status, body, _) = send(&app, Request::get(format!("/api/v1/frames?{bad}")).body(Body::empty()).unwrap()).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        assert!(serde_json::from_slice::<serde_json::Value>(&body).unwrap()["error"].is_string());
    }

    let s: FrameSummary = get_json(&app, &format!("/api/v1/frames/{}", frame_id(0))).await;
    assert_eq!(s.state, ReviewState::Unreviewed);
    assert_eq!(s.pixels.unwrap().total(), 64 * 64);
}

#[tokio::test]
async fn verdict_lifecycle() {
    let fx = fixture(4);
    let app = app(&fx);

    let (status, body, _) = send(&app, verdict(&frame_id(0), "accept", Some("k0"))).await;
    assert_eq!(status, StatusCode::CREATED);
    let first: VerdictRecord = serde_json::from_slice(&body).unwrap();
    assert_eq!((first.seq, first.decision), (0, Decision::Accept));

    let (status, body, _) = send(&app, verdict(&frame_id(0), "accept", Some("k0"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_slice::<VerdictRecord>(&body).unwrap(), first);

    let (status, _, _) = send(&app, verdict(&frame_id(0), "reject", Some("k0"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _, _) = send(&app, verdict("nope", "accept", None)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = send(&app, verdict(&frame_id(1), "maybe", None)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let anonymous = Request::post(format!("/api/v1/frames/{}/verdict", frame_id(1)))
        .body(Body::from(r#"{"decision":"accept"}"#))
        .unwrap();
    assert_eq!(send(&app, anonymous).await.0, StatusCode::BAD_REQUEST);

    assert_eq!(send(&app, verdict(&frame_id(1), "reject", None)).await.0, StatusCode::CREATED);
    assert_eq!(send(&app, verdict(&frame_id(2), "accept", None)).await.0, StatusCode::CREATED);
    assert_eq!(send(&app, verdict(&frame_id(2), "reject", None)).await.0, StatusCode::CREATED);

    let stats: AcceptanceStats = get_json(&app, "/api/v1/stats/acceptance").await;
    assert_eq!((stats.frames, stats.reviewed, stats.accepted, stats.rejected, stats.verdicts), (4, 3, 1, 2, 4));
    assert!((stats.acceptance_rate.unwrap() - 1.0 / 3.0).abs() < 1e-12);

    let rejected: FramePage = get_json(&app, "/api/v1/frames?state=rejected").await;
    let ids: Vec<_> = rejected.frames.iter().map(|f| f.frame_id.clone()).collect();
    assert_eq!(ids, [frame_id(1), frame_id(2)]);
    let s: FrameSummary = get_json(&app, &format!("/api/v1/frames/{}", frame_id(2))).await;
    assert_eq!(s.history_len, 2);

    let (status, body, ct) = send(&app, Request::get("/api/v1/export/manifest").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ct.as_deref(), Some("application/x-ndjson"));
    let exported = parse_manifest(std::str::from_utf8(&body).unwrap(), Path::new("export")).unwrap();
    assert_eq!(exported.len(), 1);
    assert_eq!(exported[0].frame_id, frame_id(0));

    let log = load_log(&fx.log).unwrap();
    assert_eq!(log.len(), 4);
    assert!(log.iter().enumerate().all(|(i, r)| r.seq == i as u64));
}

#[tokio::test]
async fn restart_replays_log() {
    let fx = fixture(3);
    {
        let app = app(&fx);
        send(&app, verdict(&frame_id(0), "accept", Some("a"))).await;
        send(&app, verdict(&frame_id(1), "reject", None)).await;
    }
    let mut bytes = std::fs::read(&fx.log).unwrap();
    bytes.extend_from_slice(br#"{"seq":2,"frame_id":"fra"#);
    std::fs::write(&fx.log, bytes).unwrap();

    let app = app(&fx);
    let stats: AcceptanceStats = get_json(&app, "/api/v1/stats/acceptance").await;
    assert_eq!((stats.reviewed, stats.accepted, stats.verdicts), (2, 1, 2));
    assert_eq!(send(&app, verdict(&frame_id(0), "accept", Some("a"))).await.0, StatusCode::OK);
    assert_eq!(send(&app, verdict(&frame_id(2), "accept", None)).await.0, StatusCode::CREATED);
    assert_eq!(load_log(&fx.log).unwrap().len(), 3);
}

#[tokio::test]
async fn concurrent_verdicts_are_serialized() {
    let fx = fixture(5);
    let app = app(&fx);
    let mut tasks = Vec::new();
    for i in 0..40 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            let key = format!("key-{}", i % 20);
            send(&app, verdict(&frame_id(i % 5), "accept", Some(&key))).await.0
        }));
    }
    let mut created = 0;
    for t in tasks {
        let s = t.await.unwrap();
        assert!(s == StatusCode::CREATED || s == StatusCode::OK || s == StatusCode::CONFLICT);
        created += usize::from(s == StatusCode::CREATED);
    }
    let log = load_log(&fx.log).unwrap();
    assert_eq!(log.len(), created);
    assert_eq!(created, 20);
    assert!(log.iter().enumerate().all(|(i, r)| r.seq == i as u64));
}

#[tokio::test]
async fn images_masks_and_overlays() {
    let fx = fixture(2);
    let app = app(&fx);
    let id = frame_id(1);

    let (status, body, ct) = send(&app, Request::get(format!("/api/v1/frames/{id}/mask")).body(Body::empty()).unwrap()).await;
    assert_eq!((status, ct.as_deref()), (StatusCode::OK, Some("image/png")));
    let mask = image::load_from_memory(&body).unwrap();
    assert_eq!((mask.width(), mask.height()), (64, 64));

    let (status, body, _) = send(&app, Request::get(format!("/api/v1/frames/{id}/image")).body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(image::load_from_memory(&body).unwrap().width(), 480);

    let (status, body, ct) = send(&app, Request::get(format!("/api/v1/frames/{id}/overlay")).body(Body::empty()).unwrap()).await;
    assert_eq!((status, ct.as_deref()), (StatusCode::OK, Some("image/png")));
    let ov = image::load_from_memory(&body).unwrap().into_rgb8();
    assert_eq!(ov.dimensions(), (64, 64));

    std::fs::remove_file(fx.masks.join(format!("{id}.png"))).unwrap();
    for what in ["mask", "overlay"] {
        let (status, _, _) = send(&app, Request::get(format!("/api/v1/frames/{id}/{what}")).body(Body::empty()).unwrap()).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{what}");
    }
    let (status, _, _) = send(&app, Request::get("/api/v1/frames/ghost/image").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn static_ui_is_served() {
    let fx = fixture(1);
    let app = app(&fx);
    let (status, body, ct) = send(&app, Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert!(ct.unwrap().starts_with("text/html"));
    assert!(String::from_utf8(body).unwrap().contains("<title>review</title>"));
    let (status, _, _) = send(&app, Request::get("/missing.js").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
