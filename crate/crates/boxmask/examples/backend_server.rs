//! Reference mask backend speaking protocol 1 over HTTP.
//!
//! Wraps the synthetic ellipse generator; swap in any `MaskBackend` to put a
//! real model behind the same endpoint.
//!
//! ```text
//! cargo run --example backend_server -- 127.0.0.1:8500
//! BOXMASK_BACKEND=http://127.0.0.1:8500 boxmask fuse manifest.jsonl
//! ```

use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use boxmask::core::SyntheticBackend;
use boxmask::protocol::{answer, PredictRequest, PredictResponse, PREDICT_PATH};

async fn predict(Json(req): Json<PredictRequest>) -> Result<Json<PredictResponse>, (StatusCode, String)> {
    tokio::task::spawn_blocking(move || answer(&SyntheticBackend, &req))
        .await
        .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map(Json)
        .map_err(|e| (StatusCode::BAD_REQUEST, e.to_string()))
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let addr = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:8500".into());
    let app = Router::new().route(PREDICT_PATH, post(predict));
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    eprintln!("mask backend on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await
}
