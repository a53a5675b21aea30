//! Walk through the annotator API against a freshly generated dataset:
//! list actions, fetch a frame, save an annotation, ask for a prediction.
//! Requests go straight to the router, no socket involved.
//!
//!     cargo run -p vars-service --example api_tour
//!
//! To serve the same data over HTTP instead, use `vars serve`.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use vars_core::model::{save_checkpoint, ModelConfig, MvfModel};
use vars_core::synthgen::{generate, GenConfig};
use vars_service::{router, ServiceState};

async fn send(app: &axum::Router, method: Method, uri: &str, body: Value) -> (u16, Vec<u8>) {
    let body = if body.is_null() { Body::empty() } else { Body::from(body.to_string()) };
    let req = Request::builder().method(method).uri(uri).body(body).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn show(label: &str, status: u16, body: &[u8]) {
    let text = serde_json::from_slice::<Value>(body)
        .map(|v| serde_json::to_string_pretty(&v).unwrap())
        .unwrap_or_else(|_| format!("<{} bytes>", body.len()));
    println!("{label} -> {status}\n{text}\n");
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let gen = GenConfig { n_actions: 4, height: 12, width: 16, seed: 3, ..GenConfig::default() };
    let manifest = generate(&gen, dir.path())?;
    let model = MvfModel::init(ModelConfig { height: 12, width: 16, ..ModelConfig::default() }, 0)?;
    let ckpt = dir.path().join("untrained.mvfm");
    save_checkpoint(&model, &ckpt)?;

    let state = ServiceState::open(dir.path(), &[ckpt])?;
    let app = router(Arc::new(state));
    let action = &manifest.actions[0];
    let id = &action.action_id;

    let (s, b) = send(&app, Method::GET, "/api/actions?page_size=2", Value::Null).await;
    show("GET /api/actions?page_size=2", s, &b);

    let (s, b) = send(&app, Method::GET, &format!("/api/actions/{id}/clips/0/frames/8"), Value::Null).await;
    let header_end = b.iter().enumerate().filter(|(_, &c)| c == b'\n').nth(2).map_or(0, |(i, _)| i + 1);
    println!("GET frame 8 -> {s}: {:?} + {} pixel bytes\n", String::from_utf8_lossy(&b[..header_end]), b.len() - header_end);

    let mut annotation = serde_json::to_value(action.annotation.as_ref().expect("annotated"))?;
    annotation["severity"] = json!(5);
    let put = json!({"annotation": annotation, "revision": action.revision});
    let uri = format!("/api/actions/{id}/annotation");
    let (s, b) = send(&app, Method::PUT, &uri, put.clone()).await;
    show("PUT annotation", s, &b);
    // replaying the same revision is now stale
    let (s, b) = send(&app, Method::PUT, &uri, put).await;
    show("PUT annotation again", s, &b);

    let (s, b) = send(&app, Method::POST, &format!("/api/actions/{id}/predict"), json!({"views": ["L"]})).await;
    show("POST predict (live view only)", s, &b);
    Ok(())
}
