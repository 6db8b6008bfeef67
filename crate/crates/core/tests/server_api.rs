use std::path::PathBuf;
use std::sync::Arc;

use affpipe::pipeline::annotation::{convert_annotation, read_jsonl};
use affpipe::pipeline::PipelineConfig;
use affpipe::server::{read_tasks, router, AnnotationTask, AnnotatorState, PostResponse};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use tower::ServiceExt;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn app(out: PathBuf) -> axum::Router {
    let tasks = read_tasks(&fixture("tasks.json")).unwrap();
    router(Arc::new(AnnotatorState::new(tasks, out)), None, None)
}

async fn send(app: axum::Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn post(body: String) -> Request<Body> {
    Request::post("/annotations").header("content-type", "application/x-ndjson").body(Body::from(body)).unwrap()
}

#[tokio::test]
async fn lists_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let (status, body) = send(app(dir.path().join("a.jsonl")), Request::get("/tasks").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let tasks: Vec<AnnotationTask> = serde_json::from_slice(&body).unwrap();
    assert_eq!(tasks, read_tasks(&fixture("tasks.json")).unwrap());
}

#[tokio::test]
async fn accepts_and_appends_valid_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.jsonl");
    let body = std::fs::read_to_string(fixture("annotations.jsonl")).unwrap();
    let (status, resp) = send(app(out.clone()), post(body.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let resp: PostResponse = serde_json::from_slice(&resp).unwrap();
    assert_eq!(resp.accepted, 2);

    let (status, _) = send(app(out.clone()), post(body)).await;
    assert_eq!(status, StatusCode::OK);
    let stored = read_jsonl(&out).unwrap();
    assert_eq!(stored.len(), 4);
    // Whatever the server stored must convert cleanly.
    for r in &stored {
        convert_annotation(r, &PipelineConfig::default(), 0).unwrap();
    }
}

#[tokio::test]
async fn rejects_whole_batch_on_any_bad_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.jsonl");
    let good = std::fs::read_to_string(fixture("annotations.jsonl")).unwrap();
    let first = good.lines().next().unwrap();

    let unknown = first.replace("kitchen-017", "nope");
    let wrong_size = first.replace("\"width\":64", "\"width\":65");
    let four_kp = first.replace("[[20,24],[21,24],[20,25],[21,25],[20,24]]", "[[20,24],[21,24],[20,25],[21,25]]");
    for bad in [unknown, wrong_size, four_kp, "{not json".to_string(), String::new()] {
        let (status, resp) = send(app(out.clone()), post(format!("{first}\n{bad}\n"))).await;
        if bad.is_empty() {
            assert_eq!(status, StatusCode::OK);
            continue;
        }
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        let resp: PostResponse = serde_json::from_slice(&resp).unwrap();
        assert_eq!(resp.accepted, 0);
        assert!(!resp.errors.is_empty());
    }
    // Only the single all-valid post above was written.
    assert_eq!(read_jsonl(&out).unwrap().len(), 1);

    let (status, _) = send(app(out), post(String::new())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn serves_placeholder_and_ui_dir() {
    let dir = tempfile::tempdir().unwrap();
    let (status, body) = send(app(dir.path().join("a.jsonl")), Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8(body).unwrap().contains("--ui-dir"));

    let ui = dir.path().join("ui");
    std::fs::create_dir_all(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<h1>ui</h1>").unwrap();
    let images = dir.path().join("img");
    std::fs::create_dir_all(&images).unwrap();
    std::fs::write(images.join("x.png"), b"png").unwrap();
    let tasks = read_tasks(&fixture("tasks.json")).unwrap();
    let app = router(Arc::new(AnnotatorState::new(tasks, dir.path().join("a.jsonl"))), Some(&ui), Some(&images));
    let (status, body) = send(app.clone(), Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!((status, body), (StatusCode::OK, b"<h1>ui</h1>".to_vec()));
    let (status, body) = send(app, Request::get("/images/x.png").body(Body::empty()).unwrap()).await;
    assert_eq!((status, body), (StatusCode::OK, b"png".to_vec()));
}
