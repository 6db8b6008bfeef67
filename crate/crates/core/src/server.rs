//! HTTP backend for the browser annotation tool.
//!
//! `GET /tasks` lists annotation tasks, `POST /annotations` appends
//! validated JSONL records to the output file. The UI itself is served as
//! static files.

use std::collections::HashSet;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

use crate::pipeline::annotation::{parse_jsonl, AnnotationRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub id: String,
    /// URL or path of the interaction frame.
    pub image: String,
    /// Optional short clip following the interaction frame.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frames: Vec<String>,
    pub description: String,
    pub width: usize,
    pub height: usize,
}

pub fn read_tasks(path: &Path) -> Result<Vec<AnnotationTask>, String> {
    let tasks: Vec<AnnotationTask> = crate::io::read_json(path).map_err(|e| e.to_string())?;
    let mut seen = HashSet::new();
    for t in &tasks {
        if !seen.insert(t.id.as_str()) {
            return Err(format!("duplicate task id {}", t.id));
        }
    }
    Ok(tasks)
}

pub struct AnnotatorState {
    tasks: Vec<AnnotationTask>,
    out: PathBuf,
    write_lock: Mutex<()>,
}

impl AnnotatorState {
    pub fn new(tasks: Vec<AnnotationTask>, out: PathBuf) -> Self {
        Self { tasks, out, write_lock: Mutex::new(()) }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PostResponse {
    pub accepted: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

const PLACEHOLDER: &str = "<!doctype html><title>affpipe annotator</title>\
<p>No UI directory configured. Start with <code>--ui-dir</code> to serve the annotation tool.</p>";

async fn get_tasks(State(st): State<Arc<AnnotatorState>>) -> Json<Vec<AnnotationTask>> {
    Json(st.tasks.clone())
}

fn check_record(r: &AnnotationRecord, tasks: &[AnnotationTask]) -> Result<(), String> {
    r.validate().map_err(|e| e.to_string())?;
    let task = tasks.iter().find(|t| t.id == r.task_id).ok_or_else(|| format!("unknown task {}", r.task_id))?;
    if task.width != r.width || task.height != r.height {
        return Err(format!("task {} is {}x{}, record says {}x{}", task.id, task.width, task.height, r.width, r.height));
    }
    Ok(())
}

async fn post_annotations(State(st): State<Arc<AnnotatorState>>, body: String) -> Response {
    let records = match parse_jsonl(&body) {
        Ok(r) => r,
        Err(e) => return reject(vec![e.to_string()]),
    };
    let errors: Vec<String> = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| check_record(r, &st.tasks).err().map(|e| format!("record {}: {e}", i + 1)))
        .collect();
    if !errors.is_empty() || records.is_empty() {
        let errors = if errors.is_empty() { vec!["no records".to_string()] } else { errors };
        return reject(errors);
    }
    let mut buf = String::new();
    for r in &records {
        buf.push_str(&serde_json::to_string(r).expect("record serializes"));
        buf.push('\n');
    }
    let _guard = st.write_lock.lock().await;
    let written = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&st.out)
        .and_then(|mut f| f.write_all(buf.as_bytes()));
    match written {
        Ok(()) => Json(PostResponse { accepted: records.len(), errors: vec![] }).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, Json(PostResponse { accepted: 0, errors: vec![e.to_string()] }))
            .into_response(),
    }
}

fn reject(errors: Vec<String>) -> Response {
    (StatusCode::UNPROCESSABLE_ENTITY, Json(PostResponse { accepted: 0, errors })).into_response()
}

pub fn router(state: Arc<AnnotatorState>, ui_dir: Option<&Path>, image_root: Option<&Path>) -> Router {
    let mut app = Router::new()
        .route("/tasks", get(get_tasks))
        .route("/annotations", axum::routing::post(post_annotations))
        .with_state(state);
    if let Some(images) = image_root {
        app = app.nest_service("/images", ServeDir::new(images));
    }
    match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(PLACEHOLDER) })),
    }
}

pub async fn serve(
    addr: SocketAddr,
    state: Arc<AnnotatorState>,
    ui_dir: Option<PathBuf>,
    image_root: Option<PathBuf>,
) -> std::io::Result<()> {
    let app = router(state, ui_dir.as_deref(), image_root.as_deref());
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotator listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await
}
