//! JSON/HTTP interface over a [`SceneStore`].

use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use roomsim::collide::CollisionReport;
use roomsim::machine::JointUpdate;
use roomsim::ply::{self, Encoding};
use roomsim::{Error, RigidTransform};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use crate::scene::{SceneStore, Snapshot};
use crate::x3d::{self, Precision};

pub const X3D_MIME: &str = "model/x3d+xml";
pub const PLY_MIME: &str = "application/x-ply";
pub const REVISION_HEADER: &str = "x-scene-revision";

/// Largest accepted request body (patient uploads).
pub const MAX_BODY_BYTES: usize = 256 * 1024 * 1024;
/// Largest accepted sweep.
pub const MAX_SWEEP_STATES: usize = 10_000;

/// Error response with a machine-readable body.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl std::fmt::Display) -> Self {
        Self {
            status,
            body: json!({ "error": code, "message": message.to_string() }),
        }
    }

    fn bad_request(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match &e {
            Error::LimitViolation { joint, value, min, max } => Self {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({
                    "error": "limit_violation",
                    "message": e.to_string(),
                    "joint": joint,
                    "value": value,
                    "min": min,
                    "max": max,
                }),
            },
            Error::UnknownComponent(_) => Self::new(StatusCode::NOT_FOUND, "unknown_component", &e),
            Error::Format { .. } | Error::Json(_) => Self::bad_request(&e),
            Error::Io(_) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", &e),
            _ => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", &e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn with_revision(snap: &Snapshot, response: impl IntoResponse) -> Response {
    let mut r = response.into_response();
    r.headers_mut()
        .insert(REVISION_HEADER, HeaderValue::from(snap.revision));
    r
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(ApiError::bad_request)
}

/// Joint maps must be JSON objects; serde would also accept arrays.
fn parse_joint_map(value: serde_json::Value) -> ApiResult<JointUpdate> {
    if !value.is_object() {
        return Err(ApiError::bad_request("a joint map must be a JSON object"));
    }
    serde_json::from_value(value).map_err(ApiError::bad_request)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))
}

pub fn router(store: Arc<SceneStore>) -> Router {
    Router::new()
        .route("/api/scene", get(get_scene))
        .route("/api/scene/mesh/{component}", get(get_mesh))
        .route("/api/machine/joints", put(put_joints))
        .route("/api/patient", post(post_patient))
        .route("/api/collision", get(get_collision))
        .route("/api/sweep", post(post_sweep))
        .route("/api/export/x3d", get(get_x3d))
        .route("/api/events", get(get_events))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(store)
}

async fn get_scene(State(store): State<Arc<SceneStore>>) -> Response {
    let snap = store.snapshot();
    with_revision(&snap, Json(snap.summary()))
}

fn wants_x3d(headers: &HeaderMap) -> bool {
    headers
        .get_all(header::ACCEPT)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .any(|v| v.contains("x3d"))
}

async fn get_mesh(
    State(store): State<Arc<SceneStore>>,
    Path(component): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let snap = store.snapshot();
    let body = snap
        .geometry
        .component(&component)
        .map(|c| c.body.clone())
        .ok_or(Error::UnknownComponent(component))?;
    if wants_x3d(&headers) {
        let doc = blocking(move || x3d::export_mesh(body.mesh(), Precision::Exact)).await?;
        return Ok(with_revision(&snap, ([(header::CONTENT_TYPE, X3D_MIME)], doc)));
    }
    let bytes = blocking(move || {
        let mut out = Vec::new();
        ply::write_mesh(&mut out, body.mesh(), Encoding::BinaryLittleEndian).map(|_| out)
    })
    .await??;
    Ok(with_revision(&snap, ([(header::CONTENT_TYPE, PLY_MIME)], bytes)))
}

/// Reply to an accepted mutation.
#[derive(Debug, Serialize, Deserialize)]
pub struct MutationReply {
    pub revision: u64,
    pub joints: JointUpdate,
    pub collision: CollisionReport,
}

fn mutation_reply(snap: &Snapshot) -> Response {
    with_revision(
        snap,
        Json(MutationReply {
            revision: snap.revision,
            joints: snap.state.joints(),
            collision: (*snap.report).clone(),
        }),
    )
}

async fn put_joints(State(store): State<Arc<SceneStore>>, body: Bytes) -> ApiResult<Response> {
    let update = parse_joint_map(parse_json(&body)?)?;
    let snap = blocking(move || store.set_joints(&update)).await??;
    Ok(mutation_reply(&snap))
}

#[derive(Debug, Deserialize)]
pub struct PatientQuery {
    /// JSON `{rotation: [9], translation_mm: [3]}`; identity when absent.
    pub couch_offset: Option<String>,
    pub name: Option<String>,
}

async fn post_patient(
    State(store): State<Arc<SceneStore>>,
    Query(q): Query<PatientQuery>,
    body: Bytes,
) -> ApiResult<Response> {
    let offset = match &q.couch_offset {
        Some(text) => parse_json::<RigidTransform>(text.as_bytes())?,
        None => RigidTransform::identity(),
    };
    let source = q.name.unwrap_or_else(|| "upload".into());
    let snap = blocking(move || {
        let mesh = ply::parse(&body)?.into_mesh()?;
        if mesh.is_empty() {
            return Err(Error::EmptyMesh);
        }
        store.attach_patient(mesh, offset, source)
    })
    .await??;
    Ok(mutation_reply(&snap))
}

async fn get_collision(State(store): State<Arc<SceneStore>>) -> Response {
    let snap = store.snapshot();
    with_revision(&snap, Json((*snap.report).clone()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepItem {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joints: Option<JointUpdate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<CollisionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<serde_json::Value>,
}

async fn post_sweep(State(store): State<Arc<SceneStore>>, body: Bytes) -> ApiResult<Response> {
    let updates = parse_json::<Vec<serde_json::Value>>(&body)?
        .into_iter()
        .map(parse_joint_map)
        .collect::<ApiResult<Vec<_>>>()?;
    if updates.len() > MAX_SWEEP_STATES {
        return Err(ApiError::bad_request(format!("at most {MAX_SWEEP_STATES} states per sweep")));
    }
    let snap = store.snapshot();
    let results = blocking(move || store.sweep(&updates)).await?;
    let items: Vec<SweepItem> = results
        .into_iter()
        .enumerate()
        .map(|(index, r)| match r {
            Ok((state, report)) => SweepItem {
                index,
                joints: Some(state.joints()),
                report: Some(report),
                error: None,
            },
            Err(e) => SweepItem {
                index,
                joints: None,
                report: None,
                error: Some(ApiError::from(e).body),
            },
        })
        .collect();
    Ok(with_revision(&snap, Json(items)))
}

#[derive(Debug, Deserialize)]
pub struct X3dQuery {
    /// Significant digits; full precision when absent.
    pub digits: Option<usize>,
}

async fn get_x3d(State(store): State<Arc<SceneStore>>, Query(q): Query<X3dQuery>) -> ApiResult<Response> {
    let precision = match q.digits {
        Some(d @ 1..=17) => Precision::Significant(d),
        Some(d) => return Err(ApiError::bad_request(format!("digits must be in 1..=17, got {d}"))),
        None => Precision::Exact,
    };
    let snap = store.snapshot();
    let posed = snap.posed.clone();
    let doc = blocking(move || x3d::export_scene(&posed, precision)).await?;
    Ok(with_revision(&snap, ([(header::CONTENT_TYPE, X3D_MIME)], doc)))
}

async fn get_events(State(store): State<Arc<SceneStore>>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = store.subscribe();
    let first = store.snapshot().event();
    let to_event = |e: crate::scene::SceneEvent| {
        Event::default()
            .event("scene")
            .id(e.revision.to_string())
            .json_data(e)
            .expect("scene events serialize")
    };
    let updates = BroadcastStream::new(rx).filter_map(move |e| e.ok().map(|e| Ok(to_event(e))));
    let stream = tokio_stream::once(Ok(to_event(first))).chain(updates);
    Sse::new(stream).keep_alive(KeepAlive::default())
}
