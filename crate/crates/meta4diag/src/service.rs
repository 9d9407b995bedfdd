//! HTTP/JSON service over sessions of datasets and fits.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use meta4diag_core::accuracy::{fitted_study_measures, AccuracyType};
use meta4diag_core::data::{validate_dataset, Dataset, ModelSpec, ValidationReport};
use meta4diag_core::datasets;
use meta4diag_core::inference::{fit_with, FitOptions, Posterior};
use meta4diag_core::plots::{
    self, crosshair_layout, forest_layout, render_svg, CurveGeometry, EstimateType, ForestOptions, Plot, RegionKind,
    SrocType, SvgStyle,
};
use meta4diag_core::priors::{tabulate_prior, PriorSpec, PriorTable, PriorTarget};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;
use tower_http::cors::CorsLayer;

use crate::csv_io::{parse_dataset, IngestOptions};
use crate::result::FitResult;
use crate::runtime::{PoolExecutor, WallClock};

pub const SESSION_HEADER: &str = "x-session";

/// OpenAPI description of the endpoints.
pub const OPENAPI: &str = include_str!("../openapi.json");

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Worker threads for grid evaluation; 0 lets the pool decide.
    pub threads: usize,
    pub session_ttl: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            threads: 0,
            session_ttl: Duration::from_secs(3600),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone)]
struct FitEntry {
    status: FitStatus,
    error: Option<String>,
    result: Option<Arc<FitResult>>,
    posterior: Option<Arc<Posterior>>,
}

#[derive(Debug)]
struct Session {
    datasets: HashMap<String, Dataset>,
    fits: HashMap<String, FitEntry>,
    created: Instant,
    last_used: Instant,
}

impl Session {
    fn new() -> Self {
        let now = Instant::now();
        Session {
            datasets: HashMap::new(),
            fits: HashMap::new(),
            created: now,
            last_used: now,
        }
    }
}

struct Inner {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Session>>,
    executor: PoolExecutor,
    /// One running fit per slot.
    slots: Semaphore,
}

/// Shared service state.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let executor = PoolExecutor::new(config.threads);
        let slots = Semaphore::new(executor.threads().max(1));
        AppState(Arc::new(Inner {
            config,
            sessions: RwLock::new(HashMap::new()),
            executor,
            slots,
        }))
    }

    /// Drop sessions idle for longer than the configured lifetime.
    pub fn expire_sessions(&self) -> usize {
        let ttl = self.0.config.session_ttl;
        let mut sessions = self.0.sessions.write().expect("session lock");
        let before = sessions.len();
        sessions.retain(|_, s| s.last_used.elapsed() < ttl);
        before - sessions.len()
    }

    pub fn session_count(&self) -> usize {
        self.0.sessions.read().expect("session lock").len()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, message)
    }
}

impl From<meta4diag_core::Error> for ApiError {
    fn from(e: meta4diag_core::Error) -> Self {
        let status = if e.is_validation() {
            StatusCode::BAD_REQUEST
        } else {
            StatusCode::UNPROCESSABLE_ENTITY
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<crate::Error> for ApiError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Core(c) => c.into(),
            other if other.is_validation() => ApiError::bad_request(other.to_string()),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Resolve the caller's session, creating one when the header is absent.
fn session_id(state: &AppState, headers: &HeaderMap) -> ApiResult<String> {
    let mut sessions = state.0.sessions.write().expect("session lock");
    match headers.get(SESSION_HEADER).and_then(|v| v.to_str().ok()) {
        Some(id) => {
            let s = sessions
                .get_mut(id)
                .ok_or_else(|| ApiError::not_found(format!("unknown session '{id}'")))?;
            s.last_used = Instant::now();
            Ok(id.to_owned())
        }
        None => {
            let id = uuid::Uuid::new_v4().simple().to_string();
            sessions.insert(id.clone(), Session::new());
            Ok(id)
        }
    }
}

fn with_session(id: &str, response: impl IntoResponse) -> Response {
    let mut r = response.into_response();
    r.headers_mut()
        .insert(SESSION_HEADER, HeaderValue::from_str(id).expect("ASCII session id"));
    r
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    modality: Option<String>,
}

#[derive(Debug, Serialize)]
struct UploadResponse {
    id: String,
    studies: usize,
    report: ValidationReport,
}

async fn upload_dataset(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<UploadQuery>,
    body: Bytes,
) -> ApiResult<Response> {
    let sid = session_id(&state, &headers)?;
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let dataset = parse_dataset(
        text,
        &IngestOptions {
            modality_column: q.modality.clone(),
        },
    )?;
    let spec = ModelSpec {
        modality_column: q.modality,
        ..ModelSpec::default()
    };
    let report = validate_dataset(&dataset, &spec);
    let id = format!("d{}", uuid::Uuid::new_v4().simple());
    let studies = dataset.len();
    state
        .0
        .sessions
        .write()
        .expect("session lock")
        .get_mut(&sid)
        .ok_or_else(|| ApiError::not_found("session expired"))?
        .datasets
        .insert(id.clone(), dataset);
    Ok(with_session(&sid, (StatusCode::CREATED, Json(UploadResponse { id, studies, report }))))
}

#[derive(Debug, Serialize)]
struct Builtin {
    name: &'static str,
    dataset: Dataset,
}

async fn builtin_datasets() -> Json<Vec<Builtin>> {
    Json(
        datasets::BUILTIN_NAMES
            .iter()
            .map(|&name| Builtin {
                name,
                dataset: datasets::by_name(name).expect("bundled dataset"),
            })
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
struct PreviewRequest {
    #[serde(default)]
    priors: PriorSpec,
    #[serde(default = "default_target")]
    target: PriorTarget,
}

fn default_target() -> PriorTarget {
    PriorTarget::Var1
}

async fn preview_prior(Json(req): Json<PreviewRequest>) -> ApiResult<Json<PriorTable>> {
    let config = req.priors.resolve()?;
    Ok(Json(tabulate_prior(&config, req.target, None)?))
}

#[derive(Debug, Deserialize)]
struct FitRequest {
    /// Uploaded dataset id.
    dataset: Option<String>,
    /// Bundled dataset name, used when `dataset` is absent.
    builtin: Option<String>,
    #[serde(default)]
    spec: ModelSpec,
    #[serde(default)]
    priors: PriorSpec,
}

#[derive(Debug, Serialize)]
struct FitView {
    id: String,
    status: FitStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<Arc<FitResult>>,
}

fn set_entry(state: &AppState, sid: &str, fid: &str, entry: FitEntry) {
    if let Some(s) = state.0.sessions.write().expect("session lock").get_mut(sid) {
        s.fits.insert(fid.to_owned(), entry);
    }
}

async fn create_fit(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(req): Json<FitRequest>,
) -> ApiResult<Response> {
    let sid = session_id(&state, &headers)?;
    let dataset = match (&req.dataset, &req.builtin) {
        (Some(id), _) => state
            .0
            .sessions
            .read()
            .expect("session lock")
            .get(&sid)
            .and_then(|s| s.datasets.get(id).cloned())
            .ok_or_else(|| ApiError::not_found(format!("unknown dataset '{id}'")))?,
        (None, Some(name)) => datasets::by_name(name)
            .ok_or_else(|| ApiError::not_found(format!("unknown builtin dataset '{name}'")))?,
        (None, None) => return Err(ApiError::bad_request("either dataset or builtin is required")),
    };
    let priors = req.priors.resolve()?;
    validate_dataset(&dataset, &req.spec).into_result()?;
    if req.spec.nsample == 0 {
        return Err(ApiError::bad_request("nsample must be positive"));
    }
    let fid = format!("f{}", uuid::Uuid::new_v4().simple());
    let queued = FitEntry {
        status: FitStatus::Queued,
        error: None,
        result: None,
        posterior: None,
    };
    set_entry(&state, &sid, &fid, queued);
    let task_state = state.clone();
    let (task_sid, task_fid) = (sid.clone(), fid.clone());
    let spec = req.spec;
    tokio::spawn(async move {
        let Ok(_permit) = task_state.0.slots.acquire().await else {
            return;
        };
        let running = FitEntry {
            status: FitStatus::Running,
            error: None,
            result: None,
            posterior: None,
        };
        set_entry(&task_state, &task_sid, &task_fid, running);
        let worker = task_state.clone();
        let outcome = tokio::task::spawn_blocking(move || -> crate::Result<(FitResult, Posterior)> {
            let post = fit_with(
                &dataset,
                &spec,
                &priors,
                &FitOptions::default(),
                &worker.0.executor,
                &WallClock::default(),
            )?;
            Ok((FitResult::from_posterior(&post)?, post))
        })
        .await;
        let entry = match outcome {
            Ok(Ok((result, post))) => FitEntry {
                status: FitStatus::Done,
                error: None,
                result: Some(Arc::new(result)),
                posterior: Some(Arc::new(post)),
            },
            Ok(Err(e)) => FitEntry {
                status: FitStatus::Failed,
                error: Some(e.to_string()),
                result: None,
                posterior: None,
            },
            Err(e) => FitEntry {
                status: FitStatus::Failed,
                error: Some(format!("fit task aborted: {e}")),
                result: None,
                posterior: None,
            },
        };
        set_entry(&task_state, &task_sid, &task_fid, entry);
    });
    let view = FitView {
        id: fid,
        status: FitStatus::Queued,
        error: None,
        result: None,
    };
    Ok(with_session(&sid, (StatusCode::ACCEPTED, Json(view))))
}

fn fit_entry(state: &AppState, headers: &HeaderMap, fid: &str) -> ApiResult<(String, FitEntry)> {
    let sid = session_id(state, headers)?;
    let entry = state
        .0
        .sessions
        .read()
        .expect("session lock")
        .get(&sid)
        .and_then(|s| s.fits.get(fid).cloned())
        .ok_or_else(|| ApiError::not_found(format!("unknown fit '{fid}'")))?;
    Ok((sid, entry))
}

/// The finished posterior, or 409 while the fit is pending.
fn finished(state: &AppState, headers: &HeaderMap, fid: &str) -> ApiResult<(String, Arc<Posterior>)> {
    let (sid, entry) = fit_entry(state, headers, fid)?;
    match entry.status {
        FitStatus::Done => Ok((sid, entry.posterior.expect("finished fit has a posterior"))),
        FitStatus::Failed => Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            entry.error.unwrap_or_else(|| "fit failed".into()),
        )),
        _ => Err(ApiError::new(StatusCode::CONFLICT, "fit is still running")),
    }
}

async fn get_fit(State(state): State<AppState>, headers: HeaderMap, Path(fid): Path<String>) -> ApiResult<Response> {
    let (sid, entry) = fit_entry(&state, &headers, &fid)?;
    let view = FitView {
        id: fid,
        status: entry.status,
        error: entry.error,
        result: entry.result,
    };
    Ok(with_session(&sid, Json(view)))
}

#[derive(Debug, Deserialize)]
struct FittedQuery {
    #[serde(rename = "type")]
    measure: Option<String>,
}

async fn get_fitted(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(fid): Path<String>,
    Query(q): Query<FittedQuery>,
) -> ApiResult<Response> {
    let (sid, post) = finished(&state, &headers, &fid)?;
    let t: AccuracyType = q.measure.as_deref().unwrap_or("sens").parse()?;
    Ok(with_session(&sid, Json(fitted_study_measures(&post, t, None)?)))
}

/// Plot selection shared by the geometry and SVG endpoints.
#[derive(Debug, Clone, Deserialize)]
pub struct PlotQuery {
    pub plot: String,
    pub sroc_type: Option<u8>,
    pub accuracy_type: Option<String>,
    pub est_type: Option<String>,
    pub level: Option<f64>,
    pub low: Option<f64>,
    pub high: Option<f64>,
}

/// Build the requested plot from a finished posterior.
pub fn build_plot(post: &Posterior, q: &PlotQuery) -> meta4diag_core::Result<Plot> {
    let est: EstimateType = q.est_type.as_deref().unwrap_or("mean").parse()?;
    let intervals = (q.low.unwrap_or(0.025), q.high.unwrap_or(0.975));
    match q.plot.as_str() {
        "sroc" => {
            let level = q.level.unwrap_or(0.95);
            let mut g: Vec<CurveGeometry> = Vec::new();
            if post.model.design.has_covariates() {
                g.extend(plots::data_bubbles(post));
                g.push(plots::walter_from_fit(post, est)?.curve);
            } else {
                g.extend(plots::ellipse_region(post, RegionKind::Prediction, level)?);
                g.extend(plots::ellipse_region(post, RegionKind::Credible, level)?);
                g.extend(plots::data_bubbles(post));
                g.extend(plots::sroc_curve(post, SrocType::try_from(q.sroc_type.unwrap_or(1))?)?);
                g.extend(plots::summary_point_geometry(post)?);
            }
            Ok(Plot::Roc(g))
        }
        "forest" => {
            let opts = ForestOptions {
                measure: q.accuracy_type.as_deref().unwrap_or("sens").parse()?,
                estimate: est,
                intervals,
                cut: None,
                show_summary: true,
            };
            Ok(Plot::Forest(forest_layout(post, &opts)?))
        }
        "crosshair" => Ok(Plot::Roc(
            crosshair_layout(post, est, intervals)?.iter().map(|c| c.geometry()).collect(),
        )),
        other => Err(meta4diag_core::Error::Invalid(format!(
            "unknown plot '{other}', expected sroc, forest or crosshair"
        ))),
    }
}

async fn get_geometry(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(fid): Path<String>,
    Query(q): Query<PlotQuery>,
) -> ApiResult<Response> {
    let (sid, post) = finished(&state, &headers, &fid)?;
    Ok(with_session(&sid, Json(build_plot(&post, &q)?)))
}

async fn get_svg(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(fid): Path<String>,
    Query(q): Query<PlotQuery>,
) -> ApiResult<Response> {
    let (sid, post) = finished(&state, &headers, &fid)?;
    let svg = render_svg(&build_plot(&post, &q)?, &SvgStyle::default())?;
    Ok(with_session(&sid, ([(header::CONTENT_TYPE, "image/svg+xml")], svg)))
}

#[derive(Debug, Deserialize)]
struct MarginalQuery {
    name: String,
}

async fn get_marginal(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(fid): Path<String>,
    Query(q): Query<MarginalQuery>,
) -> ApiResult<Response> {
    let (sid, post) = finished(&state, &headers, &fid)?;
    let m = post
        .marginal(&q.name)
        .ok_or_else(|| ApiError::not_found(format!("no marginal named '{}'", q.name)))?;
    Ok(with_session(&sid, Json(json!({ "name": q.name, "x": m.x, "density": m.density }))))
}

async fn get_session(State(state): State<AppState>, headers: HeaderMap) -> ApiResult<Response> {
    let sid = session_id(&state, &headers)?;
    let sessions = state.0.sessions.read().expect("session lock");
    let s = sessions.get(&sid).ok_or_else(|| ApiError::not_found("session expired"))?;
    let mut datasets: Vec<&String> = s.datasets.keys().collect();
    datasets.sort();
    let mut fits: Vec<&String> = s.fits.keys().collect();
    fits.sort();
    let body = json!({
        "id": sid,
        "age_seconds": s.created.elapsed().as_secs(),
        "datasets": datasets,
        "fits": fits,
    });
    Ok(with_session(&sid, Json(body)))
}

async fn openapi() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], OPENAPI)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/openapi.json", get(openapi))
        .route("/session", get(get_session))
        .route("/datasets", post(upload_dataset))
        .route("/datasets/builtin", get(builtin_datasets))
        .route("/priors/preview", post(preview_prior))
        .route("/fits", post(create_fit))
        .route("/fits/{id}", get(get_fit))
        .route("/fits/{id}/fitted", get(get_fitted))
        .route("/fits/{id}/geometry", get(get_geometry))
        .route("/fits/{id}/svg", get(get_svg))
        .route("/fits/{id}/marginal", get(get_marginal))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serve until the process is stopped.
pub async fn serve(bind: &str, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(config);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.expire_sessions();
        }
    });
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
