//! JSON endpoint for the browser testbench. Handlers only translate between
//! HTTP and [`AppState`]; heavy runs go to the blocking pool.

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value};

use super::{AppState, GateSummary, RunRequest, ServiceError, SimulateResponse};
use crate::eval::EvalReport;
use crate::scenario::SuiteManifest;

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

pub struct ApiError(StatusCode, ErrorBody);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match e {
            ServiceError::UnknownScenario(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, ErrorBody { error: e.kind().into(), detail: e.to_string() })
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, ErrorBody { error: "malformed_request".into(), detail: e.body_text() })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenarios", get(scenarios))
        .route("/config", get(config))
        .route("/simulate", post(simulate))
        .route("/metrics", post(metrics))
        .route("/gates", get(gates))
        .fallback(not_found)
        .with_state(state)
}

async fn not_found() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, ErrorBody { error: "not_found".into(), detail: "no such endpoint".into() })
}

async fn scenarios(State(st): State<AppState>) -> Json<SuiteManifest> {
    Json(st.manifest().clone())
}

async fn config(State(st): State<AppState>) -> Json<Value> {
    let l = &st.loaded;
    Json(json!({
        "config": l.config,
        "calibrations": l.calibrations,
        "config_hash": l.config_hash,
        "calibration_version": l.calibration_version(),
    }))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::from(ServiceError::Internal(e.to_string())))?.map_err(Into::into)
}

async fn simulate(State(st): State<AppState>, req: Result<Json<RunRequest>, JsonRejection>) -> ApiResult<SimulateResponse> {
    let Json(req) = req?;
    Ok(Json(blocking(move || st.simulate(&req)).await?))
}

/// Full-suite runs replace the cached gate summary.
async fn metrics(State(st): State<AppState>, req: Result<Json<RunRequest>, JsonRejection>) -> ApiResult<EvalReport> {
    let Json(req) = req?;
    let whole_suite = req.scenario.is_none();
    let worker = st.clone();
    let report = blocking(move || worker.metrics(&req)).await?;
    if whole_suite {
        st.record_gates(&report).await;
    }
    Ok(Json(report))
}

async fn gates(State(st): State<AppState>) -> ApiResult<GateSummary> {
    Ok(Json(st.gates().await?))
}

/// Binds `host:port` and serves until the process is stopped.
pub async fn serve(state: AppState, host: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
