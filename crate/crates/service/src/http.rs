//! openEO-shaped HTTP surface over [`JobService`].

use std::future::Future;
use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;
use tokio::net::TcpListener;

use crate::service::{JobService, ServiceError};
use crate::signing::unix_now;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "NotFound"),
            ServiceError::InvalidGraph { .. } => (StatusCode::BAD_REQUEST, "InvalidGraph"),
            ServiceError::InvalidTransition { .. } => (StatusCode::CONFLICT, "InvalidTransition"),
            ServiceError::NotFinished { .. } => (StatusCode::CONFLICT, "NotFinished"),
            ServiceError::Forbidden => (StatusCode::FORBIDDEN, "Forbidden"),
            ServiceError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "Internal"),
        };
        let mut body = json!({"code": code, "message": self.to_string()});
        if let ServiceError::InvalidGraph { findings, .. } = &self {
            body["findings"] = json!(findings);
        }
        (status, Json(body)).into_response()
    }
}

pub fn router(service: JobService) -> Router {
    Router::new()
        .route("/jobs", post(create_job))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/results", post(start_job).get(list_results))
        .route("/jobs/{id}/logs", get(get_logs))
        .route("/download/{*path}", get(download))
        .with_state(service)
}

async fn create_job(State(svc): State<JobService>, body: Bytes) -> Result<Response, ServiceError> {
    let id = svc.create_job(&body)?;
    let location = HeaderValue::from_str(&format!("/jobs/{id}")).expect("ids are url-safe");
    let ident = HeaderValue::from_str(&id).expect("ids are url-safe");
    Ok((
        StatusCode::CREATED,
        [(header::LOCATION, location), (header::HeaderName::from_static("openeo-identifier"), ident)],
        Json(json!({"id": id})),
    )
        .into_response())
}

async fn start_job(State(svc): State<JobService>, Path(id): Path<String>) -> Result<StatusCode, ServiceError> {
    svc.start_job(&id)?;
    Ok(StatusCode::ACCEPTED)
}

async fn get_job(State(svc): State<JobService>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(svc.get_job(&id)?).into_response())
}

async fn list_results(State(svc): State<JobService>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(svc.list_results(&id)?).into_response())
}

async fn get_logs(State(svc): State<JobService>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(json!({"logs": svc.get_logs(&id)?})).into_response())
}

#[derive(Deserialize)]
struct SignedQuery {
    expires: Option<String>,
    sig: Option<String>,
}

async fn download(
    State(svc): State<JobService>,
    Path(path): Path<String>,
    Query(q): Query<SignedQuery>,
) -> Result<Response, ServiceError> {
    let (Some(expires), Some(sig)) = (q.expires, q.sig) else {
        return Err(ServiceError::Forbidden);
    };
    let (file, media) = svc.resolve_download(&path, &expires, &sig, unix_now())?;
    match tokio::fs::read(&file).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, media)], bytes).into_response()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ServiceError::NotFound(path)),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: SocketAddr, source: std::io::Error },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::BindFailure { addr, source })
}

/// Serve until `shutdown` resolves, then stop the workers and flush the
/// journal.
pub async fn serve(
    listener: TcpListener,
    service: JobService,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let app = router(service.clone());
    let result = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    service.shutdown();
    result.map_err(ServeError::Io)
}
