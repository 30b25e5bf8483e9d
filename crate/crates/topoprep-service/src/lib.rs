//! Axum router over the topoprep experiments. Every compute route takes and
//! returns JSON and runs on the blocking pool.

pub mod api;

use std::net::SocketAddr;

use axum::extract::Json;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl From<topoprep::Error> for ApiError {
    fn from(e: topoprep::Error) -> Self {
        use topoprep::Error::*;
        let (status, kind) = match &e {
            Parse(_) => (StatusCode::BAD_REQUEST, "parse"),
            Domain(_) => (StatusCode::BAD_REQUEST, "domain"),
            Structure(_) | SingularColumn { .. } => (StatusCode::BAD_REQUEST, "structure"),
            Unsupported(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unsupported"),
            Budget(_) => (StatusCode::UNPROCESSABLE_ENTITY, "budget"),
            NoConvergence(_) | GapCollapse(_) => (StatusCode::INTERNAL_SERVER_ERROR, "numerics"),
            Contract(_) => (StatusCode::INTERNAL_SERVER_ERROR, "contract"),
            Io(_) | Csv(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
        };
        ApiError { status, body: ErrorBody { kind: kind.into(), message: e.to_string() } }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

async fn blocking<T, F>(f: F) -> Result<Json<T>, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> topoprep::Result<T> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => Ok(Json(r?)),
        Err(e) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody { kind: "panic".into(), message: e.to_string() },
        }),
    }
}

pub fn router() -> Router {
    Router::new()
        .route("/health", get(|| async { Json(api::health()) }))
        .route("/categories", get(|| blocking(api::categories)))
        .route("/simulate", post(|Json(req): Json<api::SimulateRequest>| blocking(move || api::simulate(req))))
        .route("/scan", post(|Json(req): Json<api::ScanRequest>| blocking(move || api::scan(req))))
        .route("/sweff", post(|Json(req): Json<api::SweffRequest>| blocking(move || api::sweff(req))))
        .route("/tomography", post(|Json(req): Json<api::TomographyRequest>| blocking(move || api::tomography(req))))
        .route("/figures", post(|Json(req): Json<api::FiguresRequest>| blocking(move || api::figures(req))))
}

pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}

/// Binds `addr` (port 0 picks a free port) and serves in a background task.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((local, tokio::spawn(serve(listener))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_pick_statuses() {
        let e = ApiError::from(topoprep::Error::Domain("x".into()));
        assert_eq!(e.status, StatusCode::BAD_REQUEST);
        assert_eq!(e.body.kind, "domain");
        let e = ApiError::from(topoprep::Error::Budget("x".into()));
        assert_eq!(e.status, StatusCode::UNPROCESSABLE_ENTITY);
        let e = ApiError::from(topoprep::Error::NoConvergence("x".into()));
        assert_eq!(e.status, StatusCode::INTERNAL_SERVER_ERROR);
    }
}
