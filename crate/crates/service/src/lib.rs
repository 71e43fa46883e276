//! HTTP service for reviewing detected dataset references.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/articles` | upload an article (JSON or plain text) |
//! | GET | `/articles/{id}/references` | detected references |
//! | GET | `/articles/{id}/references/{n}/candidates` | ranked candidates of one reference |
//! | GET | `/articles/{id}/features` | per-feature candidate lists |
//! | GET | `/articles/{id}/export?format=nt\|ttl\|json` | link set document |
//! | POST | `/sessions` | start a review session |
//! | GET | `/sessions/{id}` | session state |
//! | POST | `/sessions/{id}/decisions` | confirm a DOI or reject an item |
//! | POST | `/sessions/{id}/undo` | withdraw a decision |
//! | GET | `/dictionary` | current feature dictionary |
//! | POST | `/dictionary/false-positives` | remove a feature |
//!
//! JSON responses are wrapped as `{"schema_version": 1, "data": ...}` or
//! `{"schema_version": 1, "error": {"code", "message"}}`. Every response
//! also carries the `x-dataref-schema-version` header.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::http::{HeaderName, HeaderValue};
use axum::routing::{get, post};
use axum::Router;

mod api;
pub mod error;
pub mod session;
pub mod state;

pub use error::{ApiError, ApiResult};
pub use session::{Choice, ReviewSession, SessionEvent, SessionItem, Workflow};
pub use state::{AppState, FalsePositive, StoredArticle};

pub const SCHEMA_VERSION: u32 = 1;
pub const SCHEMA_VERSION_HEADER: &str = "x-dataref-schema-version";

pub fn build_router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/articles", post(api::post_article))
        .route("/articles/{id}/references", get(api::get_references))
        .route(
            "/articles/{id}/references/{n}/candidates",
            get(api::get_candidates),
        )
        .route("/articles/{id}/features", get(api::get_features))
        .route("/articles/{id}/export", get(api::get_export))
        .route("/sessions", post(api::post_session))
        .route("/sessions/{id}", get(api::get_session))
        .route("/sessions/{id}/decisions", post(api::post_decision))
        .route("/sessions/{id}/undo", post(api::post_undo))
        .route("/dictionary", get(api::get_dictionary))
        .route(
            "/dictionary/false-positives",
            post(api::post_false_positive),
        )
        .fallback(api::fallback)
        .layer(axum::middleware::map_response(add_schema_header))
        .with_state(state)
}

async fn add_schema_header(mut response: axum::response::Response) -> axum::response::Response {
    response.headers_mut().insert(
        HeaderName::from_static(SCHEMA_VERSION_HEADER),
        HeaderValue::from(SCHEMA_VERSION),
    );
    response
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, build_router(state)).await
}
