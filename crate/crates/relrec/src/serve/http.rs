//! HTTP framing: GET /related/{sig} on the root, POST /leaf/rank on
//! leaves, JSON bodies exactly matching the wire structs.

use super::node::{LeafNode, RootNode};
use super::{RankRequest, RelatedResponse};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use std::sync::Arc;

pub fn leaf_router(leaf: Arc<LeafNode>) -> Router {
    Router::new()
        .route("/leaf/rank", post(leaf_rank))
        .route("/health", get(|| async { "ok" }))
        .with_state(leaf)
}

async fn leaf_rank(
    State(leaf): State<Arc<LeafNode>>,
    Json(req): Json<RankRequest>,
) -> Result<Json<super::RankResponse>, (StatusCode, String)> {
    match leaf.rank(&req) {
        Ok(response) => Ok(Json(response)),
        Err(err) => Err((StatusCode::BAD_REQUEST, err.to_string())),
    }
}

#[derive(Deserialize)]
struct RelatedParams {
    user: Option<String>,
    k: Option<usize>,
    platform: Option<String>,
}

pub fn root_router(root: Arc<RootNode>) -> Router {
    Router::new()
        .route("/related/{sig}", get(related))
        .route("/health", get(|| async { "ok" }))
        .with_state(root)
}

async fn related(
    State(root): State<Arc<RootNode>>,
    Path(sig): Path<String>,
    Query(params): Query<RelatedParams>,
) -> Result<Json<RelatedResponse>, (StatusCode, String)> {
    let user = params.user.unwrap_or_default();
    let top_k = params.k.unwrap_or(root.state.cfg.top_k);
    let platform = params.platform.unwrap_or_else(|| "web".to_string());
    match root
        .related(&crate::corpus::Signature(sig), &user, top_k, &platform)
        .await
    {
        Ok(outcome) => Ok(Json(outcome.into_response())),
        Err(err) => Err((StatusCode::INTERNAL_SERVER_ERROR, err.to_string())),
    }
}

/// Bind and serve a leaf until the process dies. Returns the bound address
/// through the callback before blocking.
pub async fn serve_leaf(leaf: Arc<LeafNode>, addr: std::net::SocketAddr) -> crate::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(crate::Error::Io)?;
    eprintln!(
        "leaf {} [{:016x}:{:016x}] listening on {} ({} pins)",
        leaf.id,
        leaf.range.0,
        leaf.range.1,
        listener.local_addr().map_err(crate::Error::Io)?,
        leaf.owned_pins(),
    );
    axum::serve(listener, leaf_router(leaf))
        .await
        .map_err(|e| crate::Error::Transport(e.to_string()))
}

pub async fn serve_root(root: Arc<RootNode>, addr: std::net::SocketAddr) -> crate::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(crate::Error::Io)?;
    eprintln!(
        "root listening on {} ({} leaves)",
        listener.local_addr().map_err(crate::Error::Io)?,
        root.leaves.len(),
    );
    axum::serve(listener, root_router(root))
        .await
        .map_err(|e| crate::Error::Transport(e.to_string()))
}
