//! Live learning sessions over HTTP and WebSocket, with a human in place of
//! the simulated decision maker.
//!
//! | Method | Path | Body |
//! |---|---|---|
//! | POST | `/sessions` | [`CreateSession`] → [`StateView`] |
//! | GET | `/sessions/{id}/state` | [`StateView`] |
//! | POST | `/sessions/{id}/act` | [`ActRequest`] → [`StepDelta`] |
//! | GET | `/sessions/{id}/history` | CSV of [`HistoryRow`] |
//! | WS | `/sessions/{id}/stream` | `{"type":"state",…}` then `{"type":"step",…}` per act |
//!
//! An act must quote the pending `round`; a repeated submission is rejected
//! with 409 and does not advance the environment.

mod api;
mod error;
mod session;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;

pub use api::router;
pub use error::ServiceError;
pub use session::{
    ActRequest, CreateSession, EnvDescriptor, HistoryRow, LearnerOptions, Pending, Session, SessionFile, StateView,
    StepDelta, TransitionView,
};
pub use store::{SessionStore, StreamMessage};

/// Serves `store` on an already bound listener until the task is dropped.
pub async fn serve(listener: tokio::net::TcpListener, store: SessionStore) -> std::io::Result<()> {
    axum::serve(listener, router(store)).await
}

/// Binds `addr` and serves on a fresh runtime. Sessions persist under
/// `data_dir` when given.
pub fn serve_blocking(addr: &str, data_dir: Option<PathBuf>) -> Result<(), ServiceError> {
    let addr: SocketAddr = addr
        .parse()
        .map_err(|e| ServiceError::BadRequest(format!("bad address {addr:?}: {e}")))?;
    let store = match data_dir {
        Some(dir) => SessionStore::open(dir)?,
        None => SessionStore::new(),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        serve(listener, store).await
    })?;
    Ok(())
}
