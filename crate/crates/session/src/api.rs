use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::sync::broadcast::error::RecvError;

use crate::error::ServiceError;
use crate::session::{ActRequest, CreateSession, StateView, StepDelta};
use crate::store::{SessionStore, StreamMessage};

pub fn router(store: SessionStore) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/act", post(act))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(store)
}

async fn create(
    State(store): State<SessionStore>,
    Json(request): Json<CreateSession>,
) -> Result<(StatusCode, Json<StateView>), ServiceError> {
    Ok((StatusCode::CREATED, Json(store.create(request).await?)))
}

async fn state(State(store): State<SessionStore>, Path(id): Path<String>) -> Result<Json<StateView>, ServiceError> {
    Ok(Json(store.state(&id).await?))
}

async fn act(
    State(store): State<SessionStore>,
    Path(id): Path<String>,
    Json(request): Json<ActRequest>,
) -> Result<Json<StepDelta>, ServiceError> {
    Ok(Json(store.act(&id, request).await?))
}

async fn history(State(store): State<SessionStore>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let csv = store.history_csv(&id).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

async fn stream(
    State(store): State<SessionStore>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ServiceError> {
    let (view, updates) = store.subscribe(&id).await?;
    Ok(ws.on_upgrade(move |socket| forward(socket, view, updates)))
}

async fn forward(
    mut socket: WebSocket,
    view: StateView,
    mut updates: tokio::sync::broadcast::Receiver<std::sync::Arc<str>>,
) {
    let Ok(first) = serde_json::to_string(&StreamMessage::State(&view)) else {
        return;
    };
    if socket.send(Message::Text(first.into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            update = updates.recv() => match update {
                Ok(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        return;
                    }
                }
                // A slow client missed deltas; it must re-fetch the state.
                Err(RecvError::Lagged(_)) => {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
                Err(RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
