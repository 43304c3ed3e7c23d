//! WebSocket and HTTP front end.

use std::net::SocketAddr;
use std::sync::mpsc::Sender;
use std::sync::{Arc, RwLock};

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::engine::{Engine, EngineMsg, GatewayConfig, StateSnapshot};
use crate::hub::{ClientStream, Hub};
use crate::protocol::ClientCommand;

pub const DEFAULT_GATEWAY_PORT: u16 = 8860;

/// Close code sent to a client dropped for falling behind.
const CLOSE_POLICY: u16 = 1008;

#[derive(Clone)]
struct AppState {
    hub: Arc<Hub>,
    engine: Sender<EngineMsg>,
    snapshot: Arc<RwLock<StateSnapshot>>,
}

/// A running gateway.
pub struct Gateway {
    addr: SocketAddr,
    engine: Sender<EngineMsg>,
    engine_thread: Option<std::thread::JoinHandle<()>>,
    shutdown: Option<oneshot::Sender<()>>,
    server: Option<JoinHandle<()>>,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("{0}")]
    Setup(String),
    #[error("initial command {command:?} failed: {message}")]
    Initial { command: ClientCommand, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Gateway {
    /// Binds `addr`, applies `initial` commands in order and starts serving.
    pub async fn start(config: GatewayConfig, addr: SocketAddr, initial: Vec<ClientCommand>) -> Result<Self, GatewayError> {
        let hub = Arc::new(Hub::default());
        let engine_hub = hub.clone();
        // Initial commands may open sockets or read large files.
        let engine = tokio::task::spawn_blocking(move || {
            let mut engine = Engine::new(config, engine_hub).map_err(GatewayError::Setup)?;
            for command in initial {
                engine
                    .handle_command(command.clone())
                    .map_err(|(_, message)| GatewayError::Initial { command, message })?;
            }
            Ok::<_, GatewayError>(engine)
        })
        .await
        .map_err(|e| GatewayError::Setup(e.to_string()))??;
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let snapshot = engine.snapshot_handle();
        let (tx, rx) = std::sync::mpsc::channel();
        let engine_thread = std::thread::Builder::new()
            .name("gateway-engine".into())
            .spawn(move || engine.run(rx))?;
        let app = Router::new()
            .route("/ws", get(ws_handler))
            .route("/state", get(state_handler))
            .with_state(AppState {
                hub,
                engine: tx.clone(),
                snapshot,
            });
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let server = tokio::spawn(async move {
            let result = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = stop_rx.await;
                })
                .await;
            if let Err(e) = result {
                tracing::error!("server stopped: {e}");
            }
        });
        tracing::info!(%addr, "gateway listening");
        Ok(Self {
            addr,
            engine: tx,
            engine_thread: Some(engine_thread),
            shutdown: Some(stop_tx),
            server: Some(server),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Serves until the process is interrupted.
    pub async fn wait(mut self) {
        if let Some(server) = self.server.take() {
            let _ = server.await;
        }
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = self.engine.send(EngineMsg::Shutdown);
        if let Some(server) = self.server.take() {
            server.abort();
            let _ = server.await;
        }
        if let Some(t) = self.engine_thread.take() {
            let _ = tokio::task::spawn_blocking(move || t.join()).await;
        }
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        let _ = self.engine.send(EngineMsg::Shutdown);
        if let Some(server) = self.server.take() {
            server.abort();
        }
    }
}

async fn state_handler(State(app): State<AppState>) -> Json<StateSnapshot> {
    let mut snap = app.snapshot.read().unwrap().clone();
    snap.session.clients = app.hub.client_count();
    Json(snap)
}

async fn ws_handler(ws: WebSocketUpgrade, State(app): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client_session(socket, app))
}

async fn client_session(socket: WebSocket, app: AppState) {
    let sub = app.hub.subscribe();
    let id = sub.id;
    let _ = app.engine.send(EngineMsg::Connected(id));
    let (mut sink, mut incoming) = socket.split();
    let mut events = ClientStream::new(sub);
    let writer = tokio::spawn(async move {
        while let Some(out) = events.next().await {
            if sink.send(Message::Text(out.text.as_ref().into())).await.is_err() {
                return;
            }
        }
        let frame = CloseFrame {
            code: CLOSE_POLICY,
            reason: "event buffer overflow".into(),
        };
        let _ = sink.send(Message::Close(Some(frame))).await;
    });
    while let Some(Ok(msg)) = incoming.next().await {
        match msg {
            Message::Text(text) => {
                let _ = app.engine.send(EngineMsg::Command {
                    client: id,
                    text: text.to_string(),
                });
            }
            Message::Close(_) => break,
            _ => {}
        }
    }
    writer.abort();
    app.hub.unsubscribe(id);
    let _ = app.engine.send(EngineMsg::Disconnected(id));
}
