//! WebSocket snapshot broadcast plus a few HTTP endpoints.
//!
//! One task owns the [`Simulation`] and ticks it at the configured rate.
//! Clients send commands over `/ws`; every tick's snapshot goes to every
//! connected client.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use mirroreyes::scenario::TrialMetrics;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::MissedTickBehavior;

use crate::config::SimConfig;
use crate::headless::{ecdf_csv, metrics_csv};
use crate::protocol::{decode_command, encode_server, Command, ServerMessage};
use crate::sim::Simulation;

const BROADCAST_CAPACITY: usize = 256;
const COMMAND_CAPACITY: usize = 1024;

struct AppState {
    config: SimConfig,
    scenario_dir: Option<PathBuf>,
    commands: mpsc::Sender<Command>,
    snapshots: broadcast::Sender<Arc<str>>,
    trials: RwLock<Vec<TrialMetrics>>,
}

/// A running server; dropping it leaves the server running until the runtime stops.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<()>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = self.task.await;
    }
}

fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/ws", get(ws_handler))
        .route("/scenarios", get(scenarios))
        .route("/metrics.csv", get(metrics))
        .route("/ecdf.csv", get(ecdf))
        .route("/trials", get(trials))
        .route("/config", get(config))
        .with_state(state)
}

/// Binds `listener` and starts the tick loop.
pub async fn spawn(listener: TcpListener, config: SimConfig, scenario_dir: Option<PathBuf>) -> std::io::Result<ServerHandle> {
    let addr = listener.local_addr()?;
    let (cmd_tx, cmd_rx) = mpsc::channel(COMMAND_CAPACITY);
    let (snap_tx, _) = broadcast::channel(BROADCAST_CAPACITY);
    let state = Arc::new(AppState {
        config: config.clone(),
        scenario_dir: scenario_dir.clone(),
        commands: cmd_tx,
        snapshots: snap_tx.clone(),
        trials: RwLock::new(Vec::new()),
    });
    let (shutdown_tx, shutdown_rx) = oneshot::channel::<()>();
    let mut sim = Simulation::new(config);
    if let Some(dir) = scenario_dir {
        sim = sim.with_scenario_dir(dir);
    }
    let ticker = tokio::spawn(tick_loop(sim, cmd_rx, snap_tx, state.clone()));
    let app = router(state);
    let task = tokio::spawn(async move {
        let serve = axum::serve(listener, app).with_graceful_shutdown(async {
            let _ = shutdown_rx.await;
        });
        if let Err(e) = serve.await {
            tracing::error!("server error: {e}");
        }
        ticker.abort();
    });
    Ok(ServerHandle {
        addr,
        shutdown: Some(shutdown_tx),
        task,
    })
}

async fn tick_loop(
    mut sim: Simulation,
    mut commands: mpsc::Receiver<Command>,
    snapshots: broadcast::Sender<Arc<str>>,
    state: Arc<AppState>,
) {
    let period = Duration::from_secs_f64(sim.config().dt());
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Burst);
    loop {
        interval.tick().await;
        while let Ok(cmd) = commands.try_recv() {
            sim.enqueue(cmd);
        }
        let snap = sim.step();
        for w in &snap.warnings {
            tracing::warn!(tick = snap.tick, "{w}");
        }
        if !snap.finished.is_empty() {
            state.trials.write().expect("trial lock").extend(snap.finished.iter().cloned());
        }
        let text: Arc<str> = encode_server(&ServerMessage::Snapshot(Box::new(snap))).into();
        // No receivers is fine.
        let _ = snapshots.send(text);
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: Arc<AppState>) {
    let (mut sink, mut stream) = socket.split();
    let mut snapshots = state.snapshots.subscribe();
    let (reply_tx, mut reply_rx) = mpsc::channel::<String>(32);

    let writer = tokio::spawn(async move {
        loop {
            tokio::select! {
                snap = snapshots.recv() => match snap {
                    Ok(text) => {
                        if sink.send(Message::Text(text.as_ref().into())).await.is_err() {
                            break;
                        }
                    }
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        tracing::warn!("client lagged by {n} snapshots");
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                reply = reply_rx.recv() => match reply {
                    Some(text) => {
                        if sink.send(Message::Text(text.into())).await.is_err() {
                            break;
                        }
                    }
                    None => break,
                },
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = match decode_command(&text) {
            Ok(cmd) => match state.commands.send(cmd).await {
                Ok(()) => None,
                Err(_) => Some("simulation stopped".to_string()),
            },
            Err(e) => Some(e.to_string()),
        };
        if let Some(message) = reply {
            if reply_tx.send(encode_server(&ServerMessage::Error { message })).await.is_err() {
                break;
            }
        }
    }
    drop(reply_tx);
    writer.abort();
}

fn csv(body: String) -> Response {
    ([(header::CONTENT_TYPE, "text/csv")], body).into_response()
}

async fn metrics(State(state): State<Arc<AppState>>) -> Response {
    csv(metrics_csv(&state.trials.read().expect("trial lock")))
}

async fn ecdf(State(state): State<Arc<AppState>>) -> Response {
    csv(ecdf_csv(&state.trials.read().expect("trial lock")))
}

async fn trials(State(state): State<Arc<AppState>>) -> Json<Vec<TrialMetrics>> {
    Json(state.trials.read().expect("trial lock").clone())
}

async fn config(State(state): State<Arc<AppState>>) -> Json<SimConfig> {
    Json(state.config.clone())
}

/// File names of `*.json` scenarios in the scenario directory.
async fn scenarios(State(state): State<Arc<AppState>>) -> Response {
    let Some(dir) = &state.scenario_dir else {
        return Json(Vec::<String>::new()).into_response();
    };
    match std::fs::read_dir(dir) {
        Ok(entries) => {
            let mut names: Vec<String> = entries
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.ends_with(".json"))
                .collect();
            names.sort();
            Json(names).into_response()
        }
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}
