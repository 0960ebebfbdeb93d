//! Live service: one engine task stepping a [`LiveSession`], a broadcast
//! fan-out of snapshot frames, and the HTTP/websocket endpoints.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{anyhow, Context};
use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde_json::json;
use tokio::sync::{broadcast, mpsc};
use tower_http::services::ServeDir;

use iwt_core::sim::engine::{LWC_GUARD, MVD_GUARD};
use iwt_core::sim::live::{ClientMessage, LiveSession, ServerMessage, Tick, PROTOCOL_VERSION};
use iwt_core::sim::scenario::Initial;

use crate::commands::{align_step, load_scenario, plant_config, CmdResult};
use crate::Failure;

pub struct ServeArgs {
    pub config: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub host: String,
    pub port: u16,
    pub rate: f64,
    pub accelerated: bool,
    pub decimate: u64,
    pub static_dir: Option<PathBuf>,
}

/// A serialized server frame. Snapshots carry their `(run, step)` key so
/// each client can drop anything not newer than what it already has.
#[derive(Clone)]
struct Frame {
    key: Option<(u64, u64)>,
    json: Arc<str>,
}

struct Shared {
    session: Mutex<LiveSession>,
    frames: broadcast::Sender<Frame>,
    config_json: serde_json::Value,
}

type AppState = Arc<Shared>;

fn encode(msg: &ServerMessage) -> Arc<str> {
    serde_json::to_string(msg).expect("server messages serialize").into()
}

fn snapshot_frame(session: &LiveSession) -> Frame {
    let row = session.snapshot();
    let key = Some((session.run_id(), row.step));
    Frame { key, json: encode(&ServerMessage::snapshot(session.run_id(), row)) }
}

pub fn run(args: ServeArgs) -> CmdResult {
    if !(args.rate.is_finite() && args.rate > 0.0) {
        return Err(Failure::usage(anyhow!("--rate must be positive")));
    }
    if args.decimate == 0 {
        return Err(Failure::usage(anyhow!("--decimate must be at least 1")));
    }
    let mut cfg = plant_config(args.config.as_deref())?;
    let session = match &args.scenario {
        Some(path) => {
            let scenario = load_scenario(path)?;
            align_step(&mut cfg, &scenario);
            LiveSession::scripted(cfg, scenario)
        }
        None => LiveSession::new(cfg, Initial::default()),
    }
    .map_err(|e| Failure::usage(anyhow!(e)))?;

    let runtime = tokio::runtime::Runtime::new().context("starting runtime").map_err(Failure::Usage)?;
    runtime.block_on(serve(session, args))
}

fn config_document(session: &LiveSession) -> serde_json::Value {
    let cfg = session.config();
    json!({
        "version": PROTOCOL_VERSION,
        "n_conduits": cfg.n_conduits,
        "dt_s": cfg.dt_s,
        "units": {
            "temperature": "°C",
            "water_flow": "L/h",
            "air_flow": "L/min",
            "pressure": "bar",
            "lwc": "g/m³",
            "mvd": "µm",
            "velocity": "m/s",
            "power": "W",
        },
        "limits": {
            "water_heater_max_w": cfg.water_heater_max_w,
            "air_heater_max_w": cfg.air_heater_max_w,
            "lwc_guard_g_m3": [0.0, LWC_GUARD],
            "mvd_guard_um": [MVD_GUARD.0, MVD_GUARD.1],
        },
        "plant": cfg,
    })
}

async fn serve(session: LiveSession, args: ServeArgs) -> CmdResult {
    let addr = format!("{}:{}", args.host, args.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .with_context(|| format!("cannot bind {addr}"))
        .map_err(Failure::Usage)?;
    let local: SocketAddr = listener.local_addr().map_err(|e| Failure::usage(anyhow!(e)))?;

    let (frames, _) = broadcast::channel(1024);
    let state = Arc::new(Shared {
        config_json: config_document(&session),
        session: Mutex::new(session),
        frames,
    });

    let mut app = Router::new()
        .route("/state", get(get_state))
        .route("/config", get(get_config))
        .route("/live", get(live));
    app = match &args.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(index)),
    };
    let app = app.with_state(state.clone());

    let period = if args.accelerated { None } else { Some(Duration::from_secs_f64(1.0 / args.rate)) };
    let engine = tokio::spawn(engine_loop(state, period, args.decimate));

    println!("listening on http://{local}");
    log::info!("listening on http://{local}");
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    engine.abort();
    result.context("server error").map_err(Failure::Usage)
}

async fn engine_loop(state: AppState, period: Option<Duration>, decimate: u64) {
    let mut interval = period.map(|p| {
        let mut i = tokio::time::interval(p);
        i.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        i
    });
    // Run id for which a stop notice was already sent.
    let mut stopped_run: Option<u64> = None;
    loop {
        match interval.as_mut() {
            Some(i) => {
                i.tick().await;
            }
            None => tokio::task::yield_now().await,
        }
        let frame = {
            let mut session = state.session.lock().expect("session lock");
            let run = session.run_id();
            match session.tick() {
                Tick::Stepped(row) if row.step % decimate == 0 => Some(snapshot_frame(&session)),
                Tick::Stepped(_) | Tick::Paused => None,
                Tick::Finished | Tick::Halted(_) if stopped_run == Some(run) => None,
                Tick::Finished => {
                    stopped_run = Some(run);
                    let step = session.simulator().step_index();
                    Some(Frame { key: None, json: encode(&ServerMessage::Stopped { step, reason: "scenario finished".into() }) })
                }
                Tick::Halted(e) => {
                    stopped_run = Some(run);
                    log::warn!("{e}");
                    let step = e.step().unwrap_or_else(|| session.simulator().step_index());
                    Some(Frame { key: None, json: encode(&ServerMessage::Stopped { step, reason: e.to_string() }) })
                }
            }
        };
        if let Some(f) = frame {
            let _ = state.frames.send(f);
        }
        if interval.is_none() && stopped_run.is_some() {
            // Nothing more to compute until a reset; avoid spinning.
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }
}

async fn index() -> Html<&'static str> {
    Html(include_str!("../assets/index.html"))
}

async fn get_state(State(state): State<AppState>) -> Response {
    let session = state.session.lock().expect("session lock");
    let body = ServerMessage::snapshot(session.run_id(), session.snapshot());
    Json(body).into_response()
}

async fn get_config(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(state.config_json.clone())
}

async fn live(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Message>();

    let mut frames = state.frames.subscribe();
    let first = snapshot_frame(&state.session.lock().expect("session lock"));
    let mut last = first.key;
    let _ = tx.send(Message::Text(first.json.as_ref().into()));

    let writer = tokio::spawn(async move {
        while let Some(m) = rx.recv().await {
            let closing = matches!(m, Message::Close(_));
            if sink.send(m).await.is_err() || closing {
                break;
            }
        }
    });

    let fwd = tx.clone();
    let forwarder = tokio::spawn(async move {
        loop {
            match frames.recv().await {
                Ok(f) => {
                    if let Some(key) = f.key {
                        if last.is_some_and(|l| key <= l) {
                            continue;
                        }
                        last = Some(key);
                    }
                    if fwd.send(Message::Text(f.json.as_ref().into())).is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("client lagged by {n} frames"),
                Err(broadcast::error::RecvError::Closed) => break,
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => continue,
            Message::Binary(_) => {
                violation(&tx, "binary frames are not part of the protocol".into());
                break;
            }
        };
        match serde_json::from_str::<ClientMessage>(text.as_str()) {
            Ok(cmd) => {
                let reply = state.session.lock().expect("session lock").handle(cmd);
                let _ = tx.send(Message::Text(encode(&reply).as_ref().into()));
            }
            Err(e) => {
                violation(&tx, format!("malformed message: {e}"));
                break;
            }
        }
    }
    forwarder.abort();
    drop(tx);
    let _ = tokio::time::timeout(Duration::from_secs(2), writer).await;
}

/// Sends an error frame followed by a policy-violation close.
fn violation(tx: &mpsc::UnboundedSender<Message>, message: String) {
    let _ = tx.send(Message::Text(encode(&ServerMessage::Error { id: None, message: message.clone() }).as_ref().into()));
    let _ = tx.send(Message::Close(Some(CloseFrame {
        code: axum::extract::ws::close_code::POLICY,
        reason: "protocol violation".into(),
    })));
}
