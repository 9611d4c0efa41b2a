//! WebSocket session server. One simulation per process; a single stepping
//! task owns the session, clients feed it through an ordered queue and read
//! state snapshots from a broadcast channel.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::sync::{broadcast, mpsc, watch};
use vfix::sim::session::{error_message, state_message};
use vfix::sim::{ClientMessage, Scenario, Session};

/// Steps between periodic trace flushes.
const FLUSH_EVERY: usize = 1000;

pub struct ServeOptions {
    pub port: u16,
    pub trace: Option<PathBuf>,
    pub rate: f64,
    pub wait: bool,
}

#[derive(Clone)]
struct Shared {
    scene: Arc<String>,
    states: broadcast::Sender<Arc<String>>,
    inbox: mpsc::UnboundedSender<ClientMessage>,
    connected: watch::Sender<bool>,
    flush: Arc<AtomicBool>,
}

pub async fn serve(scenario: Scenario, opts: ServeOptions) -> anyhow::Result<()> {
    let dt = scenario.dt;
    let mut session = Session::new(scenario, opts.trace.as_deref())?;
    let scene = Arc::new(session.scene().to_string());
    let (states, _) = broadcast::channel(8192);
    let (inbox, mut queue) = mpsc::unbounded_channel::<ClientMessage>();
    let (connected, mut started) = watch::channel(!opts.wait);
    let flush = Arc::new(AtomicBool::new(false));
    let shared = Shared { scene, states: states.clone(), inbox, connected, flush: flush.clone() };

    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], opts.port))).await?;
    let addr = listener.local_addr()?;
    println!("listening on ws://{addr}/");
    log::info!("session server on {addr}");

    let stepper = tokio::spawn(async move {
        while !*started.borrow() {
            if started.changed().await.is_err() {
                return Ok::<_, anyhow::Error>(());
            }
        }
        let period = if opts.rate > 0.0 { Some(Duration::from_secs_f64(dt / opts.rate)) } else { None };
        let mut tick = period.map(|p| {
            let mut i = tokio::time::interval(p);
            i.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            i
        });
        loop {
            match tick.as_mut() {
                Some(t) => {
                    t.tick().await;
                }
                None => tokio::task::yield_now().await,
            }
            if flush.swap(false, Ordering::Relaxed) || session.engine().step_index % FLUSH_EVERY == 0 {
                session.flush()?;
            }
            while let Ok(msg) = queue.try_recv() {
                session.apply(msg);
            }
            match session.step() {
                Ok(Some(rec)) => {
                    let _ = states.send(Arc::new(state_message(&rec)));
                }
                Ok(None) => break,
                Err(e) => {
                    let _ = states.send(Arc::new(error_message(&format!("simulation aborted: {e}"))));
                    session.flush()?;
                    return Err(e.into());
                }
            }
        }
        session.flush()?;
        let _ = states.send(Arc::new(serde_json::json!({"type": "done"}).to_string()));
        log::info!("scenario finished, trace flushed");
        Ok(())
    });

    let app = Router::new().route("/", get(ws_handler)).with_state(shared);
    let server = axum::serve(listener, app).with_graceful_shutdown(async {
        let _ = tokio::signal::ctrl_c().await;
    });
    tokio::select! {
        r = server => r?,
        r = stepper => {
            r??;
            // Keep serving the final state until interrupted.
            tokio::signal::ctrl_c().await?;
        }
    }
    Ok(())
}

async fn ws_handler(ws: WebSocketUpgrade, State(shared): State<Shared>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, shared))
}

async fn client(socket: WebSocket, shared: Shared) {
    let (mut tx, mut rx) = socket.split();
    let mut states = shared.states.subscribe();
    if tx.send(Message::Text(shared.scene.as_str().into())).await.is_err() {
        return;
    }
    shared.connected.send_replace(true);
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<String>();
    let forward = async {
        loop {
            tokio::select! {
                s = states.recv() => match s {
                    Ok(text) => if tx.send(Message::Text(text.as_str().into())).await.is_err() { break },
                    Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("client lagged by {n} states"),
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                r = reply_rx.recv() => match r {
                    Some(text) => if tx.send(Message::Text(text.into())).await.is_err() { break },
                    None => break,
                },
            }
        }
    };
    let receive = async {
        while let Some(Ok(msg)) = rx.next().await {
            match msg {
                Message::Text(text) => match ClientMessage::parse(text.as_str()) {
                    Ok(m) => {
                        let _ = shared.inbox.send(m);
                    }
                    Err(e) => {
                        let _ = reply_tx.send(error_message(&e));
                    }
                },
                Message::Close(_) => break,
                _ => {}
            }
        }
    };
    tokio::select! {
        _ = forward => {}
        _ = receive => {}
    }
    shared.flush.store(true, Ordering::Relaxed);
    log::info!("client disconnected");
}
