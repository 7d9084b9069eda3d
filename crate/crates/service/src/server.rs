//! Real-time session loops and the WebSocket / newline-delimited TCP
//! transports.

use std::collections::HashMap;
use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use emotemesh::Frame;
use futures_util::{Sink, SinkExt, Stream, StreamExt};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::handshake::server::{Request, Response};
use tokio_tungstenite::tungstenite::Message;

use crate::protocol::{check_fps, ClientMessage, Payload, ServerMessage};
use crate::session::{Assets, Session, SessionConfig, SessionError};

pub const DEFAULT_SESSION: &str = "default";

enum Inbound {
    Command { reply: mpsc::UnboundedSender<ServerMessage>, cmd: ClientMessage },
    Shutdown,
}

/// A cheap handle onto a running session loop.
#[derive(Clone)]
pub struct SessionHandle {
    id: String,
    fps: f64,
    payload: Payload,
    assets: Option<Arc<Assets>>,
    commands: mpsc::UnboundedSender<Inbound>,
    frames: watch::Receiver<Option<Arc<Frame>>>,
}

impl SessionHandle {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn assets(&self) -> Option<&Arc<Assets>> {
        self.assets.as_ref()
    }

    /// Time of the latest emitted frame.
    pub fn clock(&self) -> f64 {
        self.frames.borrow().as_ref().map_or(0.0, |f| f.t)
    }

    /// Queues an engine command; the reply (ack or error) arrives on `reply`.
    pub fn send(&self, cmd: ClientMessage, reply: mpsc::UnboundedSender<ServerMessage>) -> bool {
        self.commands.send(Inbound::Command { reply, cmd }).is_ok()
    }

    /// Unset fields fall back to the session's frame rate and payload.
    pub fn subscribe(&self, fps: Option<f64>, payload: Option<Payload>) -> Result<Subscription, String> {
        let fps = check_fps(fps.unwrap_or(self.fps))?;
        let payload = payload.unwrap_or(self.payload);
        if payload.wants_features() && self.assets.is_none() {
            return Err("payload `features` requires a rig".into());
        }
        let mut frames = self.frames.clone();
        frames.mark_changed();
        Ok(Subscription { frames, fps, session_fps: self.fps, payload, next: 0.0, last: None })
    }
}

/// A per-subscriber view of the frame stream: downsampled to its own rate,
/// always the newest frame, never a repeat.
pub struct Subscription {
    frames: watch::Receiver<Option<Arc<Frame>>>,
    fps: f64,
    session_fps: f64,
    payload: Payload,
    next: f64,
    last: Option<f64>,
}

impl Subscription {
    pub fn payload(&self) -> Payload {
        self.payload
    }

    /// Waits for the next frame due for this subscriber. `None` once the
    /// session has stopped.
    pub async fn next(&mut self) -> Option<Arc<Frame>> {
        loop {
            self.frames.changed().await.ok()?;
            let Some(frame) = self.frames.borrow_and_update().clone() else { continue };
            if self.last.is_some_and(|l| frame.t <= l) {
                continue;
            }
            if frame.t + 0.5 / self.session_fps < self.next {
                continue;
            }
            self.last = Some(frame.t);
            // frame times are rounded to whole nanoseconds
            self.next = ((frame.t * self.fps + 1e-6).floor() + 1.0) / self.fps;
            return Some(frame);
        }
    }

    pub async fn next_message(&mut self) -> Option<ServerMessage> {
        let frame = self.next().await?;
        Some(ServerMessage::frame(&frame, self.payload))
    }
}

fn spawn_session(
    id: String,
    config: SessionConfig,
    log: Option<PathBuf>,
) -> Result<(SessionHandle, JoinHandle<()>), SessionError> {
    let mut session = Session::start(id.clone(), config.clone())?;
    if let Some(path) = &log {
        session.log_to(path)?;
    }
    let (tx, mut rx) = mpsc::unbounded_channel::<Inbound>();
    let (frames_tx, frames_rx) = watch::channel(None);
    let period = Duration::from_secs_f64(1.0 / config.fps);
    let task = tokio::spawn(async move {
        let mut replies: HashMap<u64, mpsc::UnboundedSender<ServerMessage>> = HashMap::new();
        let mut next_token = 0u64;
        let mut ticker = tokio::time::interval(period);
        loop {
            tokio::select! {
                biased;
                msg = rx.recv() => match msg {
                    Some(Inbound::Command { reply, cmd }) => {
                        next_token += 1;
                        match session.enqueue(next_token, cmd) {
                            Ok(()) => {
                                replies.insert(next_token, reply);
                            }
                            Err(msg) => {
                                let _ = reply.send(ServerMessage::error(msg));
                            }
                        }
                    }
                    Some(Inbound::Shutdown) | None => break,
                },
                _ = ticker.tick() => match session.step() {
                    Ok(step) => {
                        for (token, msg) in step.replies {
                            if let Some(r) = replies.remove(&token) {
                                let _ = r.send(msg);
                            }
                        }
                        frames_tx.send_replace(Some(Arc::new(step.frame)));
                    }
                    Err(e) => {
                        tracing::error!(session = %session.id(), "step failed: {e}");
                        break;
                    }
                },
            }
        }
        if let Err(e) = session.flush() {
            tracing::error!(session = %session.id(), "flushing command log: {e}");
        }
        tracing::info!(session = %session.id(), frames = session.frames_emitted(), "session stopped");
    });
    let handle = SessionHandle {
        id,
        fps: config.fps,
        payload: config.payload,
        assets: config.assets.clone(),
        commands: tx,
        frames: frames_rx,
    };
    Ok((handle, task))
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

type Running = (SessionHandle, Option<JoinHandle<()>>);

/// Owns every session; sessions are created on first connection.
pub struct Server {
    template: SessionConfig,
    log_dir: Option<PathBuf>,
    sessions: Mutex<HashMap<String, Running>>,
}

impl Server {
    pub fn new(template: SessionConfig, log_dir: Option<PathBuf>) -> Result<Arc<Server>, SessionError> {
        template.validate()?;
        if let Some(dir) = &log_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Arc::new(Server { template, log_dir, sessions: Mutex::new(HashMap::new()) }))
    }

    /// The running session `id`, started if needed.
    pub fn session(&self, id: &str) -> Result<SessionHandle, SessionError> {
        if !valid_session_id(id) {
            return Err(SessionError::SessionId(id.to_string()));
        }
        let mut sessions = self.sessions.lock().expect("session map lock");
        if let Some((h, _)) = sessions.get(id) {
            return Ok(h.clone());
        }
        let log = self.log_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")));
        let (handle, task) = spawn_session(id.to_string(), self.template.clone(), log)?;
        tracing::info!(session = id, "session started");
        sessions.insert(id.to_string(), (handle.clone(), Some(task)));
        Ok(handle)
    }

    /// Stops every session loop and waits for command logs to be flushed.
    pub async fn shutdown(&self) {
        let tasks: Vec<JoinHandle<()>> = {
            let mut sessions = self.sessions.lock().expect("session map lock");
            sessions
                .values_mut()
                .filter_map(|(h, task)| {
                    let _ = h.commands.send(Inbound::Shutdown);
                    task.take()
                })
                .collect()
        };
        for t in tasks {
            let _ = t.await;
        }
    }

    pub async fn serve_ws(self: Arc<Self>, listener: TcpListener) {
        loop {
            let Ok((stream, peer)) = listener.accept().await else { continue };
            let server = self.clone();
            tokio::spawn(async move {
                if let Err(e) = server.ws_connection(stream).await {
                    tracing::debug!(%peer, "websocket connection ended: {e}");
                }
            });
        }
    }

    pub async fn serve_tcp(self: Arc<Self>, listener: TcpListener) {
        loop {
            let Ok((stream, peer)) = listener.accept().await else { continue };
            let server = self.clone();
            tokio::spawn(async move {
                if let Err(e) = server.tcp_connection(stream).await {
                    tracing::debug!(%peer, "tcp connection ended: {e}");
                }
            });
        }
    }

    #[allow(clippy::result_large_err)]
    async fn ws_connection(&self, stream: TcpStream) -> io::Result<()> {
        let mut path = String::new();
        let ws = tokio_tungstenite::accept_hdr_async(stream, |req: &Request, resp: Response| {
            path = req.uri().path().to_string();
            Ok(resp)
        })
        .await
        .map_err(io::Error::other)?;
        let id = match path.trim_matches('/') {
            "" => DEFAULT_SESSION,
            id => id,
        };
        let (sink, stream) = ws.split();
        let incoming = stream.filter_map(|m| async move {
            match m {
                Ok(Message::Text(t)) => Some(Ok(t.to_string())),
                Ok(Message::Binary(b)) => Some(Ok(String::from_utf8_lossy(&b).into_owned())),
                Ok(Message::Close(_)) => Some(Err(io::Error::from(io::ErrorKind::ConnectionAborted))),
                Ok(_) => None,
                Err(e) => Some(Err(io::Error::other(e))),
            }
        });
        let outgoing = sink.sink_map_err(io::Error::other).with(|s: String| async move { Ok(Message::Text(s)) });
        self.connection(id, Box::pin(incoming), Box::pin(outgoing)).await
    }

    async fn tcp_connection(&self, stream: TcpStream) -> io::Result<()> {
        let (read, write) = stream.into_split();
        let lines = BufReader::new(read).lines();
        let incoming = futures_util::stream::unfold(lines, |mut lines| async move {
            match lines.next_line().await {
                Ok(Some(l)) => Some((Ok(l), lines)),
                Ok(None) => None,
                Err(e) => Some((Err(e), lines)),
            }
        })
        .filter(|l| std::future::ready(!matches!(l, Ok(s) if s.trim().is_empty())));
        let outgoing = futures_util::sink::unfold(write, |mut w, s: String| async move {
            w.write_all(s.as_bytes()).await?;
            w.write_all(b"\n").await?;
            Ok::<_, io::Error>(w)
        });
        self.connection(DEFAULT_SESSION, Box::pin(incoming), Box::pin(outgoing)).await
    }

    /// Transport-independent connection loop.
    pub async fn connection<I, O>(&self, id: &str, mut incoming: I, mut outgoing: O) -> io::Result<()>
    where
        I: Stream<Item = io::Result<String>> + Unpin,
        O: Sink<String, Error = io::Error> + Unpin,
    {
        let handle = match self.session(id) {
            Ok(h) => h,
            Err(e) => {
                outgoing.send(ServerMessage::error(e.to_string()).to_json()).await?;
                return outgoing.close().await;
            }
        };
        let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<ServerMessage>();
        let mut sub: Option<Subscription> = None;
        loop {
            tokio::select! {
                biased;
                Some(reply) = reply_rx.recv() => outgoing.send(reply.to_json()).await?,
                text = incoming.next() => {
                    let Some(text) = text else { return Ok(()) };
                    let text = text?;
                    let out = match ClientMessage::parse(&text) {
                        Err(msg) => Some(ServerMessage::error(msg)),
                        Ok(ClientMessage::Subscribe { fps, payload }) => match handle.subscribe(fps, payload) {
                            Ok(s) => {
                                sub = Some(s);
                                Some(ServerMessage::Ack { t: handle.clock() })
                            }
                            Err(msg) => Some(ServerMessage::error(msg)),
                        },
                        Ok(ClientMessage::GetAssets {}) => match handle.assets() {
                            Some(a) => {
                                outgoing.send(a.message().to_string()).await?;
                                None
                            }
                            None => Some(ServerMessage::error("no rig loaded")),
                        },
                        Ok(cmd) => {
                            if !handle.send(cmd, reply_tx.clone()) {
                                Some(ServerMessage::error("session stopped"))
                            } else {
                                None
                            }
                        }
                    };
                    if let Some(m) = out {
                        outgoing.send(m.to_json()).await?;
                    }
                }
                msg = next_message(&mut sub) => match msg {
                    Some(m) => outgoing.send(m.to_json()).await?,
                    None => {
                        outgoing.send(ServerMessage::error("session stopped").to_json()).await?;
                        return outgoing.close().await;
                    }
                },
            }
        }
    }
}

async fn next_message(sub: &mut Option<Subscription>) -> Option<ServerMessage> {
    match sub {
        Some(s) => s.next_message().await,
        None => std::future::pending().await,
    }
}

pub struct ServeConfig {
    pub session: SessionConfig,
    pub ws_addr: SocketAddr,
    pub tcp_addr: Option<SocketAddr>,
    pub log_dir: Option<PathBuf>,
}

/// Addresses actually bound, useful when ports were 0.
#[derive(Debug, Clone, Copy)]
pub struct Bound {
    pub ws: SocketAddr,
    pub tcp: Option<SocketAddr>,
}

/// Binds the listeners, reports the bound addresses through `on_bound`, and
/// serves until `shutdown` resolves. Command logs are flushed before return.
pub async fn serve(
    config: ServeConfig,
    on_bound: impl FnOnce(Bound),
    shutdown: impl Future<Output = ()>,
) -> Result<(), SessionError> {
    let server = Server::new(config.session, config.log_dir)?;
    let ws = TcpListener::bind(config.ws_addr).await?;
    let tcp = match config.tcp_addr {
        Some(a) => Some(TcpListener::bind(a).await?),
        None => None,
    };
    on_bound(Bound { ws: ws.local_addr()?, tcp: tcp.as_ref().map(|l| l.local_addr()).transpose()? });
    let ws_task = tokio::spawn(server.clone().serve_ws(ws));
    let tcp_task = tcp.map(|l| tokio::spawn(server.clone().serve_tcp(l)));
    shutdown.await;
    ws_task.abort();
    if let Some(t) = tcp_task {
        t.abort();
    }
    server.shutdown().await;
    Ok(())
}
