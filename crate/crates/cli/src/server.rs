//! Live session over WebSocket.
//!
//! One control thread owns the [`Session`]. Each client gets its own thread
//! and a bounded outgoing queue that drops its oldest message when full, so
//! a slow viewer never stalls the control loop. Commands travel to the
//! control thread over a channel and are applied between ticks. The first
//! client to connect holds command authority until it disconnects; everyone
//! else is a viewer.

use anyhow::Context;
use singavoid_core::log_io::write_jsonl;
use singavoid_core::telemetry::{parse_command, Command, CommandMessage, ServerMessage, TelemetryFrame, TELEMETRY_SCHEMA_VERSION};
use singavoid_core::{LogRecord, ScenarioConfig, Session};
use std::collections::VecDeque;
use std::io::{BufWriter, ErrorKind};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};
use tungstenite::{Message, WebSocket};

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// Pace ticks at the control period. Without it the session runs as fast as it can.
    pub realtime: bool,
    /// Outgoing messages buffered per client before the oldest are dropped.
    pub queue_capacity: usize,
    /// Directory for the session log, written when the scenario finishes.
    pub out: Option<PathBuf>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            realtime: true,
            queue_capacity: 1024,
            out: None,
        }
    }
}

/// Bounded drop-oldest queue of serialized messages for one client.
struct Outbox {
    queue: Mutex<VecDeque<String>>,
    capacity: usize,
    dropped: AtomicU64,
}

impl Outbox {
    fn new(capacity: usize) -> Self {
        Self {
            queue: Mutex::new(VecDeque::with_capacity(capacity.min(4096))),
            capacity: capacity.max(1),
            dropped: AtomicU64::new(0),
        }
    }

    fn push(&self, msg: String) {
        let mut q = self.queue.lock().unwrap();
        if q.len() >= self.capacity {
            q.pop_front();
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
        q.push_back(msg);
    }

    fn drain(&self) -> Vec<String> {
        self.queue.lock().unwrap().drain(..).collect()
    }
}

struct SessionInfo {
    scenario: String,
    control_period: f64,
    decimation: u32,
}

struct Shared {
    clients: Mutex<Vec<(u64, Arc<Outbox>)>>,
    authority: Mutex<Option<u64>>,
    info: Mutex<SessionInfo>,
    next_id: AtomicU64,
    stop: AtomicBool,
    queue_capacity: usize,
}

impl Shared {
    fn broadcast(&self, msg: &ServerMessage) {
        let text = msg.to_json();
        for (_, outbox) in self.clients.lock().unwrap().iter() {
            outbox.push(text.clone());
        }
    }

    fn send_to(&self, client: u64, msg: &ServerMessage) {
        if let Some((_, outbox)) = self.clients.lock().unwrap().iter().find(|(id, _)| *id == client) {
            outbox.push(msg.to_json());
        }
    }

    fn set_info(&self, cfg: &ScenarioConfig) {
        *self.info.lock().unwrap() = SessionInfo {
            scenario: cfg.name.clone(),
            control_period: cfg.control_period,
            decimation: cfg.telemetry.decimation,
        };
    }
}

struct Inbound {
    client: u64,
    message: CommandMessage,
}

/// A running server. Dropping the handle does not stop it; call [`ServerHandle::shutdown`].
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        self.wait();
    }
}

/// Binds the listener and starts the control and accept threads.
pub fn spawn(config: ScenarioConfig, addr: impl ToSocketAddrs, options: ServeOptions) -> anyhow::Result<ServerHandle> {
    let session = Session::new(config).context("cannot start session")?;
    let listener = TcpListener::bind(addr).context("cannot bind telemetry port")?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let shared = Arc::new(Shared {
        clients: Mutex::new(Vec::new()),
        authority: Mutex::new(None),
        info: Mutex::new(SessionInfo {
            scenario: String::new(),
            control_period: 0.0,
            decimation: 1,
        }),
        next_id: AtomicU64::new(1),
        stop: AtomicBool::new(false),
        queue_capacity: options.queue_capacity,
    });
    shared.set_info(session.config());
    let (tx, rx) = mpsc::channel();

    let control = {
        let shared = shared.clone();
        thread::Builder::new()
            .name("control".into())
            .spawn(move || ControlLoop::new(session, rx, shared, options).run())?
    };
    let acceptor = {
        let shared = shared.clone();
        thread::Builder::new()
            .name("accept".into())
            .spawn(move || accept_loop(listener, shared, tx))?
    };
    log::info!("serving on ws://{local}");
    Ok(ServerHandle {
        addr: local,
        shared,
        threads: vec![control, acceptor],
    })
}

struct ControlLoop {
    session: Session,
    rx: Receiver<Inbound>,
    shared: Arc<Shared>,
    options: ServeOptions,
    paused: bool,
    pending: Vec<Inbound>,
    finished_sent: bool,
    records: Vec<LogRecord>,
}

impl ControlLoop {
    fn new(session: Session, rx: Receiver<Inbound>, shared: Arc<Shared>, options: ServeOptions) -> Self {
        Self {
            session,
            rx,
            shared,
            options,
            paused: false,
            pending: Vec::new(),
            finished_sent: false,
            records: Vec::new(),
        }
    }

    fn run(mut self) {
        let mut next = Instant::now();
        while !self.shared.stop.load(Ordering::SeqCst) {
            if self.paused || self.session.is_finished() {
                if self.session.is_finished() && !self.finished_sent {
                    self.finish();
                }
                match self.rx.recv_timeout(Duration::from_millis(20)) {
                    Ok(m) => self.handle(m),
                    Err(RecvTimeoutError::Timeout) => {}
                    Err(RecvTimeoutError::Disconnected) => return,
                }
                next = Instant::now();
                continue;
            }
            if self.options.realtime {
                let period = Duration::from_secs_f64(self.session.config().control_period);
                let now = Instant::now();
                if next > now {
                    thread::sleep(next - now);
                } else if now - next > period * 10 {
                    // fell far behind (debugger, suspended machine): do not burst
                    next = now;
                }
                next += period;
            }
            loop {
                match self.rx.try_recv() {
                    Ok(m) => self.handle(m),
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => return,
                }
            }
            if self.paused || self.session.is_finished() {
                continue;
            }
            self.tick();
        }
    }

    fn tick(&mut self) {
        let record = match self.session.step() {
            Ok(r) => r,
            Err(e) => {
                log::error!("{e}");
                return;
            }
        };
        let decimation = u64::from(self.session.config().telemetry.decimation.max(1));
        if record.tick % decimation == 0 || !record.events.is_empty() {
            self.shared.broadcast(&ServerMessage::Telemetry(TelemetryFrame::from(&record)));
        }
        if self.options.out.is_some() {
            self.records.push(record);
        }
    }

    fn finish(&mut self) {
        self.finished_sent = true;
        self.shared.broadcast(&ServerMessage::Finished {
            tick: self.session.tick(),
            fault: self.session.fault().map(str::to_string),
        });
        if let Some(dir) = &self.options.out {
            if let Err(e) = write_log(dir, &self.records) {
                log::error!("cannot write session log: {e:#}");
            }
        }
    }

    fn ack(&self, client: u64, command: &Command, applied: Option<singavoid_core::ForceVector>) {
        self.shared.send_to(
            client,
            &ServerMessage::Ack {
                command: command.name().into(),
                tick: self.session.tick(),
                applied,
            },
        );
    }

    fn error(&self, client: u64, message: String) {
        self.shared.send_to(client, &ServerMessage::Error { message });
    }

    fn restart(&mut self, session: Session) {
        self.session = session;
        self.shared.set_info(self.session.config());
        self.finished_sent = false;
        self.records.clear();
    }

    fn handle(&mut self, inbound: Inbound) {
        let Inbound { client, message } = inbound;
        match &message.command {
            Command::Pause => {
                self.paused = true;
                self.ack(client, &message.command, None);
            }
            Command::Resume => {
                self.paused = false;
                for queued in std::mem::take(&mut self.pending) {
                    self.handle(queued);
                }
                self.ack(client, &message.command, None);
            }
            _ if self.paused => self.pending.push(Inbound { client, message }),
            Command::Force(f) => {
                let applied = self.session.set_force(*f);
                self.ack(client, &message.command, Some(applied));
            }
            Command::Reset => match Session::new(self.session.config().clone()) {
                Ok(session) => {
                    self.restart(session);
                    self.ack(client, &message.command, None);
                }
                Err(e) => self.error(client, format!("reset failed: {e}")),
            },
            Command::LoadScenario(cfg) => match Session::new((**cfg).clone()) {
                Ok(session) => {
                    self.restart(session);
                    self.ack(client, &message.command, None);
                }
                Err(e) => self.error(client, format!("cannot load scenario: {e}")),
            },
        }
    }
}

fn write_log(dir: &std::path::Path, records: &[LogRecord]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("session.jsonl");
    let tmp = dir.join("session.jsonl.part");
    write_jsonl(BufWriter::new(std::fs::File::create(&tmp)?), records)?;
    std::fs::rename(&tmp, &path)?;
    log::info!("session log written to {}", path.display());
    Ok(())
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, tx: Sender<Inbound>) {
    while !shared.stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let shared = shared.clone();
                let tx = tx.clone();
                let spawned = thread::Builder::new()
                    .name(format!("client {peer}"))
                    .spawn(move || serve_client(stream, shared, tx));
                if let Err(e) = spawned {
                    log::error!("cannot spawn client thread: {e}");
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(Duration::from_millis(10));
            }
        }
    }
}

fn serve_client(stream: TcpStream, shared: Arc<Shared>, tx: Sender<Inbound>) {
    if let Err(e) = stream.set_nonblocking(false).and_then(|_| stream.set_nodelay(true)) {
        log::warn!("socket setup failed: {e}");
        return;
    }
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("websocket handshake failed: {e}");
            return;
        }
    };
    if let Err(e) = ws.get_ref().set_read_timeout(Some(Duration::from_millis(5))) {
        log::warn!("socket setup failed: {e}");
        return;
    }
    let id = shared.next_id.fetch_add(1, Ordering::SeqCst);
    let authority = {
        let mut a = shared.authority.lock().unwrap();
        let granted = a.is_none();
        if granted {
            *a = Some(id);
        }
        granted
    };
    let hello = {
        let info = shared.info.lock().unwrap();
        ServerMessage::Hello {
            schema_version: TELEMETRY_SCHEMA_VERSION,
            authority,
            scenario: info.scenario.clone(),
            control_period: info.control_period,
            decimation: info.decimation,
        }
    };
    let outbox = Arc::new(Outbox::new(shared.queue_capacity));
    outbox.push(hello.to_json());
    shared.clients.lock().unwrap().push((id, outbox.clone()));
    log::info!("client {id} connected (authority: {authority})");

    if let Err(e) = client_loop(&mut ws, &shared, &outbox, &tx, id, authority) {
        log::debug!("client {id}: {e}");
    }

    shared.clients.lock().unwrap().retain(|(c, _)| *c != id);
    if authority {
        *shared.authority.lock().unwrap() = None;
    }
    let dropped = outbox.dropped.load(Ordering::Relaxed);
    log::info!("client {id} disconnected ({dropped} messages dropped)");
}

fn client_loop(
    ws: &mut WebSocket<TcpStream>,
    shared: &Shared,
    outbox: &Outbox,
    tx: &Sender<Inbound>,
    id: u64,
    authority: bool,
) -> Result<(), tungstenite::Error> {
    loop {
        if shared.stop.load(Ordering::SeqCst) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        let out = outbox.drain();
        if !out.is_empty() {
            for text in out {
                ws.write(Message::text(text))?;
            }
            ws.flush()?;
        }
        match ws.read() {
            Ok(Message::Text(text)) => match parse_command(text.as_str()) {
                Ok(message) if authority => {
                    if tx.send(Inbound { client: id, message }).is_err() {
                        return Ok(());
                    }
                }
                Ok(message) => outbox.push(
                    ServerMessage::Error {
                        message: format!("{} rejected: this client has no command authority", message.command.name()),
                    }
                    .to_json(),
                ),
                Err(message) => outbox.push(ServerMessage::Error { message }.to_json()),
            },
            Ok(Message::Binary(_)) => outbox.push(
                ServerMessage::Error {
                    message: "binary messages are not supported".into(),
                }
                .to_json(),
            ),
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e),
        }
    }
}
