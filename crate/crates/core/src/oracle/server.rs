use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use super::protocol::{self, FrameError, Op, Request, ServerInfo, Status, PROTOCOL_VERSION};
use crate::model::{forward, input_gradient, load_model, Model, ModelError, ModelFileError};
use crate::numerics::AccumulationStrategy;

/// Malformed frames tolerated on one connection before it is closed.
const MAX_VIOLATIONS: u32 = 3;

#[derive(Debug, Default)]
pub struct ServerStats {
    pub connections: AtomicU64,
    pub predict: AtomicU64,
    pub gradient: AtomicU64,
    pub info: AtomicU64,
    pub errors: AtomicU64,
}

struct Shared {
    model: Model,
    strategy: AccumulationStrategy,
    stats: ServerStats,
    stop: AtomicBool,
    open: Mutex<HashMap<u64, TcpStream>>,
    next_conn: AtomicU64,
}

/// Oracle server: one thread per connection, stateless per request.
pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl Server {
    pub fn bind(model: Model, strategy: AccumulationStrategy, addr: impl ToSocketAddrs) -> io::Result<Server> {
        let listener = TcpListener::bind(addr)?;
        Ok(Server {
            listener,
            shared: Arc::new(Shared {
                model,
                strategy,
                stats: ServerStats::default(),
                stop: AtomicBool::new(false),
                open: Mutex::new(HashMap::new()),
                next_conn: AtomicU64::new(0),
            }),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accept connections until the process ends (or a handle shuts it down).
    pub fn run(self) -> io::Result<()> {
        for conn in self.listener.incoming() {
            if self.shared.stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match conn {
                Ok(s) => s,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            };
            self.shared.stats.connections.fetch_add(1, Ordering::Relaxed);
            let conn_id = self.shared.next_conn.fetch_add(1, Ordering::Relaxed);
            if let Ok(clone) = stream.try_clone() {
                self.shared.open.lock().expect("poisoned").insert(conn_id, clone);
            }
            let shared = Arc::clone(&self.shared);
            thread::spawn(move || {
                let _ = handle_connection(&shared, stream);
                shared.open.lock().expect("poisoned").remove(&conn_id);
            });
        }
        Ok(())
    }

    /// Run on a background thread.
    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let shared = Arc::clone(&self.shared);
        let thread = thread::spawn(move || self.run());
        Ok(ServerHandle {
            addr,
            shared,
            thread: Some(thread),
        })
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> &ServerStats {
        &self.shared.stats
    }

    /// Stop accepting and drop every open connection.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        // unblock accept()
        let _ = TcpStream::connect(self.addr);
        for (_, s) in self.shared.open.lock().expect("poisoned").drain() {
            let _ = s.shutdown(Shutdown::Both);
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop();
        }
    }
}

fn handle_connection(shared: &Shared, stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut violations = 0u32;
    loop {
        if shared.stop.load(Ordering::SeqCst) {
            return Ok(());
        }
        let response = match protocol::read_request(&mut reader) {
            Ok(req) => answer(shared, &req),
            Err(FrameError::Eof { .. }) | Err(FrameError::Io(_)) => return Ok(()),
            Err(FrameError::Recoverable(_)) => Answer::violation(),
            Err(FrameError::Fatal(_)) => {
                shared.stats.errors.fetch_add(1, Ordering::Relaxed);
                protocol::write_all(&mut writer, &protocol::encode_error_response(Status::Malformed))?;
                return Ok(());
            }
        };
        if response.status != Status::Ok {
            shared.stats.errors.fetch_add(1, Ordering::Relaxed);
        }
        protocol::write_all(&mut writer, &response.bytes)?;
        if response.violation {
            violations += 1;
            if violations >= MAX_VIOLATIONS {
                return Ok(());
            }
        }
    }
}

struct Answer {
    bytes: Vec<u8>,
    status: Status,
    violation: bool,
}

impl Answer {
    fn ok(bytes: Vec<u8>) -> Self {
        Answer {
            bytes,
            status: Status::Ok,
            violation: false,
        }
    }

    fn error(status: Status) -> Self {
        Answer {
            bytes: protocol::encode_error_response(status),
            status,
            violation: status == Status::Malformed,
        }
    }

    fn violation() -> Self {
        Self::error(Status::Malformed)
    }
}

fn model_error_status(e: &ModelError) -> Status {
    match e {
        ModelError::InputShape { .. } => Status::Shape,
        ModelError::NonFinite { layer: 0 } => Status::Malformed,
        _ => Status::Internal,
    }
}

fn answer(shared: &Shared, req: &Request) -> Answer {
    let model = &shared.model;
    match (req.op, &req.tensor) {
        (Op::Info, _) => {
            shared.stats.info.fetch_add(1, Ordering::Relaxed);
            Answer::ok(protocol::encode_info_response(&ServerInfo {
                version: PROTOCOL_VERSION,
                num_classes: model.num_classes() as u16,
                input_len: model.input_len() as u32,
                strategy: shared.strategy.name(),
            }))
        }
        (Op::Predict, Some(x)) => match forward(model, x, shared.strategy) {
            Ok(p) => {
                shared.stats.predict.fetch_add(1, Ordering::Relaxed);
                Answer::ok(protocol::encode_predict_response(&p))
            }
            Err(e) => Answer::error(model_error_status(&e)),
        },
        (Op::Gradient, Some(x)) => {
            let result = forward(model, x, shared.strategy)
                .and_then(|p| input_gradient(model, x, shared.strategy).map(|g| (p, g)));
            match result {
                Ok((p, g)) => {
                    shared.stats.gradient.fetch_add(1, Ordering::Relaxed);
                    Answer::ok(protocol::encode_gradient_response(&p, &g))
                }
                Err(e) => Answer::error(model_error_status(&e)),
            }
        }
        (_, None) => Answer::violation(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot load model: {0}")]
    Model(#[from] ModelFileError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("server stopped: {0}")]
    Io(#[from] io::Error),
}

/// Load `model_path` and answer requests on `bind` until the process ends.
pub fn serve(model_path: impl AsRef<Path>, strategy: AccumulationStrategy, bind: &str) -> Result<(), ServeError> {
    let model = load_model(model_path)?;
    let server = Server::bind(model, strategy, bind).map_err(|source| ServeError::Bind {
        addr: bind.to_string(),
        source,
    })?;
    server.run()?;
    Ok(())
}
