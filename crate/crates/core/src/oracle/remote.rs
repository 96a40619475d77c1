use std::io::{self, BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::protocol::{self, DecodeError, Request, ServerInfo, PROTOCOL_VERSION};
use super::{Oracle, OracleError, OracleId, OracleKind, OracleResult, QueryCounts};
use crate::numerics::Tensor;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Client handle for one oracle server. Requests are strictly sequential.
pub struct RemoteOracle {
    id: OracleId,
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    info: ServerInfo,
    counts: QueryCounts,
}

impl From<DecodeError> for OracleError {
    fn from(e: DecodeError) -> Self {
        match e {
            DecodeError::Truncated => OracleError::TruncatedFrame,
            DecodeError::Io(e) => OracleError::Transport(e),
            DecodeError::Status(s) => OracleError::Remote(s),
            DecodeError::Invalid(msg) => OracleError::Protocol(msg),
        }
    }
}

impl RemoteOracle {
    /// Connect and handshake; the handle reports `expected_ma` as its microarchitecture.
    pub fn connect(address: &str, expected_ma: u32, index: usize) -> Result<Self, OracleError> {
        Self::connect_with_timeout(address, expected_ma, index, DEFAULT_TIMEOUT)
    }

    pub fn connect_with_timeout(
        address: &str,
        expected_ma: u32,
        index: usize,
        timeout: Duration,
    ) -> Result<Self, OracleError> {
        let mut last_err = io::Error::new(io::ErrorKind::AddrNotAvailable, format!("no address for {address}"));
        let mut stream = None;
        for addr in address.to_socket_addrs()? {
            match TcpStream::connect_timeout(&addr, timeout) {
                Ok(s) => {
                    stream = Some(s);
                    break;
                }
                Err(e) => last_err = e,
            }
        }
        let stream = stream.ok_or(last_err)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        protocol::write_all(&mut writer, &protocol::encode_request(&Request::info()))?;
        let info = protocol::read_info_response(&mut reader)?;
        if info.version != PROTOCOL_VERSION {
            return Err(OracleError::VersionMismatch {
                expected: PROTOCOL_VERSION,
                found: info.version,
            });
        }
        Ok(Self {
            id: OracleId {
                index,
                ma_id: expected_ma,
                kind: OracleKind::Remote(address.to_string()),
            },
            reader,
            writer,
            info,
            counts: QueryCounts::default(),
        })
    }

    pub fn info(&self) -> &ServerInfo {
        &self.info
    }

    fn send(&mut self, req: &Request) -> Result<(), OracleError> {
        protocol::write_all(&mut self.writer, &protocol::encode_request(req))?;
        Ok(())
    }
}

impl Oracle for RemoteOracle {
    fn id(&self) -> &OracleId {
        &self.id
    }

    fn predict(&mut self, x: &Tensor) -> Result<OracleResult, OracleError> {
        self.send(&Request::predict(x))?;
        let prediction = protocol::read_predict_response(&mut self.reader)?;
        self.counts.predict_count += 1;
        Ok(OracleResult {
            oracle: self.id.clone(),
            prediction,
            gradient: None,
        })
    }

    fn gradient(&mut self, x: &Tensor) -> Result<OracleResult, OracleError> {
        self.send(&Request::gradient(x))?;
        let (prediction, gradient) = protocol::read_gradient_response(&mut self.reader)?;
        if gradient.len() != x.len() {
            return Err(OracleError::Protocol(format!(
                "gradient has {} elements for an input of {}",
                gradient.len(),
                x.len()
            )));
        }
        self.counts.gradient_count += 1;
        Ok(OracleResult {
            oracle: self.id.clone(),
            prediction,
            gradient: Some(gradient),
        })
    }

    fn counts(&self) -> QueryCounts {
        self.counts
    }
}
