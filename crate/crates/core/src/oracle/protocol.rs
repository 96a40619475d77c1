//! Binary request/response framing for remote oracles.
//!
//! All integers are little-endian and every float is sent as its raw binary32
//! bit pattern, so a prediction crosses the wire without any rounding.
//!
//! Request: `"INNF"` | version `u8` | op `u8` | rank `u8` | `rank` x dims `u32` |
//! `prod(dims)` x `f32` (no payload when rank is 0).
//!
//! Response: status `u8`, then on success
//! - predict: label `u16` | num_classes `u16` | probs `f32` x num_classes | dconf `f32`
//! - gradient: the predict body followed by a tensor encoded as in the request
//!   (rank `u8` | dims | payload)
//! - info: version `u8` | num_classes `u16` | input_len `u32` | tag length `u8` | tag bytes

use std::io::{self, Read, Write};

use crate::model::Prediction;
use crate::numerics::{element_count, Tensor};

pub const WIRE_MAGIC: [u8; 4] = *b"INNF";
pub const PROTOCOL_VERSION: u8 = 1;
/// Largest payload a server accepts, in elements.
pub const MAX_ELEMENTS: usize = 1 << 24;
pub const MAX_RANK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Predict = 1,
    Gradient = 2,
    Info = 3,
}

impl Op {
    pub fn from_byte(b: u8) -> Option<Op> {
        match b {
            1 => Some(Op::Predict),
            2 => Some(Op::Gradient),
            3 => Some(Op::Info),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Internal = 1,
    Shape = 2,
    Malformed = 3,
}

impl Status {
    pub fn from_byte(b: u8) -> Option<Status> {
        match b {
            0 => Some(Status::Ok),
            1 => Some(Status::Internal),
            2 => Some(Status::Shape),
            3 => Some(Status::Malformed),
            _ => None,
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Ok => "ok",
            Status::Internal => "internal error",
            Status::Shape => "shape mismatch",
            Status::Malformed => "malformed request",
        };
        write!(f, "{s} (code {})", *self as u8)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerInfo {
    pub version: u8,
    pub num_classes: u16,
    pub input_len: u32,
    pub strategy: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub version: u8,
    pub op: Op,
    pub tensor: Option<Tensor>,
}

impl Request {
    pub fn predict(x: &Tensor) -> Request {
        Request {
            version: PROTOCOL_VERSION,
            op: Op::Predict,
            tensor: Some(x.clone()),
        }
    }

    pub fn gradient(x: &Tensor) -> Request {
        Request {
            version: PROTOCOL_VERSION,
            op: Op::Gradient,
            tensor: Some(x.clone()),
        }
    }

    pub fn info() -> Request {
        Request {
            version: PROTOCOL_VERSION,
            op: Op::Info,
            tensor: None,
        }
    }
}

/// Tensor as rank `u8`, dims `u32`, raw payload.
pub fn encode_tensor(out: &mut Vec<u8>, t: &Tensor) {
    out.push(t.rank() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_request(req: &Request) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&WIRE_MAGIC);
    out.push(req.version);
    out.push(req.op as u8);
    match &req.tensor {
        Some(t) => encode_tensor(&mut out, t),
        None => out.push(0),
    }
    out
}

fn encode_prediction(out: &mut Vec<u8>, p: &Prediction) {
    out.extend_from_slice(&(p.label as u16).to_le_bytes());
    out.extend_from_slice(&(p.probs.len() as u16).to_le_bytes());
    for v in &p.probs {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&p.dconf.to_le_bytes());
}

pub fn encode_predict_response(p: &Prediction) -> Vec<u8> {
    let mut out = vec![Status::Ok as u8];
    encode_prediction(&mut out, p);
    out
}

pub fn encode_gradient_response(p: &Prediction, g: &Tensor) -> Vec<u8> {
    let mut out = vec![Status::Ok as u8];
    encode_prediction(&mut out, p);
    encode_tensor(&mut out, g);
    out
}

pub fn encode_info_response(info: &ServerInfo) -> Vec<u8> {
    let mut out = vec![Status::Ok as u8, info.version];
    out.extend_from_slice(&info.num_classes.to_le_bytes());
    out.extend_from_slice(&info.input_len.to_le_bytes());
    let tag = info.strategy.as_bytes();
    let len = tag.len().min(u8::MAX as usize);
    out.push(len as u8);
    out.extend_from_slice(&tag[..len]);
    out
}

pub fn encode_error_response(status: Status) -> Vec<u8> {
    vec![status as u8]
}

/// Why a request frame was rejected.
#[derive(Debug)]
pub enum FrameError {
    /// stream ended before or inside a frame
    Eof { mid_frame: bool },
    Io(io::Error),
    /// header parsed and payload consumed; the connection can continue
    Recoverable(&'static str),
    /// payload length unknown or absurd; the stream cannot be resynchronized
    Fatal(&'static str),
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8], mid_frame: bool) -> Result<(), FrameError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FrameError::Eof { mid_frame },
        _ => FrameError::Io(e),
    })
}

fn read_tensor_body<R: Read>(r: &mut R, rank: usize) -> Result<Tensor, FrameError> {
    if rank > MAX_RANK {
        return Err(FrameError::Fatal("rank too large"));
    }
    let mut dims = vec![0u8; 4 * rank];
    read_exact_or_eof(r, &mut dims, true)?;
    let shape: Vec<usize> = dims
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
        .collect();
    let n = if rank == 0 {
        0
    } else {
        element_count(&shape)
            .filter(|&n| n <= MAX_ELEMENTS)
            .ok_or(FrameError::Fatal("payload too large"))?
    };
    let mut payload = vec![0u8; 4 * n];
    read_exact_or_eof(r, &mut payload, true)?;
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if rank == 0 {
        return Ok(Tensor::vector(Vec::new()));
    }
    Ok(Tensor::new(shape, data).expect("sized by header"))
}

/// Read one request. The frame is consumed fully whenever its length is
/// knowable, so header errors like a bad op leave the stream aligned.
pub fn read_request<R: Read>(r: &mut R) -> Result<Request, FrameError> {
    let mut first = [0u8; 1];
    read_exact_or_eof(r, &mut first, false)?;
    let mut rest = [0u8; 6];
    read_exact_or_eof(r, &mut rest, true)?;
    let magic = [first[0], rest[0], rest[1], rest[2]];
    let (version, op_byte, rank) = (rest[3], rest[4], rest[5] as usize);
    let tensor = read_tensor_body(r, rank)?;
    if magic != WIRE_MAGIC {
        return Err(FrameError::Recoverable("bad magic"));
    }
    if version != PROTOCOL_VERSION {
        return Err(FrameError::Recoverable("unsupported version"));
    }
    let op = Op::from_byte(op_byte).ok_or(FrameError::Recoverable("unknown op"))?;
    match op {
        Op::Info => Ok(Request {
            version,
            op,
            tensor: None,
        }),
        Op::Predict | Op::Gradient if rank == 0 => Err(FrameError::Recoverable("missing input tensor")),
        Op::Predict | Op::Gradient => Ok(Request {
            version,
            op,
            tensor: Some(tensor),
        }),
    }
}

/// Response-side decoding errors.
#[derive(Debug)]
pub enum DecodeError {
    Truncated,
    Io(io::Error),
    Status(Status),
    Invalid(String),
}

fn read_exact_resp<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), DecodeError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => DecodeError::Truncated,
        _ => DecodeError::Io(e),
    })
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16, DecodeError> {
    let mut b = [0u8; 2];
    read_exact_resp(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, DecodeError> {
    let mut b = [0u8; 4];
    read_exact_resp(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>, DecodeError> {
    let mut raw = vec![0u8; 4 * n];
    read_exact_resp(r, &mut raw)?;
    Ok(raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect())
}

fn read_status<R: Read>(r: &mut R) -> Result<(), DecodeError> {
    let mut b = [0u8; 1];
    read_exact_resp(r, &mut b)?;
    match Status::from_byte(b[0]) {
        Some(Status::Ok) => Ok(()),
        Some(s) => Err(DecodeError::Status(s)),
        None => Err(DecodeError::Invalid(format!("unknown status byte {}", b[0]))),
    }
}

fn read_prediction<R: Read>(r: &mut R) -> Result<Prediction, DecodeError> {
    let label = read_u16(r)? as usize;
    let classes = read_u16(r)? as usize;
    if label >= classes.max(1) {
        return Err(DecodeError::Invalid(format!("label {label} out of range for {classes} classes")));
    }
    let probs = read_f32s(r, classes)?;
    let dconf = read_f32s(r, 1)?[0];
    Ok(Prediction { label, probs, dconf })
}

pub fn read_predict_response<R: Read>(r: &mut R) -> Result<Prediction, DecodeError> {
    read_status(r)?;
    read_prediction(r)
}

pub fn read_gradient_response<R: Read>(r: &mut R) -> Result<(Prediction, Tensor), DecodeError> {
    read_status(r)?;
    let p = read_prediction(r)?;
    let mut rank = [0u8; 1];
    read_exact_resp(r, &mut rank)?;
    let rank = rank[0] as usize;
    if rank > MAX_RANK {
        return Err(DecodeError::Invalid(format!("gradient rank {rank}")));
    }
    let shape: Vec<usize> = (0..rank).map(|_| read_u32(r).map(|d| d as usize)).collect::<Result<_, _>>()?;
    let n = element_count(&shape)
        .filter(|&n| n <= MAX_ELEMENTS)
        .ok_or_else(|| DecodeError::Invalid("gradient too large".into()))?;
    let data = read_f32s(r, n)?;
    Ok((p, Tensor::new(shape, data).expect("sized by header")))
}

pub fn read_info_response<R: Read>(r: &mut R) -> Result<ServerInfo, DecodeError> {
    read_status(r)?;
    let mut v = [0u8; 1];
    read_exact_resp(r, &mut v)?;
    let num_classes = read_u16(r)?;
    let input_len = read_u32(r)?;
    let mut len = [0u8; 1];
    read_exact_resp(r, &mut len)?;
    let mut tag = vec![0u8; len[0] as usize];
    read_exact_resp(r, &mut tag)?;
    Ok(ServerInfo {
        version: v[0],
        num_classes,
        input_len,
        strategy: String::from_utf8_lossy(&tag).into_owned(),
    })
}

pub(crate) fn write_all<W: Write>(w: &mut W, bytes: &[u8]) -> io::Result<()> {
    w.write_all(bytes)?;
    w.flush()
}
