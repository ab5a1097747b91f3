//! Length-prefixed tensor frames for out-of-process model backends.
//!
//! A frame is a little-endian `u32` header length, a UTF-8 JSON header and
//! a payload of `c·h·w` little-endian `f32` values, where `[c, h, w]` is the
//! header's `shape`. Frames without a shape carry no payload. Each request
//! gets exactly one reply, in order; a reply with op `error` ends the run.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::backend::{Denoiser, Vae};
use super::latent::LatentTensor;
use crate::error::{Error, Result};
use crate::image::Image;

pub const DTYPE: &str = "f32le";
/// Headers beyond this size are rejected as malformed.
pub const MAX_HEADER_BYTES: u32 = 1 << 20;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtype: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_factor: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub serial: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Header {
    pub fn op(op: &str) -> Self {
        Self {
            op: op.to_string(),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub header: Header,
    pub payload: Vec<f32>,
}

impl Frame {
    pub fn bare(op: &str) -> Self {
        Self {
            header: Header::op(op),
            payload: Vec::new(),
        }
    }

    pub fn error(message: impl Into<String>) -> Self {
        let mut f = Self::bare("error");
        f.header.message = Some(message.into());
        f
    }

    /// A frame carrying `tensor` as its payload.
    pub fn tensor(op: &str, tensor: &LatentTensor) -> Self {
        let mut header = Header::op(op);
        header.shape = Some(tensor.shape());
        header.dtype = Some(DTYPE.into());
        Self {
            header,
            payload: tensor.data().to_vec(),
        }
    }

    /// The payload as a tensor with the given scale factor.
    pub fn to_tensor(&self, scale_factor: usize) -> Result<LatentTensor> {
        let [c, h, w] = self
            .header
            .shape
            .ok_or_else(|| Error::Format(format!("`{}` frame has no shape", self.header.op)))?;
        LatentTensor::from_vec(c, h, w, scale_factor, self.payload.clone())
    }
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<()> {
    let expected = frame.header.shape.map_or(0, |[c, h, w]| c * h * w);
    if frame.payload.len() != expected {
        return Err(Error::Size(format!(
            "payload of {} values for shape {:?}",
            frame.payload.len(),
            frame.header.shape
        )));
    }
    let header = serde_json::to_vec(&frame.header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    let mut bytes = Vec::with_capacity(frame.payload.len() * 4);
    for v in &frame.payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::Truncation {
                    expected: buf.len(),
                    found: filled,
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// Reads one frame; `Ok(None)` on a clean end of stream before any byte.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Frame>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => {
                return Err(Error::Truncation {
                    expected: 4,
                    found: got,
                })
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_le_bytes(len);
    if len > MAX_HEADER_BYTES {
        return Err(Error::Format(format!("header of {len} bytes")));
    }
    let mut header = vec![0u8; len as usize];
    read_exact_or_truncated(r, &mut header)?;
    let header: Header =
        serde_json::from_slice(&header).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let count = match header.shape {
        None => 0,
        Some([c, h, w]) => {
            match header.dtype.as_deref() {
                Some(DTYPE) => {}
                other => return Err(Error::Format(format!("unsupported dtype {other:?}"))),
            }
            c.checked_mul(h)
                .and_then(|v| v.checked_mul(w))
                .filter(|v| *v <= (1 << 30))
                .ok_or_else(|| Error::Format(format!("shape {:?} too large", [c, h, w])))?
        }
    };
    let mut bytes = vec![0u8; count * 4];
    read_exact_or_truncated(r, &mut bytes)?;
    let payload = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(Some(Frame { header, payload }))
}

/// Writes `tensor` as a single-frame file.
pub fn write_tensor_file(path: impl AsRef<Path>, tensor: &LatentTensor) -> Result<()> {
    let mut frame = Frame::tensor("tensor", tensor);
    frame.header.scale_factor = Some(tensor.scale_factor());
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_frame(&mut w, &frame)
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<LatentTensor> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let frame = read_frame(&mut r)?.ok_or(Error::Truncation {
        expected: 4,
        found: 0,
    })?;
    if frame.header.op != "tensor" {
        return Err(Error::Format(format!("expected a tensor frame, got `{}`", frame.header.op)));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after tensor frame".into()));
    }
    frame.to_tensor(frame.header.scale_factor.unwrap_or(1))
}

/// Capabilities a backend announces in its `hello` reply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelloInfo {
    pub scale_factor: usize,
    pub latent_channels: usize,
    pub schedule: Option<Vec<f32>>,
    pub serial: bool,
}

impl HelloInfo {
    fn to_frame(&self) -> Frame {
        let mut f = Frame::bare("hello");
        f.header.scale_factor = Some(self.scale_factor);
        f.header.latent_channels = Some(self.latent_channels);
        f.header.schedule = self.schedule.clone();
        f.header.serial = Some(self.serial);
        f
    }

    fn from_frame(f: &Frame) -> Result<Self> {
        let scale_factor = f
            .header
            .scale_factor
            .filter(|s| *s > 0)
            .ok_or_else(|| Error::Handshake("hello without a scale_factor".into()))?;
        let latent_channels = f
            .header
            .latent_channels
            .filter(|c| *c > 0)
            .ok_or_else(|| Error::Handshake("hello without latent_channels".into()))?;
        Ok(Self {
            scale_factor,
            latent_channels,
            schedule: f.header.schedule.clone(),
            serial: f.header.serial.unwrap_or(true),
        })
    }
}

/// Image pixels as a planar tensor frame payload.
fn image_frame(op: &str, img: &Image) -> Frame {
    Frame::tensor(op, &LatentTensor::from_image(img))
}

/// Both directions of a spawned child's standard streams.
pub struct ChildPipe {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ChildPipe {
    /// Runs `program args...` with piped stdin and stdout.
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        Ok(Self {
            child,
            stdin,
            stdout,
        })
    }
}

impl Read for ChildPipe {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.stdout.read(buf)
    }
}

impl Write for ChildPipe {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.stdin.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.stdin.flush()
    }
}

impl Drop for ChildPipe {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Talks to a remote backend over any byte stream. Requests are serialized
/// by an internal lock.
pub struct BridgeClient<S> {
    stream: Mutex<S>,
    info: HelloInfo,
}

impl BridgeClient<TcpStream> {
    /// Connects to `host:port`.
    pub fn connect_tcp(addr: &str) -> Result<Self> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| Error::Handshake(format!("cannot connect to {addr}: {e}")))?;
        stream.set_nodelay(true).ok();
        Self::handshake(stream)
    }
}

impl BridgeClient<ChildPipe> {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let pipe = ChildPipe::spawn(program, args)
            .map_err(|e| Error::Handshake(format!("cannot start `{program}`: {e}")))?;
        Self::handshake(pipe)
    }
}

impl<S: Read + Write + Send> BridgeClient<S> {
    /// Sends `hello` and records the reply.
    pub fn handshake(mut stream: S) -> Result<Self> {
        let fail = |e: Error| Error::Handshake(e.to_string());
        write_frame(&mut stream, &Frame::bare("hello")).map_err(fail)?;
        let reply = read_frame(&mut stream)
            .map_err(fail)?
            .ok_or_else(|| Error::Handshake("backend closed the stream".into()))?;
        match reply.header.op.as_str() {
            "hello" => {}
            "error" => {
                return Err(Error::Handshake(
                    reply.header.message.unwrap_or_else(|| "refused".into()),
                ))
            }
            other => return Err(Error::Handshake(format!("expected hello, got `{other}`"))),
        }
        let info = HelloInfo::from_frame(&reply)?;
        Ok(Self {
            stream: Mutex::new(stream),
            info,
        })
    }

    pub fn info(&self) -> &HelloInfo {
        &self.info
    }

    /// One request, one reply. Transport failures and `error` replies both
    /// surface as backend errors.
    pub fn request(&self, frame: &Frame) -> Result<Frame> {
        let mut stream = self.stream.lock().unwrap_or_else(|e| e.into_inner());
        let wrap = |e: Error| match e {
            Error::Backend(_) => e,
            other => Error::Backend(other.to_string()),
        };
        write_frame(&mut *stream, frame).map_err(wrap)?;
        let reply = read_frame(&mut *stream)
            .map_err(wrap)?
            .ok_or_else(|| Error::Backend("backend closed the stream".into()))?;
        if reply.header.op == "error" {
            return Err(Error::Backend(
                reply.header.message.unwrap_or_else(|| "unspecified failure".into()),
            ));
        }
        if reply.header.op != frame.header.op {
            return Err(Error::Backend(format!(
                "reply `{}` to request `{}`",
                reply.header.op, frame.header.op
            )));
        }
        Ok(reply)
    }
}

impl<S: Read + Write + Send> Denoiser for BridgeClient<S> {
    fn velocity(&self, z: &LatentTensor, t: f32, prompt_id: &str) -> Result<LatentTensor> {
        let mut frame = Frame::tensor("velocity", z);
        frame.header.t = Some(t);
        frame.header.prompt_id = Some(prompt_id.to_string());
        let reply = self.request(&frame)?;
        let out = reply.to_tensor(z.scale_factor())?;
        if out.shape() != z.shape() {
            return Err(Error::Backend(format!(
                "velocity shape {:?} for latent {:?}",
                out.shape(),
                z.shape()
            )));
        }
        Ok(out)
    }

    fn is_serial(&self) -> bool {
        self.info.serial
    }
}

impl<S: Read + Write + Send> Vae for BridgeClient<S> {
    fn encode(&self, x: &Image) -> Result<LatentTensor> {
        let reply = self.request(&image_frame("encode", x))?;
        let z = reply.to_tensor(self.info.scale_factor)?;
        let s = self.info.scale_factor;
        if z.shape() != [self.info.latent_channels, x.height() / s, x.width() / s] {
            return Err(Error::Backend(format!("encode returned shape {:?}", z.shape())));
        }
        Ok(z)
    }

    fn decode(&self, z: &LatentTensor) -> Result<Image> {
        let reply = self.request(&Frame::tensor("decode", z))?;
        let img = reply.to_tensor(1)?;
        let s = self.info.scale_factor;
        if img.height() != z.height() * s || img.width() != z.width() * s {
            return Err(Error::Backend(format!("decode returned shape {:?}", img.shape())));
        }
        img.to_image().map_err(|e| Error::Backend(e.to_string()))
    }

    fn scale_factor(&self) -> usize {
        self.info.scale_factor
    }

    fn latent_channels(&self) -> usize {
        self.info.latent_channels
    }

    fn is_serial(&self) -> bool {
        self.info.serial
    }
}

fn answer(frame: &Frame, denoiser: &dyn Denoiser, vae: &dyn Vae, info: &HelloInfo) -> Result<Frame> {
    match frame.header.op.as_str() {
        "hello" => Ok(info.to_frame()),
        "velocity" => {
            let z = frame.to_tensor(info.scale_factor)?;
            let t = frame
                .header
                .t
                .ok_or_else(|| Error::Format("velocity without t".into()))?;
            let prompt = frame.header.prompt_id.as_deref().unwrap_or("");
            Ok(Frame::tensor("velocity", &denoiser.velocity(&z, t, prompt)?))
        }
        "encode" => {
            let img = frame.to_tensor(1)?.to_image()?;
            Ok(Frame::tensor("encode", &vae.encode(&img)?))
        }
        "decode" => {
            let z = frame.to_tensor(info.scale_factor)?;
            Ok(image_frame("decode", &vae.decode(&z)?))
        }
        other => Err(Error::Format(format!("unknown op `{other}`"))),
    }
}

/// Answers frames from `stream` with in-process backends until the peer
/// closes the stream. Failed requests get an `error` reply.
pub fn serve<S: Read + Write>(
    stream: &mut S,
    denoiser: &dyn Denoiser,
    vae: &dyn Vae,
    info: &HelloInfo,
) -> Result<()> {
    while let Some(frame) = read_frame(stream)? {
        let reply = answer(&frame, denoiser, vae, info).unwrap_or_else(|e| Frame::error(e.to_string()));
        write_frame(stream, &reply)?;
    }
    Ok(())
}
