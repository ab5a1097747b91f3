use std::io;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("pyramid depth {depth} out of range 1..={max} for a {width}x{height} image")]
    Depth {
        depth: usize,
        max: usize,
        width: usize,
        height: usize,
    },
    #[error("expected a {expected} pyramid, got {actual}")]
    Kind {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("input contains missing samples")]
    MissingData,
    #[error("size mismatch: {0}")]
    Size(String),
    #[error("imputation needs at least one defined pixel")]
    EmptyMask,
    #[error("pixel ({x}, {y}) at level {level} is not covered by any view")]
    Coverage { level: usize, x: usize, y: usize },
    #[error("invalid channel count {0} (expected 1..=4)")]
    Channels(usize),
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncation { expected: usize, found: usize },
    #[error("uv coordinate out of range at ({x}, {y}): ({u}, {v})")]
    Range { x: usize, y: usize, u: f32, v: f32 },
    #[error("geometry error: {0}")]
    Geometry(String),
    /// `line` is 1-based; 0 when the problem is not tied to a line.
    #[error("parse error{}: {message}", line_suffix(*line))]
    Parse { line: usize, message: String },
    #[error("invalid time: {0}")]
    Time(String),
    #[error("backend handshake failed: {0}")]
    Handshake(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn line_suffix(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}
