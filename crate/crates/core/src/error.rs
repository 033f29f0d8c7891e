use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed image input.
    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: usize, message: String },

    /// Malformed binary artifact (OFPF, model or index files).
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("box {x},{y} {w}x{h} exceeds image bounds {width}x{height}")]
    Bounds {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Evaluation protocol violations (missing ground truth, short rankings).
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }
}
