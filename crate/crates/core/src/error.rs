use thiserror::Error;

/// Errors raised by tensor algebra, neural ops, the model and the data path.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape {0:?}: rank must be 1..=4 and every extent >= 1")]
    InvalidShape(Vec<usize>),
    #[error("element count of shape {0:?} overflows")]
    ShapeOverflow(Vec<usize>),
    #[error("buffer of {len} elements does not fit shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op} expects a rank-{expected} tensor, got shape {got:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        got: Vec<usize>,
    },
    #[error("channel range {lo}..{hi} out of bounds for {channels} channels")]
    ChannelRange { lo: usize, hi: usize, channels: usize },
    #[error("kernel extents must be odd, got {kh}x{kw}")]
    EvenKernel { kh: usize, kw: usize },
    #[error("{channels} channels are not divisible by scale^2 = {}", .scale * .scale)]
    ShuffleChannels { channels: usize, scale: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parameter mismatch: {0}")]
    Params(String),
    #[error("input {height}x{width} is smaller than the largest kernel extent {min}")]
    InputTooSmall {
        height: usize,
        width: usize,
        min: usize,
    },
    #[error("optimizer step index must be >= 1")]
    StepIndex,
    #[error("epoch {epoch} outside schedule of {total} epochs")]
    Epoch { epoch: usize, total: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("image: {0}")]
    Image(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
