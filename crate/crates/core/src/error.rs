use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("cloud has no valid points ({rejected} rejected)")]
    EmptyCloud { rejected: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("signal is degenerate: all {len} values are equal")]
    DegenerateSignal { len: usize },

    #[error("no window size produced a usable peak set")]
    NoPeaks,

    #[error(
        "floor/ceiling labeling needs an even number of peaks, found {} at {peaks:?}; \
         pass an explicit peak list to override",
        peaks.len()
    )]
    Alternation { peaks: Vec<f64> },

    #[error("occupancy grid {dims:?} needs {required_bytes} bytes, cap is {cap_bytes} bytes")]
    Capacity {
        dims: [usize; 3],
        required_bytes: u64,
        cap_bytes: u64,
    },

    #[error("no volume is larger than a_th = {a_th} m³ (largest volume is {largest} m³)")]
    NoSeed { a_th: f64, largest: f64 },

    #[error("image size mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("png {context}: {message}")]
    Image { context: String, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
