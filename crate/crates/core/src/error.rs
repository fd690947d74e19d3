use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid delay profile: {0}")]
    InvalidProfile(String),

    #[error("no forwarding terminal candidate: {0}")]
    Selection(String),

    /// Matrix too ill-conditioned to invert; callers re-draw the channel.
    #[error("singular system ({context}): condition number {condition:.3e}")]
    Singular {
        context: &'static str,
        condition: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("odd bit count {0} cannot be mapped onto 4QAM symbols")]
    OddBitCount(usize),

    #[error("pilot symbol {index} is zero")]
    ZeroPilot { index: usize },

    #[error("correlation matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("missing pilot record for stream {stream}, pilot {pilot}")]
    MissingPilot { stream: usize, pilot: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn is_singular(&self) -> bool {
        matches!(self, Error::Singular { .. })
    }
}
