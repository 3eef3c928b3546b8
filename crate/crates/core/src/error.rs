use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("angle out of domain: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("port mismatch: precoder has {precoder} ports, layout has {layout}")]
    PortMismatch { precoder: usize, layout: usize },
    #[error("grid mismatch between patterns")]
    GridMismatch,
    #[error("target ({theta}, {phi}) outside grid bounds")]
    OutOfBounds { theta: f64, phi: f64 },
    #[error("half-power width undefined along the {0} cut")]
    UndefinedWidth(&'static str),
    #[error("empty subset")]
    EmptySubset,
    #[error("channel rank below {0} layers")]
    RankDeficient(usize),
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error("pilot layout invalid: {0}")]
    PilotGrid(String),
}
