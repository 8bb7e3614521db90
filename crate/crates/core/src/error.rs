use thiserror::Error;

#[derive(Debug, Error)]
pub enum RisError {
    #[error("{what} = {value} is outside the allowed range [{min}, {max}]")]
    Range {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("{what} must be {requirement}, got {value}")]
    Domain {
        what: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("index ({row}, {col}) is outside a {rows}x{cols} layout")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("frequency {0} Hz is not present in the table")]
    FrequencyNotFound(f64),

    #[error("reflection phase is not monotone in bias at {frequency_hz} Hz")]
    NonMonotonePhase { frequency_hz: f64 },

    #[error("side-lobe level is undefined: {0}")]
    UndefinedSideLobe(&'static str),

    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),

    #[error("-3 dB crossing falls outside the observation grid on the {0} side")]
    BeamwidthBoundary(&'static str),

    #[error("frame rejected: checksum {found:#06x} does not match computed {expected:#06x}")]
    Checksum { expected: u16, found: u16 },

    #[error("malformed frame: {0}")]
    Frame(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<RisError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RisError {
    pub fn in_stage(stage: &'static str) -> impl FnOnce(RisError) -> RisError {
        move |source| RisError::Stage {
            stage,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, RisError>;
