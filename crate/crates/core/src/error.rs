use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid pitch name `{token}`: {reason}")]
    PitchName { token: String, reason: String },

    #[error("record {record}: {field}: {message}")]
    Record {
        record: usize,
        field: String,
        message: String,
    },

    #[error("unknown character `{ch}` at position {pos}")]
    UnknownCharacter { ch: String, pos: usize },

    #[error("{file}:{line}: {message}")]
    DataFile {
        file: String,
        line: usize,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("decode failure: {0}")]
    Decode(String),

    #[error("search space of {required} states exceeds the bound of {bound}")]
    StateBound { required: u128, bound: u128 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
