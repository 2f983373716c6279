use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("no primitive {n}-th root of unity modulo {q}: {n} does not divide q-1")]
    NoRoot { n: usize, q: u32 },

    #[error("invalid NTT parameters: {0}")]
    InvalidParams(String),

    #[error("value {value} does not fit in {bits} bits")]
    OutOfRange { value: u64, bits: u32 },

    #[error("barrett input {x} is not below q^2 = {bound}")]
    InputTooWide { x: u64, bound: u64 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("polynomial length {got} does not match n = {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("coefficient {index} = {value} is not reduced modulo {q}")]
    Unreduced { index: usize, value: u32, q: u32 },

    #[error("unknown PR slot {0}")]
    UnknownSlot(usize),

    #[error("no selectable PR slot")]
    NoSelectableSlot,

    #[error("rollback requested without a flagged fault")]
    RollbackWithoutFault,

    #[error("unknown Kyber variant {0} (expected 512, 768 or 1024)")]
    UnknownVariant(u32),

    #[error("config error in `{key}`: {reason}")]
    Config { key: String, reason: String },
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
