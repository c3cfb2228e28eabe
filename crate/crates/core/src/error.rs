use alloc::string::String;
use thiserror::Error;

/// Errors raised by the simulator core.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Invalid model, split, partition or training configuration, including
    /// shape mismatches between chained layers and their inputs.
    #[error("configuration error: {0}")]
    Config(String),
    /// Labels or samples that violate the dataset contract.
    #[error("data error: {0}")]
    Data(String),
    /// An API was called with arguments produced by a different call
    /// (stale forward cache, unknown cost variant, empty transfer).
    #[error("usage error: {0}")]
    Usage(String),
    /// Models exchanged by a protocol are not congruent.
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(alloc::format!($($arg)*)) };
}
macro_rules! usage_err {
    ($($arg:tt)*) => { $crate::error::Error::Usage(alloc::format!($($arg)*)) };
}
macro_rules! data_err {
    ($($arg:tt)*) => { $crate::error::Error::Data(alloc::format!($($arg)*)) };
}
macro_rules! protocol_err {
    ($($arg:tt)*) => { $crate::error::Error::Protocol(alloc::format!($($arg)*)) };
}
pub(crate) use {config_err, data_err, protocol_err, usage_err};
