//! Training kernels, model splitting, data partitioning, communication
//! accounting and protocol engines for simulating collaborative training
//! of a neural network split between devices and a server.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! threads or the command line lives in the `splitsim` companion crate.
//!
//! Three training protocols are provided:
//!
//! * classic federated learning ([`protocols::run_fl`]),
//! * split federated learning with per-iteration activation and gradient
//!   exchange ([`protocols::run_sfl`]),
//! * unidirectional inter-block training, where the device block learns
//!   against a small auxiliary head, ships its activations once and the
//!   server block is trained afterwards on the consolidated set
//!   ([`protocols::run_ampere`], plus the per-device ablation
//!   [`protocols::run_ampere_no_consolidation`]).
#![no_std]
#![forbid(unsafe_code)]
extern crate alloc;

pub mod data;
pub mod error;
pub mod model;
pub mod nn;
pub mod protocols;
pub mod rng;
pub mod simnet;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Real, Tensor};
