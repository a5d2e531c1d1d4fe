//! A secure minimum-storage-regenerating erasure code.
//!
//! The crate provides the code construction itself (`code`), its Cauchy
//! encoding matrices (`cauchy`) over prime fields (`gf`), a coset-coding
//! secrecy layer against node eavesdroppers (`secrecy`), exact rational
//! trade-off computations (`analysis`), and durable on-disk node storage
//! (`cluster`).

pub mod analysis;
pub mod cauchy;
pub mod cluster;
pub mod code;
pub mod gf;
pub mod secrecy;
