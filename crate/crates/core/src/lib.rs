//! Two-party protocols for statistics of a matrix product.
//!
//! Alice holds `A`, Bob holds `B`, and the parties estimate statistics of
//! `C = A * B` (lp norms for p in [0, 2], the max entry, l0/l1 samples,
//! heavy hitters) while a simulated channel meters every bit and round.
//!
//! Modules:
//! - [`matrix`]: sparse integer matrices and exact reference statistics
//! - [`channel`]: the metered session, wire codec, and reports
//! - [`sketches`]: linear sketches (lp, l0 sampler, blocked l2)
//! - [`proto_lp`]: 2-round (1+eps) lp estimation, exact l1, l1/l0 sampling
//! - [`proto_linf_binary`]: (2+eps)- and kappa-approximate max entry for
//!   binary inputs, plus the index-exchange additive split
//! - [`proto_linf_general`]: one-round kappa-approximate max entry for
//!   integer inputs via blocked l2 sketches
//! - [`proto_hh`]: heavy-hitter protocols for integer and binary inputs
//! - [`hardgen`]: adversarial instance generators with planted ground truth
//! - [`harness`]: experiment runner and CSV reporting

pub mod channel;
pub mod error;
pub mod hardgen;
pub mod harness;
pub mod matrix;
pub mod proto_hh;
pub mod proto_linf_binary;
pub mod proto_linf_general;
pub mod proto_lp;
pub mod rng;
pub mod sketches;
pub mod wire;

pub use channel::{EstimateReport, Party, ProtocolSession, ResultValue};
pub use error::{Error, Result};
pub use matrix::{HeavyHitterSet, MatrixStats, SparseIntMatrix};
