//! Decentralized detection of all satisfying consistent cuts of a
//! conjunctive predicate over continuous-time signals produced by agents
//! with partially synchronous clocks.
//!
//! Each agent runs an abstractor that discretizes its signal into
//! timestamped root events, and a slicer whose token completes each event
//! into a satisfying cut or proves none has it on the frontier. The
//! uncountable set of satisfying cuts is reported through its finitely many
//! extremal frontiers. A deterministic network simulation drives the state
//! machines over FIFO channels; a centralized oracle and a brute-force grid
//! enumerator provide ground truth for verification.

pub mod abstractor;
pub mod causality;
pub mod error;
pub mod harness;
pub mod netsim;
pub mod oracle;
pub mod signal;
pub mod slicer;

pub use error::{Error, Result};
pub use signal::{SkewBound, Ticks};
