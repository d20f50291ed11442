//! Exact-arithmetic toolkit for decomposing rationals into combinations of
//! middle-third Cantor set elements.
//!
//! The crate has two independent channels that must agree:
//!
//! * [`decomposer`] — the constructive side: greedy exact digit flips drive a
//!   tuple of Cantor points until their average, product, or sum of m-th powers
//!   matches a target to within `3^-N`, emitting a replayable [certificate]
//!   (`decomposer::Certificate`).
//! * [`oracle`] — the brute-force side: exact images of stage-k Cantor
//!   approximations as unions of closed intervals, used to confirm that claimed
//!   target intervals are contained in every computed stage image.
//!
//! [`exact`] supplies the rational arithmetic and ternary digit access both
//! channels are built on, [`cantor`] the digit-stream points and stage sets,
//! and [`thickness`] the closed-form term-count tables used for comparison.

pub mod cantor;
pub mod decomposer;
pub mod exact;
pub mod oracle;
pub mod thickness;

pub use cantor::{CantorPoint, GapInfo, Interval, IntervalSet};
pub use decomposer::{Certificate, Direction, Problem, ProblemConfig, ProblemKind};
pub use exact::ExactRational;
