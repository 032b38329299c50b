//! Schedule simulator and analysis toolkit for hybrid tensor+pipeline
//! parallel training.
//!
//! The crate builds braided execution blocks that overlap TP all-reduce
//! communication with pipeline computation, generates per-device schedule
//! programs (interleaved 1F1B, ZB-V, and the synergistic schedule with its
//! offloading variant), executes them on virtual multi-device timelines
//! with exact rational arithmetic, and checks the results against the
//! closed-form bubble and memory expressions. A separate module validates
//! the fused-residual forward/backward math numerically.

pub mod braid;
pub mod schedule;
pub mod time;
pub mod workload;
