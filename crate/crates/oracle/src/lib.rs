//! Reference oracles for the test suites.
//!
//! Nothing in here shares code with `sdremu-core`. Small-format floating
//! point results are obtained by enumerating every representable value and
//! comparing exact integer-scaled quantities; fp32 results lean on the host
//! FPU, which is IEEE-754 round-to-nearest-even with subnormals.

pub mod fp;
pub mod linalg;
pub mod sweep;
