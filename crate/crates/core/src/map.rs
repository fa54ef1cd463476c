//! Guest address map.
//!
//! ```text
//! 0x1000_0000  L1 scratchpad, tile t at L1_BASE + t * l1_bytes_per_tile
//! 0x4000_0000  program text
//! 0x8000_0000  L2
//! ```
//! Inside a tile, consecutive words rotate over the banks.

pub const L1_BASE: u32 = 0x1000_0000;
pub const TEXT_BASE: u32 = 0x4000_0000;
pub const L2_BASE: u32 = 0x8000_0000;
pub const BANKS_PER_TILE: u32 = 16;
