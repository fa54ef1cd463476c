#![no_std]

extern crate alloc;

pub mod cluster;
pub mod emu;
pub mod isa;
pub mod kernel;
pub mod lowprec;
pub mod map;
pub mod phy;
