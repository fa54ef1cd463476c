//! Host side of sdremu: file formats, configuration, the Monte-Carlo BER
//! harness, cycle reports and the command-line driver.

pub mod cli;
pub mod config;
pub mod fast;
pub mod harness;
pub mod image;
pub mod results;
