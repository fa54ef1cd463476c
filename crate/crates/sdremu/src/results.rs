//! Result files: BER points as CSV, cycle reports as text, constellation
//! tables as CSV.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sdremu_core::phy::Modulation;

use crate::harness::{BerPoint, CycleReport};

pub const BER_HEADER: &str = "snr_db,ber,bit_errors,bits_total,trials,erasures";

#[derive(Debug, thiserror::Error)]
pub enum ResultsError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: expected header `{BER_HEADER}`", path.display())]
    Header { path: PathBuf },
    #[error("{}, line {line}: {msg}", path.display())]
    Parse { path: PathBuf, line: u64, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ResultsError + '_ {
    move |source| ResultsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn render_ber_csv(points: &[BerPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    let s = String::from_utf8(bytes).expect("ascii");
    if points.is_empty() {
        format!("{BER_HEADER}\n")
    } else {
        s
    }
}

pub fn write_ber_csv(points: &[BerPoint], path: &Path) -> Result<(), ResultsError> {
    fs::write(path, render_ber_csv(points)).map_err(io_err(path))
}

pub fn parse_ber_csv(text: &str, path: &Path) -> Result<Vec<BerPoint>, ResultsError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| ResultsError::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>().join(",") != BER_HEADER {
        return Err(ResultsError::Header {
            path: path.to_path_buf(),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let parse = |e: csv::Error| ResultsError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        };
        let rec = rec.map_err(parse)?;
        let line = rec.position().map_or(0, |p| p.line());
        let p: BerPoint = rec.deserialize(None).map_err(|e| ResultsError::Parse {
            path: path.to_path_buf(),
            line,
            msg: e.to_string(),
        })?;
        if p.bit_errors > p.bits_total || !(0.0..=1.0).contains(&p.ber) {
            return Err(ResultsError::Parse {
                path: path.to_path_buf(),
                line,
                msg: "inconsistent counts".into(),
            });
        }
        out.push(p);
    }
    Ok(out)
}

pub fn read_ber_csv(path: &Path) -> Result<Vec<BerPoint>, ResultsError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_ber_csv(&text, path)
}

/// Deterministic part of a cycle report. Host timing goes elsewhere.
pub fn render_cycle_report(r: &CycleReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "variant {}", r.variant);
    let _ = writeln!(s, "shape {}x{}", r.n_tx, r.n_rx);
    let _ = writeln!(s, "batch {}", r.batch);
    let _ = writeln!(s, "harts {}", r.rows.len());
    let _ = writeln!(s, "total_cycles {}", r.total_cycles());
    let _ = writeln!(s, "total_instructions {}", r.total_instructions());
    let _ = writeln!(s, "raw_stalls {}", r.raw_stalls());
    let _ = writeln!(s, "mem_stalls {}", r.mem_stalls());
    let _ = writeln!(s, "barrier_wait {}", r.barrier_wait());
    let _ = writeln!(s, "failed_problems {}", r.failed_problems);
    s.push_str("\nhart instructions cycles raw_stalls mem_stalls barrier_wait\n");
    for h in &r.rows {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            h.hart_id, h.instructions, h.cycles, h.raw_stalls, h.mem_stalls, h.barrier_wait
        );
    }
    s
}

/// `label_bits,I,Q` per point, labels as binary strings.
pub fn render_constellation(m: Modulation) -> String {
    let k = m.bits_per_symbol();
    let mut s = String::from("label_bits,I,Q\n");
    for (l, p) in m.constellation() {
        let _ = writeln!(s, "{l:0k$b},{},{}", p.re, p.im);
    }
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), ResultsError> {
    fs::write(path, contents).map_err(io_err(path))
}
