//! Program images on disk.
//!
//! Binary layout, all fields little-endian u32:
//!
//! ```text
//! "SDRI" | version | entry | run count
//! run count × (kind: 0 text / 1 data, address, byte length)
//! run bytes, in header order
//! ```
//! Symbols go to a sidecar, one `name hexaddr` pair per line.

use std::collections::BTreeMap;

use sdremu_core::isa::{DataRun, ImageError, ProgramImage, TextRun};

const MAGIC: &[u8; 4] = b"SDRI";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ImageFileError {
    #[error("not a program image (bad magic)")]
    Magic,
    #[error("unsupported image version {0}")]
    Version(u32),
    #[error("image truncated")]
    Truncated,
    #[error("unknown run kind {0}")]
    Kind(u32),
    #[error("text run at {0:#010x} is not a whole number of words")]
    TextLength(u32),
    #[error("{0} trailing bytes after the last run")]
    Trailing(usize),
    #[error(transparent)]
    Invalid(#[from] ImageError),
    #[error("symbol map line {0}: expected `name hexaddr`")]
    Symbol(usize),
}

pub fn encode_image(img: &ProgramImage) -> Vec<u8> {
    let runs = img.text.len() + img.data.len();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for w in [VERSION, img.entry, runs as u32] {
        out.extend_from_slice(&w.to_le_bytes());
    }
    for t in &img.text {
        for w in [0, t.addr, 4 * t.words.len() as u32] {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    for d in &img.data {
        for w in [1, d.addr, d.bytes.len() as u32] {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    for t in &img.text {
        for w in &t.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    for d in &img.data {
        out.extend_from_slice(&d.bytes);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ImageFileError> {
        let end = self.at.checked_add(n).ok_or(ImageFileError::Truncated)?;
        let s = self.buf.get(self.at..end).ok_or(ImageFileError::Truncated)?;
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ImageFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Inverse of [`encode_image`]; symbols come from the sidecar.
pub fn decode_image(bytes: &[u8]) -> Result<ProgramImage, ImageFileError> {
    let mut r = Reader { buf: bytes, at: 0 };
    if r.take(4).map_err(|_| ImageFileError::Magic)? != MAGIC {
        return Err(ImageFileError::Magic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ImageFileError::Version(version));
    }
    let entry = r.u32()?;
    let n = r.u32()? as usize;
    let mut heads = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        heads.push((r.u32()?, r.u32()?, r.u32()?));
    }
    let mut img = ProgramImage {
        entry,
        ..Default::default()
    };
    for (kind, addr, len) in heads {
        let body = r.take(len as usize)?;
        match kind {
            0 => {
                if len % 4 != 0 {
                    return Err(ImageFileError::TextLength(addr));
                }
                let words = body
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect();
                img.text.push(TextRun { addr, words });
            }
            1 => img.data.push(DataRun {
                addr,
                bytes: body.to_vec(),
            }),
            k => return Err(ImageFileError::Kind(k)),
        }
    }
    if r.at != bytes.len() {
        return Err(ImageFileError::Trailing(bytes.len() - r.at));
    }
    img.validate()?;
    Ok(img)
}

pub fn render_symbols(symbols: &BTreeMap<String, u32>) -> String {
    symbols
        .iter()
        .map(|(name, a)| format!("{name} {a:08x}\n"))
        .collect()
}

pub fn parse_symbols(text: &str) -> Result<BTreeMap<String, u32>, ImageFileError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || ImageFileError::Symbol(i + 1);
        let mut parts = line.split_whitespace();
        let (Some(name), Some(addr), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let hex = addr.strip_prefix("0x").unwrap_or(addr);
        out.insert(name.to_string(), u32::from_str_radix(hex, 16).map_err(|_| bad())?);
    }
    Ok(out)
}
