//! Two-pass assembler.
//!
//! Grammar, one statement per line, `#` starts a comment:
//!
//! ```text
//! label:  mnemonic op, op, ...
//!         .text [addr] | .data [addr]
//!         .word v, ... | .half v, ... | .byte v, ... | .space n | .align n
//! ```
//! Memory operands are `imm(reg)`, or `imm(reg!)` for post-increment.
//! Branch and jump targets are labels or numeric pc-relative offsets.
//! Pseudo-instructions: nop, li, la, mv, j, beqz, bnez, ret.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{
    encode, parse_register, EncodeError, Form, Instruction, Mnemonic, ProgramImage, TABLE,
    CSR_CYCLE, CSR_CYCLEH, CSR_MHARTID,
};
use crate::isa::{DataRun, TextRun};
use crate::map;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AsmOptions {
    pub text_base: u32,
    pub data_base: u32,
}

impl Default for AsmOptions {
    fn default() -> Self {
        AsmOptions {
            text_base: map::TEXT_BASE,
            data_base: map::L2_BASE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AsmErrorKind {
    UnknownMnemonic(String),
    Operand(String),
    OperandCount { expected: usize, found: usize },
    UndefinedLabel(String),
    DuplicateLabel { name: String, first_line: usize },
    Directive(String),
    Encode(EncodeError),
    Image(super::ImageError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match &self.kind {
            AsmErrorKind::UnknownMnemonic(m) => write!(f, "unknown mnemonic `{m}`"),
            AsmErrorKind::Operand(o) => write!(f, "malformed operand `{o}`"),
            AsmErrorKind::OperandCount { expected, found } => {
                write!(f, "expected {expected} operands, found {found}")
            }
            AsmErrorKind::UndefinedLabel(l) => write!(f, "undefined label `{l}`"),
            AsmErrorKind::DuplicateLabel { name, first_line } => write!(
                f,
                "duplicate label `{name}` (first defined on line {first_line})"
            ),
            AsmErrorKind::Directive(d) => write!(f, "bad directive: {d}"),
            AsmErrorKind::Encode(e) => write!(f, "{e}"),
            AsmErrorKind::Image(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for AsmError {}

fn err<T>(line: usize, kind: AsmErrorKind) -> Result<T, AsmError> {
    Err(AsmError { line, kind })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Text,
    Data,
}

enum Item<'a> {
    Ins {
        mnem: &'a str,
        ops: Vec<&'a str>,
    },
    Words(Vec<&'a str>),
    Bytes(Vec<u8>),
}

struct Placed<'a> {
    line: usize,
    section: Section,
    addr: u32,
    item: Item<'a>,
}

pub fn parse_int(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let v = if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(&h.replace('_', ""), 16).ok()?
    } else if let Some(b) = body.strip_prefix("0b") {
        i64::from_str_radix(&b.replace('_', ""), 2).ok()?
    } else {
        if body.is_empty() || !body.bytes().all(|c| c.is_ascii_digit() || c == b'_') {
            return None;
        }
        body.replace('_', "").parse::<i64>().ok()?
    };
    Some(if neg { -v } else { v })
}

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_' || ch == '.')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '.')
}

fn split_ops(s: &str) -> Vec<&str> {
    if s.trim().is_empty() {
        return Vec::new();
    }
    s.split(',').map(str::trim).collect()
}

/// Size in bytes of an instruction statement, known in pass 1.
fn ins_size(mnem: &str, ops: &[&str]) -> u32 {
    match mnem {
        "la" => 8,
        "li" => match ops.get(1).and_then(|o| parse_int(o)) {
            Some(v) if (-2048..2048).contains(&v) => 4,
            _ => 8,
        },
        _ => 4,
    }
}

pub fn assemble(src: &str) -> Result<ProgramImage, AsmError> {
    assemble_with(src, &AsmOptions::default())
}

pub fn assemble_with(src: &str, opts: &AsmOptions) -> Result<ProgramImage, AsmError> {
    let mut labels: BTreeMap<&str, (u32, usize)> = BTreeMap::new();
    let mut placed: Vec<Placed> = Vec::new();
    let mut section = Section::Text;
    let mut loc = [opts.text_base, opts.data_base];
    let mut started = [false, false];

    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let mut rest = raw.split('#').next().unwrap_or("").trim();
        while let Some(colon) = rest.find(':') {
            let name = rest[..colon].trim();
            if !is_ident(name) {
                break;
            }
            let here = loc[section as usize];
            if let Some(&(_, first_line)) = labels.get(name) {
                return err(
                    line,
                    AsmErrorKind::DuplicateLabel {
                        name: name.to_string(),
                        first_line,
                    },
                );
            }
            labels.insert(name, (here, line));
            rest = rest[colon + 1..].trim();
        }
        if rest.is_empty() {
            continue;
        }
        let (head, tail) = match rest.find(char::is_whitespace) {
            Some(p) => (&rest[..p], rest[p..].trim()),
            None => (rest, ""),
        };
        let ops = split_ops(tail);
        let s = section as usize;
        let here = loc[s];
        let item = match head {
            ".text" | ".data" => {
                section = if head == ".text" {
                    Section::Text
                } else {
                    Section::Data
                };
                if let Some(a) = ops.first() {
                    let s = section as usize;
                    if started[s] {
                        return err(
                            line,
                            AsmErrorKind::Directive(format!("{head} address after content")),
                        );
                    }
                    match parse_int(a) {
                        Some(v) if (0..=u32::MAX as i64).contains(&v) => loc[s] = v as u32,
                        _ => return err(line, AsmErrorKind::Operand(a.to_string())),
                    }
                }
                continue;
            }
            ".word" => Item::Words(ops.clone()),
            ".half" | ".byte" => {
                let w = if head == ".half" { 2 } else { 1 };
                let mut bytes = Vec::new();
                for o in &ops {
                    let v = parse_int(o)
                        .filter(|v| *v >= -(1 << (8 * w - 1)) && *v < (1 << (8 * w)))
                        .ok_or_else(|| AsmError {
                            line,
                            kind: AsmErrorKind::Operand(o.to_string()),
                        })?;
                    bytes.extend_from_slice(&(v as u16).to_le_bytes()[..w]);
                }
                Item::Bytes(bytes)
            }
            ".space" => {
                let n = ops
                    .first()
                    .and_then(|o| parse_int(o))
                    .filter(|v| (0..1 << 24).contains(v))
                    .ok_or_else(|| AsmError {
                        line,
                        kind: AsmErrorKind::Directive(".space needs a size".into()),
                    })?;
                Item::Bytes(vec![0; n as usize])
            }
            ".align" => {
                let n = ops
                    .first()
                    .and_then(|o| parse_int(o))
                    .filter(|v| (0..=12).contains(v))
                    .ok_or_else(|| AsmError {
                        line,
                        kind: AsmErrorKind::Directive(".align needs 0..=12".into()),
                    })?;
                let a = 1u32 << n;
                let pad = (a - here % a) % a;
                if section == Section::Text {
                    if !pad.is_multiple_of(4) {
                        return err(
                            line,
                            AsmErrorKind::Directive("misaligned text".into()),
                        );
                    }
                    for k in 0..pad / 4 {
                        placed.push(Placed {
                            line,
                            section,
                            addr: here + 4 * k,
                            item: Item::Ins {
                                mnem: "nop",
                                ops: Vec::new(),
                            },
                        });
                    }
                    loc[s] += pad;
                    started[s] |= pad > 0;
                    continue;
                }
                Item::Bytes(vec![0; pad as usize])
            }
            d if d.starts_with('.') => {
                return err(line, AsmErrorKind::Directive(format!("unknown directive {d}")))
            }
            m => {
                if section == Section::Data {
                    return err(
                        line,
                        AsmErrorKind::Directive(format!("instruction `{m}` in .data")),
                    );
                }
                if !here.is_multiple_of(4) {
                    return err(line, AsmErrorKind::Directive("misaligned text".into()));
                }
                Item::Ins { mnem: m, ops }
            }
        };
        let size = match &item {
            Item::Ins { mnem, ops } => ins_size(mnem, ops),
            Item::Words(w) => 4 * w.len() as u32,
            Item::Bytes(b) => b.len() as u32,
        };
        placed.push(Placed {
            line,
            section,
            addr: here,
            item,
        });
        loc[s] = here.wrapping_add(size);
        started[s] = true;
    }

    let symbols: BTreeMap<String, u32> =
        labels.iter().map(|(k, v)| (k.to_string(), v.0)).collect();
    let resolve = |line: usize, s: &str| -> Result<u32, AsmError> {
        match labels.get(s) {
            Some(&(a, _)) => Ok(a),
            None => err(line, AsmErrorKind::UndefinedLabel(s.to_string())),
        }
    };

    let mut text: Vec<u8> = Vec::new();
    let mut data: Vec<u8> = Vec::new();
    let bases = [
        placed
            .iter()
            .find(|p| p.section == Section::Text)
            .map_or(opts.text_base, |p| p.addr),
        placed
            .iter()
            .find(|p| p.section == Section::Data)
            .map_or(opts.data_base, |p| p.addr),
    ];
    for p in &placed {
        let out = match p.section {
            Section::Text => &mut text,
            Section::Data => &mut data,
        };
        debug_assert_eq!(bases[p.section as usize] + out.len() as u32, p.addr);
        match &p.item {
            Item::Bytes(b) => out.extend_from_slice(b),
            Item::Words(ws) => {
                for w in ws {
                    let v = match parse_int(w) {
                        Some(v) if (-(1i64 << 31)..(1i64 << 32)).contains(&v) => v as u32,
                        Some(_) => return err(p.line, AsmErrorKind::Operand(w.to_string())),
                        None if is_ident(w) => resolve(p.line, w)?,
                        None => return err(p.line, AsmErrorKind::Operand(w.to_string())),
                    };
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Item::Ins { mnem, ops } => {
                for ins in expand(p.line, p.addr, mnem, ops, &resolve)? {
                    let w = encode(&ins).map_err(|e| AsmError {
                        line: p.line,
                        kind: AsmErrorKind::Encode(e),
                    })?;
                    out.extend_from_slice(&w.to_le_bytes());
                }
            }
        }
    }
    if !text.len().is_multiple_of(4) {
        text.resize(text.len().next_multiple_of(4), 0);
    }
    let mut image = ProgramImage {
        text: Vec::new(),
        data: Vec::new(),
        entry: symbols.get("_start").copied().unwrap_or(bases[0]),
        symbols,
    };
    if !text.is_empty() {
        image.text.push(TextRun {
            addr: bases[0],
            words: text
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        });
    }
    if !data.is_empty() {
        image.data.push(DataRun {
            addr: bases[1],
            bytes: data,
        });
    }
    image.validate().map_err(|e| AsmError {
        line: 0,
        kind: AsmErrorKind::Image(e),
    })?;
    Ok(image)
}

struct Ops<'a, 'b> {
    line: usize,
    ops: &'b [&'a str],
}

impl Ops<'_, '_> {
    fn expect(&self, n: usize) -> Result<(), AsmError> {
        if self.ops.len() != n {
            return err(
                self.line,
                AsmErrorKind::OperandCount {
                    expected: n,
                    found: self.ops.len(),
                },
            );
        }
        Ok(())
    }

    fn bad<T>(&self, o: &str) -> Result<T, AsmError> {
        err(self.line, AsmErrorKind::Operand(o.to_string()))
    }

    fn reg(&self, i: usize) -> Result<u8, AsmError> {
        let o = self.ops[i];
        parse_register(o).map_or_else(|| self.bad(o), Ok)
    }

    fn imm(&self, i: usize) -> Result<i32, AsmError> {
        let o = self.ops[i];
        match parse_int(o) {
            Some(v) if (i32::MIN as i64..=u32::MAX as i64).contains(&v) => Ok(v as i32),
            _ => self.bad(o),
        }
    }

    /// `imm(reg)` or `imm(reg!)`; returns (imm, reg, post-increment marker).
    fn mem(&self, i: usize) -> Result<(i32, u8, bool), AsmError> {
        let o = self.ops[i];
        let Some(open) = o.find('(') else {
            return self.bad(o);
        };
        let Some(inner) = o[open + 1..].strip_suffix(')') else {
            return self.bad(o);
        };
        let (reg, bang) = match inner.trim().strip_suffix('!') {
            Some(r) => (r.trim(), true),
            None => (inner.trim(), false),
        };
        let off = o[..open].trim();
        let imm = if off.is_empty() {
            0
        } else {
            match parse_int(off) {
                Some(v) if (i32::MIN as i64..=i32::MAX as i64).contains(&v) => v as i32,
                _ => return self.bad(o),
            }
        };
        let r = parse_register(reg).map_or_else(|| self.bad(o), Ok)?;
        Ok((imm, r, bang))
    }
}

fn find_encoding(name: &str) -> Option<&'static super::Encoding> {
    TABLE.iter().find(|e| {
        let mut ins = Instruction::new(e.mnemonic);
        ins.fmt = e.fmt;
        ins.src_fmt = e.src_fmt;
        ins.name() == name
    })
}

fn expand(
    line: usize,
    pc: u32,
    mnem: &str,
    ops: &[&str],
    resolve: &dyn Fn(usize, &str) -> Result<u32, AsmError>,
) -> Result<Vec<Instruction>, AsmError> {
    let o = Ops { line, ops };
    let target = |i: usize| -> Result<i32, AsmError> {
        let s = ops[i];
        if let Some(v) = parse_int(s) {
            return i32::try_from(v).map_or_else(|_| o.bad(s), Ok);
        }
        if !is_ident(s) {
            return o.bad(s);
        }
        Ok(resolve(line, s)?.wrapping_sub(pc) as i32)
    };
    let mk = |m: Mnemonic, rd: u8, rs1: u8, rs2: u8, imm: i32| {
        let mut ins = Instruction::new(m);
        ins.rd = rd;
        ins.rs1 = rs1;
        ins.rs2 = rs2;
        ins.imm = imm;
        ins
    };
    let hi_lo = |v: u32| {
        let hi = (v.wrapping_add(0x800) >> 12) & 0xF_FFFF;
        let lo = v.wrapping_sub(hi << 12) as i32;
        (hi as i32, lo)
    };
    let one = |i: Instruction| Ok(vec![i]);
    match mnem {
        "nop" => {
            o.expect(0)?;
            return one(Instruction::NOP);
        }
        "mv" => {
            o.expect(2)?;
            return one(mk(Mnemonic::Addi, o.reg(0)?, o.reg(1)?, 0, 0));
        }
        "ret" => {
            o.expect(0)?;
            return one(mk(Mnemonic::Jalr, 0, 1, 0, 0));
        }
        "j" => {
            o.expect(1)?;
            return one(mk(Mnemonic::Jal, 0, 0, 0, target(0)?));
        }
        "beqz" | "bnez" => {
            o.expect(2)?;
            let m = if mnem == "beqz" {
                Mnemonic::Beq
            } else {
                Mnemonic::Bne
            };
            return one(mk(m, 0, o.reg(0)?, 0, target(1)?));
        }
        "li" => {
            o.expect(2)?;
            let rd = o.reg(0)?;
            let v = o.imm(1)?;
            if ins_size(mnem, ops) == 4 {
                return one(mk(Mnemonic::Addi, rd, 0, 0, v));
            }
            let (hi, lo) = hi_lo(v as u32);
            return Ok(vec![
                mk(Mnemonic::Lui, rd, 0, 0, hi),
                mk(Mnemonic::Addi, rd, rd, 0, lo),
            ]);
        }
        "la" => {
            o.expect(2)?;
            let rd = o.reg(0)?;
            if !is_ident(ops[1]) {
                return o.bad(ops[1]);
            }
            let (hi, lo) = hi_lo(resolve(line, ops[1])?);
            return Ok(vec![
                mk(Mnemonic::Lui, rd, 0, 0, hi),
                mk(Mnemonic::Addi, rd, rd, 0, lo),
            ]);
        }
        _ => {}
    }
    let e = find_encoding(mnem).ok_or_else(|| AsmError {
        line,
        kind: AsmErrorKind::UnknownMnemonic(mnem.to_string()),
    })?;
    let mut ins = Instruction::new(e.mnemonic);
    ins.fmt = e.fmt;
    ins.src_fmt = e.src_fmt;
    let m = e.mnemonic;
    match e.form {
        Form::R => {
            o.expect(3)?;
            (ins.rd, ins.rs1, ins.rs2) = (o.reg(0)?, o.reg(1)?, o.reg(2)?);
        }
        Form::R1 => {
            o.expect(2)?;
            (ins.rd, ins.rs1) = (o.reg(0)?, o.reg(1)?);
        }
        Form::R4 => {
            o.expect(4)?;
            (ins.rd, ins.rs1, ins.rs2, ins.rs3) = (o.reg(0)?, o.reg(1)?, o.reg(2)?, o.reg(3)?);
        }
        Form::I if m.is_load() => {
            o.expect(2)?;
            ins.rd = o.reg(0)?;
            let (imm, rs1, bang) = o.mem(1)?;
            if bang != (m == Mnemonic::PLw) {
                return o.bad(ops[1]);
            }
            (ins.imm, ins.rs1) = (imm, rs1);
        }
        Form::I if m == Mnemonic::Jalr => match ops.len() {
            1 => {
                ins.rd = 1;
                ins.rs1 = o.reg(0)?;
            }
            2 => {
                ins.rd = o.reg(0)?;
                let (imm, rs1, bang) = o.mem(1)?;
                if bang {
                    return o.bad(ops[1]);
                }
                (ins.imm, ins.rs1) = (imm, rs1);
            }
            _ => {
                o.expect(3)?;
                (ins.rd, ins.rs1, ins.imm) = (o.reg(0)?, o.reg(1)?, o.imm(2)?);
            }
        },
        Form::I | Form::Shift => {
            o.expect(3)?;
            (ins.rd, ins.rs1, ins.imm) = (o.reg(0)?, o.reg(1)?, o.imm(2)?);
        }
        Form::S => {
            o.expect(2)?;
            ins.rs2 = o.reg(0)?;
            let (imm, rs1, bang) = o.mem(1)?;
            if bang != (m == Mnemonic::PSw) {
                return o.bad(ops[1]);
            }
            (ins.imm, ins.rs1) = (imm, rs1);
        }
        Form::B => {
            o.expect(3)?;
            (ins.rs1, ins.rs2, ins.imm) = (o.reg(0)?, o.reg(1)?, target(2)?);
        }
        Form::U => {
            o.expect(2)?;
            (ins.rd, ins.imm) = (o.reg(0)?, o.imm(1)?);
        }
        Form::J => {
            if ops.len() == 1 {
                (ins.rd, ins.imm) = (1, target(0)?);
            } else {
                o.expect(2)?;
                (ins.rd, ins.imm) = (o.reg(0)?, target(1)?);
            }
        }
        Form::Csr => {
            o.expect(2)?;
            ins.rd = o.reg(0)?;
            ins.imm = match ops[1] {
                "cycle" => CSR_CYCLE,
                "cycleh" => CSR_CYCLEH,
                "mhartid" => CSR_MHARTID,
                s => match parse_int(s) {
                    Some(v) if (0..4096).contains(&v) => v as u32,
                    _ => return o.bad(s),
                },
            } as i32;
        }
        Form::None => o.expect(0)?,
    }
    Ok(vec![ins])
}
