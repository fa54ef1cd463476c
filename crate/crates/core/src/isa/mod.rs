//! Instruction set: one declarative encoding table drives both `decode` and
//! `encode`.
//!
//! Encodings of the extensions (the base RV32IM words are standard):
//!
//! | mnemonic              | opcode         | layout                                                  |
//! |-----------------------|----------------|---------------------------------------------------------|
//! | `fadd/fsub/fmul/fdiv` | OP-FP `0x53`   | funct5 00000/00001/00010/00011, fmt, rm=000             |
//! | `fsqrt.*`             | OP-FP          | funct5 01011, rs2=0                                     |
//! | `fcvt.D.S`            | OP-FP          | funct5 01000, fmt=D, rs2=S                              |
//! | `fmadd.*` `fmsub.*`   | `0x43` `0x47`  | R4, fmt in [26:25], rm=000                              |
//! | `wdotp.h` `wdotp.b`   | custom-0 `0x0B`| funct3 000, funct2 00/01, rs3=0; rd += rs1·rs2          |
//! | `cdotp.h`             | custom-0       | funct3 001, funct2 00, rs3=0; rd += rs1·rs2 (complex)   |
//! | `shuffle.h/.b`        | custom-0       | funct3 010, funct2 00/01, selector in register rs3      |
//! | `barrier`             | custom-1 `0x2B`| funct3 000, all other bits zero                         |
//! | `halt`                | custom-1       | funct3 001, all other bits zero                         |
//! | `p.lw`                | custom-1       | I-type, funct3 010; rs1 += imm after the access         |
//! | `p.sw`                | custom-1       | S-type, funct3 011; rs1 += imm after the access         |
//! | `csrr`                | SYSTEM `0x73`  | csrrs rd, csr, x0 with csr ∈ {cycle, cycleh, mhartid}   |
//!
//! fmt codes: 00 = fp32 (`.s`), 10 = fp16 (`.h`), 11 = fp8 (`.b`).

mod asm;
mod disasm;
mod image;

use alloc::string::String;
use core::fmt;

pub use asm::{assemble, assemble_with, AsmError, AsmErrorKind, AsmOptions};
pub use disasm::{disassemble, disassemble_word};
pub use image::{DataRun, ImageError, ProgramImage, TextRun};

use crate::lowprec::{FpFormat, FpName};

pub const CSR_CYCLE: u32 = 0xC00;
pub const CSR_CYCLEH: u32 = 0xC80;
pub const CSR_MHARTID: u32 = 0xF14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mnemonic {
    Lui,
    Auipc,
    Jal,
    Jalr,
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
    Lb,
    Lh,
    Lw,
    Lbu,
    Lhu,
    Sb,
    Sh,
    Sw,
    Addi,
    Slti,
    Sltiu,
    Xori,
    Ori,
    Andi,
    Slli,
    Srli,
    Srai,
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
    Mul,
    Mulh,
    Mulhsu,
    Mulhu,
    Div,
    Divu,
    Rem,
    Remu,
    PLw,
    PSw,
    Fadd,
    Fsub,
    Fmul,
    Fdiv,
    Fsqrt,
    Fmadd,
    Fmsub,
    Fcvt,
    Wdotp,
    Cdotp,
    Shuffle,
    Csrr,
    Barrier,
    Halt,
    /// Undefined encoding; the raw word sits in `imm`.
    Illegal,
}

impl Mnemonic {
    pub const fn base_name(self) -> &'static str {
        use Mnemonic::*;
        match self {
            Lui => "lui",
            Auipc => "auipc",
            Jal => "jal",
            Jalr => "jalr",
            Beq => "beq",
            Bne => "bne",
            Blt => "blt",
            Bge => "bge",
            Bltu => "bltu",
            Bgeu => "bgeu",
            Lb => "lb",
            Lh => "lh",
            Lw => "lw",
            Lbu => "lbu",
            Lhu => "lhu",
            Sb => "sb",
            Sh => "sh",
            Sw => "sw",
            Addi => "addi",
            Slti => "slti",
            Sltiu => "sltiu",
            Xori => "xori",
            Ori => "ori",
            Andi => "andi",
            Slli => "slli",
            Srli => "srli",
            Srai => "srai",
            Add => "add",
            Sub => "sub",
            Sll => "sll",
            Slt => "slt",
            Sltu => "sltu",
            Xor => "xor",
            Srl => "srl",
            Sra => "sra",
            Or => "or",
            And => "and",
            Mul => "mul",
            Mulh => "mulh",
            Mulhsu => "mulhsu",
            Mulhu => "mulhu",
            Div => "div",
            Divu => "divu",
            Rem => "rem",
            Remu => "remu",
            PLw => "p.lw",
            PSw => "p.sw",
            Fadd => "fadd",
            Fsub => "fsub",
            Fmul => "fmul",
            Fdiv => "fdiv",
            Fsqrt => "fsqrt",
            Fmadd => "fmadd",
            Fmsub => "fmsub",
            Fcvt => "fcvt",
            Wdotp => "wdotp",
            Cdotp => "cdotp",
            Shuffle => "shuffle",
            Csrr => "csrr",
            Barrier => "barrier",
            Halt => "halt",
            Illegal => ".word",
        }
    }

    pub const fn is_load(self) -> bool {
        matches!(
            self,
            Mnemonic::Lb | Mnemonic::Lh | Mnemonic::Lw | Mnemonic::Lbu | Mnemonic::Lhu | Mnemonic::PLw
        )
    }

    pub const fn is_store(self) -> bool {
        matches!(self, Mnemonic::Sb | Mnemonic::Sh | Mnemonic::Sw | Mnemonic::PSw)
    }

    pub const fn is_branch(self) -> bool {
        matches!(
            self,
            Mnemonic::Beq | Mnemonic::Bne | Mnemonic::Blt | Mnemonic::Bge | Mnemonic::Bltu | Mnemonic::Bgeu
        )
    }
}

pub const fn fmt_suffix(f: FpName) -> &'static str {
    match f {
        FpName::Fp32 => "s",
        FpName::Fp16 => "h",
        FpName::Fp8 => "b",
    }
}

pub const fn fp_format(f: FpName) -> FpFormat {
    match f {
        FpName::Fp32 => FpFormat::FP32,
        FpName::Fp16 => FpFormat::FP16,
        FpName::Fp8 => FpFormat::FP8,
    }
}

const fn fmt_code(f: FpName) -> u32 {
    match f {
        FpName::Fp32 => 0,
        FpName::Fp16 => 2,
        FpName::Fp8 => 3,
    }
}

/// Operand layout of an encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    /// rd, rs1, rs2
    R,
    /// rd, rs1 (rs2 fixed by the table)
    R1,
    /// rd, rs1, rs2, rs3
    R4,
    /// rd, rs1, imm[11:0]
    I,
    /// rd, rs1, shamt[4:0]
    Shift,
    /// rs1, rs2, imm[11:0]
    S,
    /// rs1, rs2, imm[12:1]
    B,
    /// rd, imm[31:12] held as the 20-bit field value
    U,
    /// rd, imm[20:1]
    J,
    /// rd, csr number in imm
    Csr,
    /// no operands
    None,
}

#[derive(Clone, Copy, Debug)]
pub struct Encoding {
    pub mnemonic: Mnemonic,
    pub fmt: Option<FpName>,
    /// Source format of `fcvt`.
    pub src_fmt: Option<FpName>,
    pub form: Form,
    pub mask: u32,
    pub bits: u32,
}

const OP: u32 = 0x33;
const OP_IMM: u32 = 0x13;
const LOAD: u32 = 0x03;
const STORE: u32 = 0x23;
const BRANCH: u32 = 0x63;
const OP_FP: u32 = 0x53;
const CUSTOM0: u32 = 0x0B;
const CUSTOM1: u32 = 0x2B;

const fn enc(m: Mnemonic, form: Form, mask: u32, bits: u32) -> Encoding {
    Encoding {
        mnemonic: m,
        fmt: None,
        src_fmt: None,
        form,
        mask,
        bits,
    }
}

const fn r(m: Mnemonic, f7: u32, f3: u32) -> Encoding {
    enc(m, Form::R, 0xFE00_707F, (f7 << 25) | (f3 << 12) | OP)
}

const fn i(m: Mnemonic, f3: u32, op: u32) -> Encoding {
    enc(m, Form::I, 0x707F, (f3 << 12) | op)
}

const fn sh(m: Mnemonic, f7: u32, f3: u32) -> Encoding {
    enc(m, Form::Shift, 0xFE00_707F, (f7 << 25) | (f3 << 12) | OP_IMM)
}

const fn s(m: Mnemonic, f3: u32, op: u32) -> Encoding {
    enc(m, Form::S, 0x707F, (f3 << 12) | op)
}

const fn b(m: Mnemonic, f3: u32) -> Encoding {
    enc(m, Form::B, 0x707F, (f3 << 12) | BRANCH)
}

const fn with_fmt(mut e: Encoding, f: FpName) -> Encoding {
    e.fmt = Some(f);
    e
}

const fn fbin(m: Mnemonic, f: FpName, f5: u32) -> Encoding {
    with_fmt(
        enc(m, Form::R, 0xFE00_707F, (((f5 << 2) | fmt_code(f)) << 25) | OP_FP),
        f,
    )
}

const fn fsqrt(f: FpName) -> Encoding {
    with_fmt(
        enc(Mnemonic::Fsqrt, Form::R1, 0xFFF0_707F, (((0b01011 << 2) | fmt_code(f)) << 25) | OP_FP),
        f,
    )
}

const fn fcvt(dst: FpName, src: FpName) -> Encoding {
    let mut e = with_fmt(
        enc(
            Mnemonic::Fcvt,
            Form::R1,
            0xFFF0_707F,
            (((0b01000 << 2) | fmt_code(dst)) << 25) | (fmt_code(src) << 20) | OP_FP,
        ),
        dst,
    );
    e.src_fmt = Some(src);
    e
}

const fn r4(m: Mnemonic, f: FpName, op: u32) -> Encoding {
    with_fmt(enc(m, Form::R4, 0x0600_707F, (fmt_code(f) << 25) | op), f)
}

const fn custom_r(m: Mnemonic, f: FpName, f3: u32, f2: u32) -> Encoding {
    with_fmt(enc(m, Form::R, 0xFE00_707F, (f2 << 25) | (f3 << 12) | CUSTOM0), f)
}

const fn shuffle(f: FpName, f2: u32) -> Encoding {
    with_fmt(
        enc(Mnemonic::Shuffle, Form::R4, 0x0600_707F, (f2 << 25) | (0b010 << 12) | CUSTOM0),
        f,
    )
}

use FpName::{Fp16 as H, Fp32 as S, Fp8 as B};
use Mnemonic as M;

pub static TABLE: &[Encoding] = &[
    enc(M::Lui, Form::U, 0x7F, 0x37),
    enc(M::Auipc, Form::U, 0x7F, 0x17),
    enc(M::Jal, Form::J, 0x7F, 0x6F),
    i(M::Jalr, 0, 0x67),
    b(M::Beq, 0),
    b(M::Bne, 1),
    b(M::Blt, 4),
    b(M::Bge, 5),
    b(M::Bltu, 6),
    b(M::Bgeu, 7),
    i(M::Lb, 0, LOAD),
    i(M::Lh, 1, LOAD),
    i(M::Lw, 2, LOAD),
    i(M::Lbu, 4, LOAD),
    i(M::Lhu, 5, LOAD),
    s(M::Sb, 0, STORE),
    s(M::Sh, 1, STORE),
    s(M::Sw, 2, STORE),
    i(M::Addi, 0, OP_IMM),
    i(M::Slti, 2, OP_IMM),
    i(M::Sltiu, 3, OP_IMM),
    i(M::Xori, 4, OP_IMM),
    i(M::Ori, 6, OP_IMM),
    i(M::Andi, 7, OP_IMM),
    sh(M::Slli, 0, 1),
    sh(M::Srli, 0, 5),
    sh(M::Srai, 0x20, 5),
    r(M::Add, 0, 0),
    r(M::Sub, 0x20, 0),
    r(M::Sll, 0, 1),
    r(M::Slt, 0, 2),
    r(M::Sltu, 0, 3),
    r(M::Xor, 0, 4),
    r(M::Srl, 0, 5),
    r(M::Sra, 0x20, 5),
    r(M::Or, 0, 6),
    r(M::And, 0, 7),
    r(M::Mul, 1, 0),
    r(M::Mulh, 1, 1),
    r(M::Mulhsu, 1, 2),
    r(M::Mulhu, 1, 3),
    r(M::Div, 1, 4),
    r(M::Divu, 1, 5),
    r(M::Rem, 1, 6),
    r(M::Remu, 1, 7),
    i(M::PLw, 2, CUSTOM1),
    s(M::PSw, 3, CUSTOM1),
    fbin(M::Fadd, S, 0),
    fbin(M::Fadd, H, 0),
    fbin(M::Fadd, B, 0),
    fbin(M::Fsub, S, 1),
    fbin(M::Fsub, H, 1),
    fbin(M::Fsub, B, 1),
    fbin(M::Fmul, S, 2),
    fbin(M::Fmul, H, 2),
    fbin(M::Fmul, B, 2),
    fbin(M::Fdiv, S, 3),
    fbin(M::Fdiv, H, 3),
    fbin(M::Fdiv, B, 3),
    fsqrt(S),
    fsqrt(H),
    fsqrt(B),
    r4(M::Fmadd, S, 0x43),
    r4(M::Fmadd, H, 0x43),
    r4(M::Fmadd, B, 0x43),
    r4(M::Fmsub, S, 0x47),
    r4(M::Fmsub, H, 0x47),
    r4(M::Fmsub, B, 0x47),
    fcvt(S, H),
    fcvt(S, B),
    fcvt(H, S),
    fcvt(H, B),
    fcvt(B, S),
    fcvt(B, H),
    custom_r(M::Wdotp, H, 0, 0),
    custom_r(M::Wdotp, B, 0, 1),
    custom_r(M::Cdotp, H, 1, 0),
    shuffle(H, 0),
    shuffle(B, 1),
    enc(M::Csrr, Form::Csr, 0x000F_F07F, (2 << 12) | 0x73),
    enc(M::Barrier, Form::None, 0xFFFF_FFFF, CUSTOM1),
    enc(M::Halt, Form::None, 0xFFFF_FFFF, (1 << 12) | CUSTOM1),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub mnemonic: Mnemonic,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub rs3: u8,
    pub imm: i32,
    /// Lane / element format of FP and SIMD instructions (destination format
    /// for `fcvt`).
    pub fmt: Option<FpName>,
    pub src_fmt: Option<FpName>,
    pub post_increment: bool,
}

impl Instruction {
    pub const NOP: Instruction = Instruction::new(Mnemonic::Addi);

    pub const fn new(mnemonic: Mnemonic) -> Self {
        Instruction {
            mnemonic,
            rd: 0,
            rs1: 0,
            rs2: 0,
            rs3: 0,
            imm: 0,
            fmt: None,
            src_fmt: None,
            post_increment: matches!(mnemonic, Mnemonic::PLw | Mnemonic::PSw),
        }
    }

    pub fn name(&self) -> String {
        let mut s = String::from(self.mnemonic.base_name());
        if let Some(f) = self.fmt {
            s.push('.');
            s.push_str(fmt_suffix(f));
        }
        if let Some(f) = self.src_fmt {
            s.push('.');
            s.push_str(fmt_suffix(f));
        }
        s
    }

    /// Registers read by the instruction (x0 included when named; callers
    /// treat it as always ready).
    pub fn sources(&self) -> ([u8; 3], usize) {
        use Mnemonic::*;
        match self.mnemonic {
            Lui | Auipc | Jal | Csrr | Barrier | Halt | Illegal => ([0; 3], 0),
            Wdotp | Cdotp => ([self.rs1, self.rs2, self.rd], 3),
            Fmadd | Fmsub | Shuffle => ([self.rs1, self.rs2, self.rs3], 3),
            _ => match form_of(self) {
                Form::R | Form::S | Form::B => ([self.rs1, self.rs2, 0], 2),
                _ => ([self.rs1, 0, 0], 1),
            },
        }
    }

    /// Register written with the instruction result, if any.
    pub fn dest(&self) -> Option<u8> {
        use Mnemonic::*;
        match self.mnemonic {
            Barrier | Halt | Illegal => None,
            m if m.is_branch() || m.is_store() => None,
            _ if self.rd == 0 => None,
            _ => Some(self.rd),
        }
    }
}

fn form_of(ins: &Instruction) -> Form {
    lookup(ins).map(|e| e.form).unwrap_or(Form::None)
}

fn lookup(ins: &Instruction) -> Option<&'static Encoding> {
    TABLE
        .iter()
        .find(|e| e.mnemonic == ins.mnemonic && e.fmt == ins.fmt && e.src_fmt == ins.src_fmt)
}

fn sext(v: u32, bits: u32) -> i32 {
    ((v << (32 - bits)) as i32) >> (32 - bits)
}

/// Decode one word. Undefined encodings come back as `Illegal` with the raw
/// word in `imm`.
pub fn decode(w: u32) -> Instruction {
    let Some(e) = TABLE.iter().find(|e| w & e.mask == e.bits) else {
        return illegal(w);
    };
    let rd = ((w >> 7) & 31) as u8;
    let rs1 = ((w >> 15) & 31) as u8;
    let rs2 = ((w >> 20) & 31) as u8;
    let rs3 = (w >> 27) as u8;
    let mut ins = Instruction::new(e.mnemonic);
    ins.fmt = e.fmt;
    ins.src_fmt = e.src_fmt;
    match e.form {
        Form::R => {
            ins.rd = rd;
            ins.rs1 = rs1;
            ins.rs2 = rs2;
        }
        Form::R1 => {
            ins.rd = rd;
            ins.rs1 = rs1;
        }
        Form::R4 => {
            ins.rd = rd;
            ins.rs1 = rs1;
            ins.rs2 = rs2;
            ins.rs3 = rs3;
        }
        Form::I => {
            ins.rd = rd;
            ins.rs1 = rs1;
            ins.imm = sext(w >> 20, 12);
        }
        Form::Shift => {
            ins.rd = rd;
            ins.rs1 = rs1;
            ins.imm = rs2 as i32;
        }
        Form::S => {
            ins.rs1 = rs1;
            ins.rs2 = rs2;
            ins.imm = sext(((w >> 25) << 5) | ((w >> 7) & 31), 12);
        }
        Form::B => {
            ins.rs1 = rs1;
            ins.rs2 = rs2;
            let v = ((w >> 31) << 12)
                | (((w >> 7) & 1) << 11)
                | (((w >> 25) & 0x3F) << 5)
                | (((w >> 8) & 0xF) << 1);
            ins.imm = sext(v, 13);
        }
        Form::U => {
            ins.rd = rd;
            ins.imm = (w >> 12) as i32;
        }
        Form::J => {
            ins.rd = rd;
            let v = ((w >> 31) << 20)
                | (((w >> 12) & 0xFF) << 12)
                | (((w >> 20) & 1) << 11)
                | (((w >> 21) & 0x3FF) << 1);
            ins.imm = sext(v, 21);
        }
        Form::Csr => {
            let csr = w >> 20;
            if !matches!(csr, CSR_CYCLE | CSR_CYCLEH | CSR_MHARTID) {
                return illegal(w);
            }
            ins.rd = rd;
            ins.imm = csr as i32;
        }
        Form::None => {}
    }
    ins
}

fn illegal(w: u32) -> Instruction {
    let mut ins = Instruction::new(Mnemonic::Illegal);
    ins.imm = w as i32;
    ins
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("{field} value {value} is out of range for {mnemonic}")]
    Range {
        mnemonic: &'static str,
        field: &'static str,
        value: i64,
    },
    #[error("no encoding for {0}")]
    NoEncoding(String),
}

fn range(ins: &Instruction, field: &'static str, value: i64) -> EncodeError {
    EncodeError::Range {
        mnemonic: ins.mnemonic.base_name(),
        field,
        value,
    }
}

fn check_imm(ins: &Instruction, lo: i64, hi: i64, align: i64, field: &'static str) -> Result<u32, EncodeError> {
    let v = ins.imm as i64;
    if v < lo || v > hi || v % align != 0 {
        return Err(range(ins, field, v));
    }
    Ok(ins.imm as u32)
}

pub fn encode(ins: &Instruction) -> Result<u32, EncodeError> {
    if ins.mnemonic == Mnemonic::Illegal {
        return Ok(ins.imm as u32);
    }
    let e = lookup(ins).ok_or_else(|| EncodeError::NoEncoding(ins.name()))?;
    for (field, r) in [("rd", ins.rd), ("rs1", ins.rs1), ("rs2", ins.rs2), ("rs3", ins.rs3)] {
        if r > 31 {
            return Err(range(ins, field, r as i64));
        }
    }
    let rd = (ins.rd as u32) << 7;
    let rs1 = (ins.rs1 as u32) << 15;
    let rs2 = (ins.rs2 as u32) << 20;
    let rs3 = (ins.rs3 as u32) << 27;
    let w = match e.form {
        Form::R => rd | rs1 | rs2,
        Form::R1 => rd | rs1,
        Form::R4 => rd | rs1 | rs2 | rs3,
        Form::I => {
            let v = check_imm(ins, -2048, 2047, 1, "imm[11:0]")?;
            rd | rs1 | ((v & 0xFFF) << 20)
        }
        Form::Shift => {
            let v = check_imm(ins, 0, 31, 1, "shamt")?;
            rd | rs1 | (v << 20)
        }
        Form::S => {
            let v = check_imm(ins, -2048, 2047, 1, "imm[11:0]")?;
            rs1 | rs2 | (((v >> 5) & 0x7F) << 25) | ((v & 31) << 7)
        }
        Form::B => {
            let v = check_imm(ins, -4096, 4094, 2, "imm[12:1]")?;
            rs1 | rs2
                | (((v >> 12) & 1) << 31)
                | (((v >> 5) & 0x3F) << 25)
                | (((v >> 1) & 0xF) << 8)
                | (((v >> 11) & 1) << 7)
        }
        Form::U => {
            let v = check_imm(ins, 0, 0xF_FFFF, 1, "imm[31:12]")?;
            rd | (v << 12)
        }
        Form::J => {
            let v = check_imm(ins, -(1 << 20), (1 << 20) - 2, 2, "imm[20:1]")?;
            rd | (((v >> 20) & 1) << 31)
                | (((v >> 1) & 0x3FF) << 21)
                | (((v >> 11) & 1) << 20)
                | (((v >> 12) & 0xFF) << 12)
        }
        Form::Csr => {
            let csr = ins.imm as u32;
            if !matches!(csr, CSR_CYCLE | CSR_CYCLEH | CSR_MHARTID) {
                return Err(range(ins, "csr", ins.imm as i64));
            }
            rd | (csr << 20)
        }
        Form::None => 0,
    };
    Ok(w | e.bits)
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&disasm::render(self, None))
    }
}

pub const ABI_NAMES: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4",
    "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4",
    "t5", "t6",
];

pub fn parse_register(s: &str) -> Option<u8> {
    if let Some(n) = s.strip_prefix('x') {
        if let Ok(v) = n.parse::<u8>() {
            if v < 32 && (n == "0" || !n.starts_with('0')) {
                return Some(v);
            }
        }
    }
    if s == "fp" {
        return Some(8);
    }
    ABI_NAMES.iter().position(|&n| n == s).map(|p| p as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_nop() {
        let ins = decode(0x0000_0013);
        assert_eq!(ins, Instruction::NOP);
        assert_eq!(encode(&ins).unwrap(), 0x13);
    }

    #[test]
    fn all_ones_is_illegal() {
        let ins = decode(0xFFFF_FFFF);
        assert_eq!(ins.mnemonic, Mnemonic::Illegal);
        assert_eq!(ins.imm as u32, 0xFFFF_FFFF);
    }

    #[test]
    fn addi_encoding() {
        let mut ins = Instruction::new(Mnemonic::Addi);
        ins.rd = 1;
        ins.imm = 5;
        assert_eq!(encode(&ins).unwrap(), 0x0050_0093);
        ins.imm = 1 << 20;
        assert!(matches!(
            encode(&ins),
            Err(EncodeError::Range { field: "imm[11:0]", .. })
        ));
    }

    #[test]
    fn table_entries_do_not_overlap() {
        for (a, ea) in TABLE.iter().enumerate() {
            for eb in &TABLE[a + 1..] {
                let common = ea.mask & eb.mask;
                assert_ne!(
                    ea.bits & common,
                    eb.bits & common,
                    "{:?} and {:?} overlap",
                    ea.mnemonic,
                    eb.mnemonic
                );
            }
        }
    }

    #[test]
    fn standard_words() {
        // values from the RISC-V unprivileged spec encodings
        assert_eq!(decode(0x02A5_8533).name(), "mul");
        assert_eq!(decode(0x0001_2083).name(), "lw");
        assert_eq!(decode(0xC000_2573).imm as u32, CSR_CYCLE);
        assert_eq!(decode(0x4400_8053).name(), "fcvt.h.s");
    }
}
