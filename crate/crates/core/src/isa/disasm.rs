use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{
    decode, lookup, Form, Instruction, Mnemonic, ProgramImage, ABI_NAMES, CSR_CYCLE, CSR_CYCLEH,
    CSR_MHARTID,
};

fn reg(r: u8) -> &'static str {
    ABI_NAMES[r as usize & 31]
}

/// Render one instruction. Branch and jump targets are printed as signed
/// pc-relative offsets, which the assembler accepts back verbatim.
pub(super) fn render(ins: &Instruction, _pc: Option<u32>) -> String {
    if ins.mnemonic == Mnemonic::Illegal {
        return format!(".word {:#010x}", ins.imm as u32);
    }
    if *ins == Instruction::NOP {
        return String::from("nop");
    }
    let name = ins.name();
    let (rd, rs1, rs2, rs3) = (reg(ins.rd), reg(ins.rs1), reg(ins.rs2), reg(ins.rs3));
    let Some(e) = lookup(ins) else {
        return format!("{name} ?");
    };
    match e.form {
        Form::R => format!("{name} {rd}, {rs1}, {rs2}"),
        Form::R1 => format!("{name} {rd}, {rs1}"),
        Form::R4 => format!("{name} {rd}, {rs1}, {rs2}, {rs3}"),
        Form::I if ins.mnemonic.is_load() || ins.mnemonic == Mnemonic::Jalr => {
            let bang = if ins.post_increment { "!" } else { "" };
            format!("{name} {rd}, {}({rs1}{bang})", ins.imm)
        }
        Form::I | Form::Shift => format!("{name} {rd}, {rs1}, {}", ins.imm),
        Form::S => {
            let bang = if ins.post_increment { "!" } else { "" };
            format!("{name} {rs2}, {}({rs1}{bang})", ins.imm)
        }
        Form::B => format!("{name} {rs1}, {rs2}, {}", ins.imm),
        Form::U => format!("{name} {rd}, {:#x}", ins.imm),
        Form::J => format!("{name} {rd}, {}", ins.imm),
        Form::Csr => {
            let csr = match ins.imm as u32 {
                CSR_CYCLE => "cycle",
                CSR_CYCLEH => "cycleh",
                CSR_MHARTID => "mhartid",
                _ => "?",
            };
            format!("{name} {rd}, {csr}")
        }
        Form::None => name,
    }
}

pub fn disassemble_word(w: u32) -> String {
    render(&decode(w), None)
}

fn label_ok(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '.')
}

/// Text listing that assembles back to the same runs. Symbols that land on
/// a run are emitted as labels.
pub fn disassemble(img: &ProgramImage) -> String {
    let mut by_addr: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for (name, &a) in &img.symbols {
        if label_ok(name) {
            by_addr.entry(a).or_default().push(name);
        }
    }
    let labels = |out: &mut String, a: u32| {
        if let Some(ns) = by_addr.get(&a) {
            for n in ns {
                let _ = writeln!(out, "{n}:");
            }
        }
    };
    let mut out = String::new();
    for run in &img.text {
        let _ = writeln!(out, ".text {:#010x}", run.addr);
        for (i, &w) in run.words.iter().enumerate() {
            let a = run.addr + 4 * i as u32;
            labels(&mut out, a);
            let _ = writeln!(out, "    {}", disassemble_word(w));
        }
    }
    for run in &img.data {
        let _ = writeln!(out, ".data {:#010x}", run.addr);
        for (i, chunk) in run.bytes.chunks(16).enumerate() {
            let a = run.addr + 16 * i as u32;
            // labels inside a chunk would shift; emit those one byte at a time
            let inner = (1..chunk.len() as u32).any(|k| by_addr.contains_key(&(a + k)));
            if inner {
                for (k, b) in chunk.iter().enumerate() {
                    labels(&mut out, a + k as u32);
                    let _ = writeln!(out, "    .byte {b:#04x}");
                }
            } else {
                labels(&mut out, a);
                let bytes: Vec<String> = chunk.iter().map(|b| format!("{b:#04x}")).collect();
                let _ = writeln!(out, "    .byte {}", bytes.join(", "));
            }
        }
    }
    out
}
