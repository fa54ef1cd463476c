//! One hart: instruction-accurate execution plus the static-latency RAW
//! scoreboard that produces the cycle estimate.

mod latency;

use alloc::vec::Vec;

pub use latency::{LatencyError, LatencyTable, MemoryLatencyMode};

use crate::isa::{
    decode, fp_format, Instruction, Mnemonic, ProgramImage, CSR_CYCLE, CSR_CYCLEH, CSR_MHARTID,
};
use crate::lowprec::{
    complex_dotprod16, shuffle, widening_dotprod, LaneFormat, PackedWord, ShuffleError, Widening,
    fp_add, fp_cast, fp_div, fp_fma, fp_fms, fp_mul, fp_sqrt, fp_sub, sign_extend, FpName,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MemFault {
    #[error("misaligned {width}-byte access at {addr:#010x}")]
    Misaligned { addr: u32, width: u32 },
    #[error("address {addr:#010x} is outside the memory map")]
    OutOfMap { addr: u32 },
}

/// The data side of the machine as one hart sees it.
pub trait DataMemory {
    /// Little-endian read of `width` ∈ {1, 2, 4} bytes, zero-extended.
    fn read(&self, addr: u32, width: u32) -> Result<u32, MemFault>;
    fn write(&self, addr: u32, width: u32, value: u32) -> Result<(), MemFault>;
    /// Access latency in region mode for a request from `hart_id`.
    fn region_latency(&self, addr: u32, hart_id: u32) -> u32;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TrapCause {
    #[error("illegal instruction {0:#010x}")]
    Illegal(u32),
    #[error("instruction fetch outside the program text")]
    FetchFault,
    #[error("{0}")]
    Memory(MemFault),
    #[error("{0}")]
    Shuffle(ShuffleError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("trap at pc {pc:#010x}: {cause}")]
pub struct Trap {
    pub pc: u32,
    pub cause: TrapCause,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HartStatus {
    Running,
    AtBarrier,
    Halted,
    Trapped,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HartStats {
    pub instructions: u64,
    pub raw_stalls: u64,
    pub mem_stalls: u64,
    pub barrier_wait: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Retired,
    Barrier,
    Halted,
    Trapped(Trap),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepReport {
    pub pc: u32,
    pub instruction: Instruction,
    pub issue_cycle: u64,
    pub stall_cycles: u64,
    pub outcome: StepOutcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    Halted,
    AtBarrier,
    Trapped(Trap),
    StepBudgetExhausted,
}

#[derive(Clone, Copy, Debug)]
struct Decoded {
    ins: Instruction,
    latency: u32,
}

/// Text decoded once at load time, with each instruction's static latency
/// resolved from the table.
#[derive(Clone, Debug)]
pub struct Program {
    base: u32,
    code: Vec<Decoded>,
    memory_mode: MemoryLatencyMode,
    uniform_latency: u32,
    pub entry: u32,
}

impl Program {
    /// Gaps between text runs decode as illegal words.
    pub fn new(image: &ProgramImage, table: &LatencyTable) -> Self {
        let lo = image.text.iter().map(|r| r.addr).min().unwrap_or(0);
        let hi = image
            .text
            .iter()
            .map(|r| r.addr as u64 + 4 * r.words.len() as u64)
            .max()
            .unwrap_or(0);
        let mut words = alloc::vec![0u32; ((hi.saturating_sub(lo as u64)) / 4) as usize];
        for r in &image.text {
            let off = ((r.addr - lo) / 4) as usize;
            words[off..off + r.words.len()].copy_from_slice(&r.words);
        }
        let code = words
            .iter()
            .map(|&w| {
                let ins = decode(w);
                Decoded {
                    ins,
                    latency: table.latency(&ins).max(1),
                }
            })
            .collect();
        Program {
            base: lo,
            code,
            memory_mode: table.memory_mode,
            uniform_latency: table.uniform_latency.max(1),
            entry: image.entry,
        }
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    fn fetch(&self, pc: u32) -> Option<&Decoded> {
        let off = pc.checked_sub(self.base)?;
        if off % 4 != 0 {
            return None;
        }
        self.code.get((off / 4) as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HartState {
    pub regs: [u32; 32],
    pub pc: u32,
    pub hart_id: u32,
    pub cycle: u64,
    pub scoreboard: [u64; 32],
    pub status: HartStatus,
    pub stats: HartStats,
    pub trap: Option<Trap>,
    /// Registers whose pending value comes from a load.
    from_memory: u32,
}

fn fmt_of(ins: &Instruction) -> FpName {
    ins.fmt.unwrap_or(FpName::Fp32)
}

impl HartState {
    pub fn new(hart_id: u32, entry: u32) -> Self {
        HartState {
            regs: [0; 32],
            pc: entry,
            hart_id,
            cycle: 0,
            scoreboard: [0; 32],
            status: HartStatus::Running,
            stats: HartStats::default(),
            trap: None,
            from_memory: 0,
        }
    }

    /// Architectural state only: registers and pc.
    pub fn arch(&self) -> ([u32; 32], u32) {
        (self.regs, self.pc)
    }

    /// The value `csrr cycle` returns when issued now.
    pub fn read_cycle_csr(&self) -> u64 {
        self.cycle
    }

    fn set(&mut self, r: u8, v: u32) {
        if r != 0 {
            self.regs[r as usize] = v;
        }
    }

    /// Issue cycle of `ins` and whether the limiting operand was a load.
    fn issue_cycle(&self, ins: &Instruction) -> (u64, bool) {
        let (srcs, n) = ins.sources();
        let mut issue = self.cycle;
        let mut mem = false;
        for &r in &srcs[..n] {
            if r == 0 {
                continue;
            }
            let t = self.scoreboard[r as usize];
            if t > issue {
                issue = t;
                mem = self.from_memory & (1 << r) != 0;
            }
        }
        (issue, mem)
    }

    fn mark(&mut self, r: u8, ready: u64, mem: bool) {
        if r == 0 {
            return;
        }
        self.scoreboard[r as usize] = ready;
        if mem {
            self.from_memory |= 1 << r;
        } else {
            self.from_memory &= !(1 << r);
        }
    }

    fn trap(&mut self, cause: TrapCause) -> StepOutcome {
        let t = Trap { pc: self.pc, cause };
        self.status = HartStatus::Trapped;
        self.trap = Some(t);
        StepOutcome::Trapped(t)
    }

    /// Execute one instruction. Must only be called while `Running`.
    pub fn step<M: DataMemory + ?Sized>(&mut self, prog: &Program, mem: &M) -> StepReport {
        debug_assert_eq!(self.status, HartStatus::Running);
        let pc = self.pc;
        let Some(&Decoded { ins, latency }) = prog.fetch(pc) else {
            let outcome = self.trap(TrapCause::FetchFault);
            return StepReport {
                pc,
                instruction: Instruction::new(Mnemonic::Illegal),
                issue_cycle: self.cycle,
                stall_cycles: 0,
                outcome,
            };
        };
        let (issue, stalled_on_mem) = self.issue_cycle(&ins);
        let mut report = StepReport {
            pc,
            instruction: ins,
            issue_cycle: issue,
            stall_cycles: issue - self.cycle,
            outcome: StepOutcome::Retired,
        };
        let mem_latency = |addr: u32, hart: u32| match prog.memory_mode {
            MemoryLatencyMode::ConservativeUniform => prog.uniform_latency,
            MemoryLatencyMode::RegionBased => mem.region_latency(addr, hart).max(1),
        };

        let regs = self.regs;
        let x = |r: u8| regs[r as usize];
        let (a, b) = (x(ins.rs1), x(ins.rs2));
        let imm = ins.imm as u32;
        let mut next = pc.wrapping_add(4);
        // (destination, value, latency, value came from memory)
        let mut write: Option<(u8, u32, u32, bool)> = None;
        let mut post_inc: Option<(u8, u32)> = None;
        use Mnemonic::*;
        match ins.mnemonic {
            Lui => write = Some((ins.rd, imm << 12, latency, false)),
            Auipc => write = Some((ins.rd, pc.wrapping_add(imm << 12), latency, false)),
            Jal => {
                write = Some((ins.rd, next, latency, false));
                next = pc.wrapping_add(imm);
            }
            Jalr => {
                write = Some((ins.rd, next, latency, false));
                next = a.wrapping_add(imm) & !1;
            }
            Beq | Bne | Blt | Bge | Bltu | Bgeu => {
                let taken = match ins.mnemonic {
                    Beq => a == b,
                    Bne => a != b,
                    Blt => (a as i32) < (b as i32),
                    Bge => (a as i32) >= (b as i32),
                    Bltu => a < b,
                    _ => a >= b,
                };
                if taken {
                    next = pc.wrapping_add(imm);
                }
            }
            Lb | Lh | Lw | Lbu | Lhu | PLw => {
                let addr = if ins.post_increment { a } else { a.wrapping_add(imm) };
                let width = match ins.mnemonic {
                    Lb | Lbu => 1,
                    Lh | Lhu => 2,
                    _ => 4,
                };
                let v = match mem.read(addr, width) {
                    Ok(v) => v,
                    Err(f) => {
                        report.outcome = self.trap(TrapCause::Memory(f));
                        return report;
                    }
                };
                let v = match ins.mnemonic {
                    Lb => v as u8 as i8 as i32 as u32,
                    Lh => v as u16 as i16 as i32 as u32,
                    _ => v,
                };
                write = Some((ins.rd, v, mem_latency(addr, self.hart_id), true));
                if ins.post_increment {
                    post_inc = Some((ins.rs1, a.wrapping_add(imm)));
                }
            }
            Sb | Sh | Sw | PSw => {
                let addr = if ins.post_increment { a } else { a.wrapping_add(imm) };
                let width = match ins.mnemonic {
                    Sb => 1,
                    Sh => 2,
                    _ => 4,
                };
                if let Err(f) = mem.write(addr, width, b) {
                    report.outcome = self.trap(TrapCause::Memory(f));
                    return report;
                }
                if ins.post_increment {
                    post_inc = Some((ins.rs1, a.wrapping_add(imm)));
                }
            }
            Addi | Slti | Sltiu | Xori | Ori | Andi | Slli | Srli | Srai => {
                let v = match ins.mnemonic {
                    Addi => a.wrapping_add(imm),
                    Slti => ((a as i32) < ins.imm) as u32,
                    Sltiu => (a < imm) as u32,
                    Xori => a ^ imm,
                    Ori => a | imm,
                    Andi => a & imm,
                    Slli => a << (imm & 31),
                    Srli => a >> (imm & 31),
                    _ => ((a as i32) >> (imm & 31)) as u32,
                };
                write = Some((ins.rd, v, latency, false));
            }
            Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And | Mul | Mulh | Mulhsu
            | Mulhu | Div | Divu | Rem | Remu => {
                let (sa, sb) = (a as i32, b as i32);
                let v = match ins.mnemonic {
                    Add => a.wrapping_add(b),
                    Sub => a.wrapping_sub(b),
                    Sll => a << (b & 31),
                    Slt => (sa < sb) as u32,
                    Sltu => (a < b) as u32,
                    Xor => a ^ b,
                    Srl => a >> (b & 31),
                    Sra => (sa >> (b & 31)) as u32,
                    Or => a | b,
                    And => a & b,
                    Mul => a.wrapping_mul(b),
                    Mulh => ((sa as i64 * sb as i64) >> 32) as u32,
                    Mulhsu => ((sa as i64 * b as i64) >> 32) as u32,
                    Mulhu => ((a as u64 * b as u64) >> 32) as u32,
                    Div if b == 0 => u32::MAX,
                    Div => sa.wrapping_div(sb) as u32,
                    Divu if b == 0 => u32::MAX,
                    Divu => a / b,
                    Rem if b == 0 => a,
                    Rem => sa.wrapping_rem(sb) as u32,
                    Remu if b == 0 => a,
                    _ => a % b,
                };
                write = Some((ins.rd, v, latency, false));
            }
            Fadd | Fsub | Fmul | Fdiv | Fsqrt | Fmadd | Fmsub => {
                let f = fp_format(fmt_of(&ins));
                let m = f.mask();
                let (a, b, c) = (a & m, b & m, x(ins.rs3) & m);
                let v = match ins.mnemonic {
                    Fadd => fp_add(a, b, f),
                    Fsub => fp_sub(a, b, f),
                    Fmul => fp_mul(a, b, f),
                    Fdiv => fp_div(a, b, f),
                    Fsqrt => fp_sqrt(a, f),
                    Fmadd => fp_fma(a, b, c, f),
                    _ => fp_fms(a, b, c, f),
                };
                write = Some((ins.rd, sign_extend(v, f), latency, false));
            }
            Fcvt => {
                let to = fp_format(fmt_of(&ins));
                let from = fp_format(ins.src_fmt.unwrap_or(FpName::Fp32));
                let v = fp_cast(a & from.mask(), from, to);
                write = Some((ins.rd, sign_extend(v, to), latency, false));
            }
            Wdotp => {
                let w = match fmt_of(&ins) {
                    FpName::Fp8 => Widening::F8ToF16,
                    _ => Widening::F16ToF32,
                };
                let v = widening_dotprod(PackedWord(a), PackedWord(b), PackedWord(x(ins.rd)), w);
                write = Some((ins.rd, v.0, latency, false));
            }
            Cdotp => {
                let v = complex_dotprod16(PackedWord(a), PackedWord(b), PackedWord(x(ins.rd)));
                write = Some((ins.rd, v.0, latency, false));
            }
            Shuffle => {
                let lf = match fmt_of(&ins) {
                    FpName::Fp8 => LaneFormat::F8,
                    _ => LaneFormat::F16,
                };
                match shuffle(PackedWord(a), PackedWord(b), x(ins.rs3), lf) {
                    Ok(v) => write = Some((ins.rd, v.0, latency, false)),
                    Err(e) => {
                        report.outcome = self.trap(TrapCause::Shuffle(e));
                        return report;
                    }
                }
            }
            Csrr => {
                let v = match imm {
                    CSR_CYCLE => issue as u32,
                    CSR_CYCLEH => (issue >> 32) as u32,
                    CSR_MHARTID => self.hart_id,
                    _ => {
                        report.outcome = self.trap(TrapCause::Illegal(imm));
                        return report;
                    }
                };
                write = Some((ins.rd, v, latency, false));
            }
            Barrier => report.outcome = StepOutcome::Barrier,
            Halt => report.outcome = StepOutcome::Halted,
            Illegal => {
                report.outcome = self.trap(TrapCause::Illegal(imm));
                return report;
            }
        }

        if report.stall_cycles > 0 {
            if stalled_on_mem {
                self.stats.mem_stalls += report.stall_cycles;
            } else {
                self.stats.raw_stalls += report.stall_cycles;
            }
        }
        if let Some((r, v)) = post_inc {
            self.set(r, v);
            self.mark(r, issue + 1, false);
        }
        if let Some((r, v, lat, from_mem)) = write {
            self.set(r, v);
            self.mark(r, issue + lat as u64, from_mem);
        }
        self.stats.instructions += 1;
        self.pc = next;
        self.cycle = match ins.mnemonic {
            Barrier | Halt => issue + latency as u64,
            _ => issue + 1,
        };
        match report.outcome {
            StepOutcome::Barrier => self.status = HartStatus::AtBarrier,
            StepOutcome::Halted => self.status = HartStatus::Halted,
            _ => {}
        }
        report
    }

    /// Step until the hart leaves `Running` or `max_steps` instructions
    /// have been attempted.
    pub fn run_until_event<M: DataMemory + ?Sized>(
        &mut self,
        prog: &Program,
        mem: &M,
        max_steps: u64,
    ) -> Event {
        for _ in 0..max_steps {
            match self.step(prog, mem).outcome {
                StepOutcome::Retired => {}
                StepOutcome::Barrier => return Event::AtBarrier,
                StepOutcome::Halted => return Event::Halted,
                StepOutcome::Trapped(t) => return Event::Trapped(t),
            }
        }
        Event::StepBudgetExhausted
    }
}
