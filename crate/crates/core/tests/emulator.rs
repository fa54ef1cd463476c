use proptest::prelude::*;
use sdremu_core::cluster::{ClusterConfig, ClusterMemory};
use sdremu_core::emu::{
    Event, HartState, HartStatus, LatencyTable, MemFault, Program, StepOutcome, TrapCause,
};
use sdremu_core::isa::assemble;
use sdremu_core::map::{L1_BASE, L2_BASE};

fn small() -> ClusterConfig {
    ClusterConfig {
        cores_per_tile: 4,
        tiles_per_subgroup: 2,
        subgroups_per_group: 1,
        groups: 2,
        l1_bytes_per_tile: 4096,
        l2_bytes: 1 << 16,
        ..ClusterConfig::default()
    }
}

struct Machine {
    prog: Program,
    mem: ClusterMemory,
    hart: HartState,
}

fn boot(src: &str, table: &LatencyTable) -> Machine {
    let img = assemble(src).unwrap();
    let prog = Program::new(&img, table);
    let mem = ClusterMemory::new(small());
    for run in &img.data {
        mem.write_bytes(run.addr, &run.bytes).unwrap();
    }
    let hart = HartState::new(0, img.entry);
    Machine { prog, mem, hart }
}

impl Machine {
    fn run(&mut self, budget: u64) -> Event {
        self.hart.run_until_event(&self.prog, &self.mem, budget)
    }
}

#[test]
fn addi_from_reset() {
    let mut m = boot("addi x1, x0, 5\nhalt", &LatencyTable::default());
    let pc = m.hart.pc;
    let r = m.hart.step(&m.prog, &m.mem);
    assert_eq!(r.outcome, StepOutcome::Retired);
    assert_eq!(m.hart.regs[1], 5);
    assert_eq!(m.hart.pc, pc + 4);
    assert_eq!(m.hart.cycle, 1);
}

#[test]
fn dependent_load_stalls_eight_cycles() {
    let src = format!("li x1, {L1_BASE}\nlw x2, 0(x1)\nadd x3, x2, x2\nhalt");
    let mut m = boot(&src, &LatencyTable::default());
    // li of an L1 address takes lui+addi
    m.hart.step(&m.prog, &m.mem);
    m.hart.step(&m.prog, &m.mem);
    let load = m.hart.step(&m.prog, &m.mem);
    let add = m.hart.step(&m.prog, &m.mem);
    assert_eq!(add.issue_cycle - load.issue_cycle, 9);
    assert_eq!(add.stall_cycles, 8);
    assert_eq!(m.hart.stats.mem_stalls, 8);
    assert_eq!(m.hart.stats.raw_stalls, 0);
}

#[test]
fn taken_branch_writes_nothing() {
    let mut m = boot("beq x0, x0, skip\naddi x1, x0, 1\nskip:\nhalt", &LatencyTable::default());
    let before = m.hart.regs;
    let target = m.hart.pc + 8;
    m.hart.step(&m.prog, &m.mem);
    assert_eq!(m.hart.pc, target);
    assert_eq!(m.hart.regs, before);
}

#[test]
fn fma_chain_waits_for_the_fma_latency() {
    // fmadd.h issues at 0 and is ready at 5; the dependent fadd issues at 5
    let mut t = LatencyTable::default();
    t.set("fmadd.h", 5);
    let mut m = boot("fmadd.h x1, x2, x3, x4\nfadd.h x5, x1, x1\nhalt", &t);
    let a = m.hart.step(&m.prog, &m.mem);
    let b = m.hart.step(&m.prog, &m.mem);
    assert_eq!(a.issue_cycle, 0);
    assert_eq!(b.issue_cycle, 5);
    assert_eq!(m.hart.stats.raw_stalls, 4);
}

#[test]
fn post_increment_address_is_ready_next_cycle() {
    let src = format!(
        "li x1, {L1_BASE}\np.lw x2, 4(x1!)\naddi x4, x1, 0\nadd x3, x2, x0\nhalt"
    );
    let mut m = boot(&src, &LatencyTable::default());
    m.hart.step(&m.prog, &m.mem);
    m.hart.step(&m.prog, &m.mem);
    let load = m.hart.step(&m.prog, &m.mem);
    let use_addr = m.hart.step(&m.prog, &m.mem);
    let use_data = m.hart.step(&m.prog, &m.mem);
    assert_eq!(use_addr.issue_cycle, load.issue_cycle + 1);
    assert_eq!(use_addr.stall_cycles, 0);
    assert_eq!(use_data.issue_cycle, load.issue_cycle + 9);
    assert_eq!(m.hart.regs[4], L1_BASE + 4);
}

#[test]
fn nops_then_halt() {
    for n in [0usize, 1, 7, 100] {
        let src = "nop\n".repeat(n) + "halt";
        let mut m = boot(&src, &LatencyTable::default());
        assert_eq!(m.run(1 << 20), Event::Halted);
        assert_eq!(m.hart.cycle, n as u64 + 1);
        assert_eq!(m.hart.status, HartStatus::Halted);
    }
}

#[test]
fn infinite_loop_exhausts_the_budget() {
    let mut m = boot("spin: j spin", &LatencyTable::default());
    assert_eq!(m.run(1234), Event::StepBudgetExhausted);
    assert_eq!(m.hart.stats.instructions, 1234);
}

#[test]
fn barrier_instruction_stops_the_hart() {
    let mut m = boot("nop\nbarrier\nhalt", &LatencyTable::default());
    assert_eq!(m.run(100), Event::AtBarrier);
    assert_eq!(m.hart.status, HartStatus::AtBarrier);
}

#[test]
fn cycle_csr() {
    let mut m = boot("csrr x1, cycle\nhalt", &LatencyTable::default());
    m.run(10);
    assert_eq!(m.hart.regs[1], 0);
    let mut m = boot("nop\ncsrr x1, cycle\ncsrr x2, mhartid\nhalt", &LatencyTable::default());
    m.run(10);
    assert_eq!(m.hart.regs[1], 1);
    assert_eq!(m.hart.regs[2], 0);
}

#[test]
fn cycle_csr_difference_matches_the_run() {
    let src = format!(
        "csrr s0, cycle\nli x1, {L1_BASE}\nlw x2, 0(x1)\nadd x3, x2, x2\nmul x4, x3, x3\ndiv x5, x4, x3\ncsrr s1, cycle\nhalt"
    );
    let mut m = boot(&src, &LatencyTable::default());
    m.run(100);
    let csr = (m.hart.regs[9] - m.hart.regs[8]) as u64;
    // everything between the two reads, ending at the issue of the second
    assert_eq!(csr, m.hart.cycle - 1 - 1);
}

#[test]
fn traps() {
    let mut m = boot(".word 0xffffffff", &LatencyTable::default());
    assert!(matches!(
        m.run(10),
        Event::Trapped(t) if t.cause == TrapCause::Illegal(0xffff_ffff)
    ));
    assert_eq!(m.hart.status, HartStatus::Trapped);

    let src = format!("li x1, {}\nlw x2, 0(x1)", L1_BASE + 2);
    let mut m = boot(&src, &LatencyTable::default());
    assert!(matches!(
        m.run(10),
        Event::Trapped(t) if matches!(t.cause, TrapCause::Memory(MemFault::Misaligned { .. }))
    ));

    let mut m = boot("lw x2, 0(x0)", &LatencyTable::default());
    assert!(matches!(
        m.run(10),
        Event::Trapped(t) if t.cause == TrapCause::Memory(MemFault::OutOfMap { addr: 0 })
    ));

    let mut m = boot("nop", &LatencyTable::default());
    assert!(matches!(m.run(10), Event::Trapped(t) if t.cause == TrapCause::FetchFault));
}

#[test]
fn integer_corner_cases() {
    let src = "li x1, -2147483648\nli x2, -1\ndiv x3, x1, x2\nrem x4, x1, x2\ndiv x5, x1, x0\nremu x6, x2, x0\nmulh x7, x1, x1\nsrai x8, x1, 31\nhalt";
    let mut m = boot(src, &LatencyTable::default());
    m.run(100);
    let r = m.hart.regs;
    assert_eq!(r[3], 0x8000_0000);
    assert_eq!(r[4], 0);
    assert_eq!(r[5], u32::MAX);
    assert_eq!(r[6], u32::MAX);
    assert_eq!(r[7], 0x4000_0000);
    assert_eq!(r[8], u32::MAX);
}

#[test]
fn memory_widths_and_sign_extension() {
    let src = ".data\nv: .word 0x8081f2f3\n.text\nla x1, v\nlb x2, 0(x1)\nlbu x3, 0(x1)\nlh x4, 2(x1)\nlhu x5, 2(x1)\nsh x5, 0(x1)\nlw x6, 0(x1)\nhalt";
    let mut m = boot(src, &LatencyTable::default());
    assert_eq!(m.run(100), Event::Halted);
    let r = m.hart.regs;
    assert_eq!(r[2], 0xFFFF_FFF3);
    assert_eq!(r[3], 0xF3);
    assert_eq!(r[4], 0xFFFF_8081);
    assert_eq!(r[5], 0x8081);
    assert_eq!(r[6], 0x8081_8081);
    assert_eq!(r[1], L2_BASE);
}

#[test]
fn fp_results_are_sign_extended() {
    // -1.0 in fp16 is 0xbc00
    let src = "li x1, 0xbc00\nfadd.h x2, x1, x0\nfcvt.s.h x3, x1\nhalt";
    let mut m = boot(src, &LatencyTable::default());
    m.run(100);
    assert_eq!(m.hart.regs[2], 0xFFFF_BC00);
    assert_eq!(m.hart.regs[3], (-1.0f32).to_bits());
}

#[test]
fn latency_file_round_trip() {
    let t = LatencyTable::parse("memory.mode region\nfmadd.h 4 # tuned\n").unwrap();
    assert_eq!(t.uniform_latency, 9);
    let word = assemble("fmadd.h x1, x2, x3, x4").unwrap().text[0].words[0];
    let ins = sdremu_core::isa::decode(word);
    assert_eq!(t.latency(&ins), 4);
}

// Register-only programs used by the property tests; x0 never appears as a
// destination so renaming keeps semantics.
fn straight_line(ops: &[(u8, u8, u8, u8)], rename: bool) -> String {
    let names = ["add", "mul", "div", "fadd.h", "xor", "fmadd.s"];
    let mut s = String::new();
    for (i, &(op, rd, a, b)) in ops.iter().enumerate() {
        let name = names[op as usize % names.len()];
        let rd = if rename { 1 + (i % 31) as u8 } else { 1 + rd % 31 };
        let (a, b) = if rename { (0, 0) } else { (a % 32, b % 32) };
        if name == "fmadd.s" {
            s += &format!("{name} x{rd}, x{a}, x{b}, x{a}\n");
        } else {
            s += &format!("{name} x{rd}, x{a}, x{b}\n");
        }
    }
    s + "halt"
}

fn seeded(src: &str, table: &LatencyTable, seed: u32) -> Machine {
    let mut m = boot(src, table);
    for i in 1..32 {
        m.hart.regs[i] = seed.wrapping_mul(0x9E37_79B9).rotate_left(i as u32) ^ i as u32;
    }
    m
}

proptest! {
    #[test]
    fn unit_latencies_count_instructions(ops in prop::collection::vec(any::<(u8, u8, u8, u8)>(), 0..60), seed: u32) {
        let src = straight_line(&ops, false);
        let mut m = seeded(&src, &LatencyTable::unit(), seed);
        prop_assert_eq!(m.run(1000), Event::Halted);
        prop_assert_eq!(m.hart.cycle, m.hart.stats.instructions);
        prop_assert_eq!(m.hart.regs[0], 0);
    }

    #[test]
    fn timing_never_changes_results(ops in prop::collection::vec(any::<(u8, u8, u8, u8)>(), 0..60), seed: u32) {
        let src = straight_line(&ops, false);
        let mut slow = LatencyTable::default();
        for (k, _) in LatencyTable::default().entries() {
            slow.set(k, 7);
        }
        let mut a = seeded(&src, &LatencyTable::unit(), seed);
        let mut b = seeded(&src, &slow, seed);
        a.run(1000);
        b.run(1000);
        prop_assert_eq!(a.hart.arch(), b.hart.arch());
        prop_assert!(b.hart.cycle >= b.hart.stats.instructions);
    }

    #[test]
    fn removing_dependencies_never_adds_cycles(ops in prop::collection::vec(any::<(u8, u8, u8, u8)>(), 1..60)) {
        let dep = straight_line(&ops, false);
        let free = straight_line(&ops, true);
        let mut a = seeded(&dep, &LatencyTable::default(), 1);
        let mut b = seeded(&free, &LatencyTable::default(), 1);
        a.run(1000);
        b.run(1000);
        prop_assert!(b.hart.cycle <= a.hart.cycle);
    }

    #[test]
    fn runs_are_deterministic(ops in prop::collection::vec(any::<(u8, u8, u8, u8)>(), 0..40), seed: u32) {
        let src = straight_line(&ops, false);
        let mut a = seeded(&src, &LatencyTable::default(), seed);
        let mut b = seeded(&src, &LatencyTable::default(), seed);
        a.run(1000);
        b.run(1000);
        prop_assert_eq!(a.hart, b.hart);
    }
}
