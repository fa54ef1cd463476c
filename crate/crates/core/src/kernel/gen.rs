//! Guest program generator.
//!
//! One program serves every hart. A hart reads `mhartid`, finds its slot
//! (see `layout.rs`) and solves its `batch` problems one after the other:
//!
//! 1. copy Ĥ into the row-contiguous Gram operands Hc = conj(Ĥ)ᵀ and Hb = Ĥᵀ
//!    (the wdotp variants use Hc for both and a conjugated copy of y);
//! 2. Gram and matched filter: G = ĤᴴĤ + σ²I (lower triangle), z = Ĥᴴy.
//!    Two entries of a row are computed together so that their accumulator
//!    chains interleave; the diagonal entry is paired with z;
//! 3. Cholesky G = L·Lᴴ, row by row;
//! 4. forward solve L·u = z;
//! 5. backward solve Lᴴ·x̂ = u, writing x̂ into the record.
//!
//! Every inner product is `acc = init; acc += a[k]·b[k]` over two
//! contiguous arrays. The loop is unrolled by 4 with a remainder loop.
//! Complex multiply-accumulate sequences:
//!
//! ```text
//! fp16 / fp8 scalar   re = fms(ar, br, fms(ai, bi, re))     2 loads, 2 srli,
//!                     im = fma(ar, bi, fma(ai, br, im))     4 fused ops
//! wdotp.h             b stored conjugated [br, -bi]
//!                     re = wdotp(a, b); t = shuffle(b, b, 0x09) = [bi, br]
//!                     im = wdotp(a, t)
//! cdotp.h             acc = cdotp(a, b)
//! wdotp.b             two elements per word, both conjugated; fp16 lanes
//!                     re = wdotp(a, b); t = shuffle(b, b, 0x2b09)
//!                     im = wdotp(a, t); the two lanes are added at the end
//! ```
//! To keep the solves free of negations, the Cholesky loop stores three
//! copies of every L entry: La = L, Mb = -conj(L) and its transpose Pt.
//! Division and square root run in fp32 on widened operands and are
//! rounded back to fp16.

use alloc::format;
use alloc::string::String;

use super::functional::{SWAP16, SWAP8};
use super::layout::{CapacityError, LayoutDescriptor};
use super::Variant;
use crate::cluster::ClusterConfig;
use crate::isa::{assemble, AsmError, ProgramImage};
use crate::map::L1_BASE;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error("variant {0} has no guest program")]
    HostOnly(Variant),
    #[error("invalid shape n_tx={n_tx}, n_rx={n_rx}, batch={batch}")]
    Shape { n_tx: u32, n_rx: u32, batch: u32 },
    #[error("generated assembly rejected: {0}")]
    Assembly(AsmError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelImage {
    pub image: ProgramImage,
    pub layout: LayoutDescriptor,
    pub asm: String,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mac {
    Scalar16,
    Scalar8,
    Wide16,
    Complex16,
    Wide8,
}

impl Mac {
    fn gram(v: Variant) -> Self {
        match v {
            Variant::Half16 => Mac::Scalar16,
            Variant::Quarter8 => Mac::Scalar8,
            Variant::WDotp16 => Mac::Wide16,
            Variant::CDotp16 => Mac::Complex16,
            Variant::WDotp8 => Mac::Wide8,
            Variant::Double64 => unreachable!(),
        }
    }

    fn solver(v: Variant) -> Self {
        match v {
            Variant::WDotp16 => Mac::Wide16,
            Variant::CDotp16 => Mac::Complex16,
            _ => Mac::Scalar16,
        }
    }
}

/// Operand registers of the four unrolled products.
const LOADS: [[&str; 2]; 4] = [["t0", "t1"], ["t2", "t3"], ["t4", "t5"], ["t6", "ra"]];
const TEMPS: [&str; 2] = ["s10", "s11"];
/// The same for the paired products, two slots at a time.
const PAIR_LOADS: [[&str; 3]; 2] = [["t0", "t1", "t2"], ["t3", "t4", "t5"]];
const PAIR_TEMPS: [&str; 3] = ["t6", "ra", "tp"];

struct Emitter {
    out: String,
    labels: u32,
}

impl Emitter {
    fn op(&mut self, s: &str) {
        self.out.push_str("    ");
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn label(&mut self, stem: &str) -> String {
        self.labels += 1;
        format!("{stem}_{}", self.labels)
    }

    fn place(&mut self, l: &str) {
        self.out.push_str(l);
        self.out.push_str(":\n");
    }

    /// rd = base + off + Σ reg·stride
    fn addr(&mut self, rd: &str, base: &str, off: u32, idx: &[(&str, u32)]) {
        if off < 2048 {
            self.op(&format!("addi {rd}, {base}, {off}"));
        } else {
            self.op(&format!("li {rd}, {off}"));
            self.op(&format!("add {rd}, {rd}, {base}"));
        }
        for &(r, stride) in idx {
            if stride.is_power_of_two() {
                self.op(&format!("slli tp, {r}, {}", stride.trailing_zeros()));
            } else {
                self.op(&format!("li tp, {stride}"));
                self.op(&format!("mul tp, tp, {r}"));
            }
            self.op(&format!("add {rd}, {rd}, tp"));
        }
    }

    fn load(&mut self, m: Mac, [a, b]: [&str; 2], slot: u32) {
        match m {
            Mac::Scalar8 => self.op(&format!("lh {a}, {}(a0)", 2 * slot)),
            _ => self.op(&format!("p.lw {a}, 4(a0!)")),
        }
        match m {
            Mac::Scalar8 => self.op(&format!("lh {b}, {}(a1)", 2 * slot)),
            _ => self.op(&format!("p.lw {b}, 4(a1!)")),
        }
    }

    /// Bump the pointers that `load` addressed by offset.
    fn advance(&mut self, m: Mac, elems: u32) {
        if m == Mac::Scalar8 {
            self.op(&format!("addi a0, a0, {}", 2 * elems));
            self.op(&format!("addi a1, a1, {}", 2 * elems));
        }
    }

    fn compute(&mut self, m: Mac, [a, b]: [&str; 2]) {
        let [t0, t1] = TEMPS;
        match m {
            Mac::Scalar16 | Mac::Scalar8 => {
                let (sfx, w) = if m == Mac::Scalar16 { ("h", 16) } else { ("b", 8) };
                self.op(&format!("srli {t0}, {a}, {w}"));
                self.op(&format!("srli {t1}, {b}, {w}"));
                self.op(&format!("fmsub.{sfx} a4, {t0}, {t1}, a4"));
                self.op(&format!("fmadd.{sfx} a5, {t0}, {b}, a5"));
                self.op(&format!("fmsub.{sfx} a4, {a}, {b}, a4"));
                self.op(&format!("fmadd.{sfx} a5, {a}, {t1}, a5"));
            }
            Mac::Wide16 | Mac::Wide8 => {
                let sfx = if m == Mac::Wide16 { "h" } else { "b" };
                self.op(&format!("shuffle.{sfx} {t0}, {b}, {b}, s8"));
                self.op(&format!("wdotp.{sfx} a4, {a}, {b}"));
                self.op(&format!("wdotp.{sfx} a5, {a}, {t0}"));
            }
            Mac::Complex16 => self.op(&format!("cdotp.h a4, {a}, {b}")),
        }
    }

    /// Accumulate a2 products of the arrays at a0 and a1 into a4/a5. The
    /// unrolled body issues all eight loads before the arithmetic.
    fn dot(&mut self, m: Mac) {
        let unrolled = self.label("u");
        let rem = self.label("r");
        let rem_loop = self.label("rl");
        let done = self.label("d");
        self.op("srli a3, a2, 2");
        self.op("andi a2, a2, 3");
        self.op(&format!("beqz a3, {rem}"));
        self.place(&unrolled);
        for s in 0..4 {
            self.load(m, LOADS[s as usize], s);
        }
        for regs in LOADS {
            self.compute(m, regs);
        }
        self.advance(m, 4);
        self.op("addi a3, a3, -1");
        self.op(&format!("bnez a3, {unrolled}"));
        self.place(&rem);
        self.op(&format!("beqz a2, {done}"));
        self.place(&rem_loop);
        self.load(m, LOADS[0], 0);
        self.advance(m, 1);
        self.op("addi a2, a2, -1");
        self.compute(m, LOADS[0]);
        self.op(&format!("bnez a2, {rem_loop}"));
        self.place(&done);
    }

    /// Two products sharing the left operand: a0·a1 into a4/a5 and a0·a7
    /// into s10/s11.
    fn dot2(&mut self, m: Mac) {
        let unrolled = self.label("u");
        let rem = self.label("r");
        let rem_loop = self.label("rl");
        let done = self.label("d");
        self.op("srli a3, a2, 2");
        self.op("andi a2, a2, 3");
        self.op(&format!("beqz a3, {rem}"));
        self.place(&unrolled);
        for half in 0..2 {
            for s in 0..2 {
                self.load2(m, PAIR_LOADS[s], 2 * half + s as u32);
            }
            for regs in PAIR_LOADS {
                self.compute2(m, regs);
            }
        }
        self.advance2(m, 4);
        self.op("addi a3, a3, -1");
        self.op(&format!("bnez a3, {unrolled}"));
        self.place(&rem);
        self.op(&format!("beqz a2, {done}"));
        self.place(&rem_loop);
        self.load2(m, PAIR_LOADS[0], 0);
        self.advance2(m, 1);
        self.op("addi a2, a2, -1");
        self.compute2(m, PAIR_LOADS[0]);
        self.op(&format!("bnez a2, {rem_loop}"));
        self.place(&done);
    }

    fn load2(&mut self, m: Mac, [a, b, c]: [&str; 3], slot: u32) {
        if m == Mac::Scalar8 {
            self.op(&format!("lh {a}, {}(a0)", 2 * slot));
            self.op(&format!("lh {b}, {}(a1)", 2 * slot));
            self.op(&format!("lh {c}, {}(a7)", 2 * slot));
        } else {
            self.op(&format!("p.lw {a}, 4(a0!)"));
            self.op(&format!("p.lw {b}, 4(a1!)"));
            self.op(&format!("p.lw {c}, 4(a7!)"));
        }
    }

    fn advance2(&mut self, m: Mac, elems: u32) {
        if m == Mac::Scalar8 {
            for r in ["a0", "a1", "a7"] {
                self.op(&format!("addi {r}, {r}, {}", 2 * elems));
            }
        }
    }

    fn compute2(&mut self, m: Mac, [a, b, c]: [&str; 3]) {
        let [ta, tb, tc] = PAIR_TEMPS;
        match m {
            Mac::Scalar16 | Mac::Scalar8 => {
                let (sfx, w) = if m == Mac::Scalar16 { ("h", 16) } else { ("b", 8) };
                self.op(&format!("srli {ta}, {a}, {w}"));
                self.op(&format!("srli {tb}, {b}, {w}"));
                self.op(&format!("srli {tc}, {c}, {w}"));
                self.op(&format!("fmsub.{sfx} a4, {ta}, {tb}, a4"));
                self.op(&format!("fmsub.{sfx} s10, {ta}, {tc}, s10"));
                self.op(&format!("fmadd.{sfx} a5, {ta}, {b}, a5"));
                self.op(&format!("fmadd.{sfx} s11, {ta}, {c}, s11"));
                self.op(&format!("fmsub.{sfx} a4, {a}, {b}, a4"));
                self.op(&format!("fmsub.{sfx} s10, {a}, {c}, s10"));
                self.op(&format!("fmadd.{sfx} a5, {a}, {tb}, a5"));
                self.op(&format!("fmadd.{sfx} s11, {a}, {tc}, s11"));
            }
            Mac::Wide16 | Mac::Wide8 => {
                let sfx = if m == Mac::Wide16 { "h" } else { "b" };
                self.op(&format!("shuffle.{sfx} {tb}, {b}, {b}, s8"));
                self.op(&format!("shuffle.{sfx} {tc}, {c}, {c}, s8"));
                self.op(&format!("wdotp.{sfx} a4, {a}, {b}"));
                self.op(&format!("wdotp.{sfx} s10, {a}, {c}"));
                self.op(&format!("wdotp.{sfx} a5, {a}, {tb}"));
                self.op(&format!("wdotp.{sfx} s11, {a}, {tc}"));
            }
            Mac::Complex16 => {
                self.op(&format!("cdotp.h a4, {a}, {b}"));
                self.op(&format!("cdotp.h s10, {a}, {c}"));
            }
        }
    }

    /// Solver accumulator from the packed fp16 word in a4.
    fn solver_init(&mut self, m: Mac) {
        match m {
            Mac::Scalar16 => self.op("srli a5, a4, 16"),
            Mac::Wide16 => {
                self.op("srli a5, a4, 16");
                self.op("fcvt.s.h a4, a4");
                self.op("fcvt.s.h a5, a5");
            }
            _ => {}
        }
    }

    /// Solver accumulator widened to fp32 in a4 (re) and a5 (im).
    fn solver_finish(&mut self, m: Mac) {
        match m {
            Mac::Scalar16 => {
                self.op("fcvt.s.h a4, a4");
                self.op("fcvt.s.h a5, a5");
            }
            Mac::Complex16 => {
                self.op("srli a5, a4, 16");
                self.op("fcvt.s.h a4, a4");
                self.op("fcvt.s.h a5, a5");
            }
            _ => {}
        }
    }

    /// a4, a5 ← fp16(a4 / a6), fp16(a5 / a6)
    fn divide(&mut self) {
        self.op("fdiv.s a4, a4, a6");
        self.op("fcvt.h.s a4, a4");
        self.op("fdiv.s a5, a5, a6");
        self.op("fcvt.h.s a5, a5");
    }

    fn store_pair(&mut self, at: &str) {
        self.store_pair_from(at, "a4", "a5");
    }

    fn store_pair_from(&mut self, at: &str, re: &str, im: &str) {
        self.op(&format!("sh {re}, 0({at})"));
        self.op(&format!("sh {im}, 2({at})"));
    }
}

/// Emit the program for `v` and lay out `n_harts × batch` problems.
pub fn generate_kernel(
    v: Variant,
    n_tx: u32,
    n_rx: u32,
    batch: u32,
    n_harts: u32,
    cfg: &ClusterConfig,
) -> Result<KernelImage, KernelError> {
    if v == Variant::Double64 {
        return Err(KernelError::HostOnly(v));
    }
    if n_tx == 0 || n_rx < n_tx || batch == 0 || n_harts == 0 {
        return Err(KernelError::Shape { n_tx, n_rx, batch });
    }
    let l = LayoutDescriptor::new(v, n_tx, n_rx, batch, n_harts, cfg)?;
    let asm = emit(&l);
    let image = assemble(&asm).map_err(KernelError::Assembly)?;
    Ok(KernelImage { image, layout: l, asm })
}

fn emit(l: &LayoutDescriptor) -> String {
    let v = l.variant;
    let gm = Mac::gram(v);
    let sm = Mac::solver(v);
    let (nt, nr) = (l.n_tx, l.n_rx);
    let eb = v.element_bytes();
    let row = 4 * nt;
    let aliased = l.hb == l.hc;
    let mut e = Emitter {
        out: format!(
            "# MMSE detection, {v}, {nt}x{nr}, batch {}, {} harts\n",
            l.batch, l.n_harts
        ),
        labels: 0,
    };

    // s0 scratch, s1 record, s2 end of records, s3 i, s4 j, s5 n_tx,
    // s6 fp16 sign, s7 upper-half sign, s8 shuffle selector, s9 σ²
    e.out.push_str(".text\n");
    e.op("csrr a0, mhartid");
    e.op(&format!("li a1, {}", l.cores_per_tile));
    e.op("divu a2, a0, a1");
    e.op("remu a3, a0, a1");
    e.op(&format!("li a1, {}", l.l1_bytes_per_tile));
    e.op("mul a2, a2, a1");
    e.op(&format!("li a1, {}", l.share));
    e.op("mul a3, a3, a1");
    e.op(&format!("li s1, {L1_BASE:#x}"));
    e.op("add s1, s1, a2");
    e.op("add s1, s1, a3");
    e.op(&format!("li a1, {}", l.batch * l.record_bytes));
    e.op("add s0, s1, a1");
    e.op("mv s2, s0");
    e.op(&format!("li s5, {nt}"));
    e.op("li s6, 0x8000");
    e.op("li s7, 0x80000000");
    let sel = if v == Variant::WDotp8 { SWAP8 } else { SWAP16 };
    e.op(&format!("li s8, {sel:#x}"));

    e.place("problem");
    e.addr("a6", "s1", l.sigma2, &[]);
    e.op("lw s9, 0(a6)");
    match v {
        Variant::WDotp16 => e.op("fcvt.s.h s9, s9"),
        Variant::WDotp8 => {
            e.op("fcvt.h.b s9, s9");
            e.op("slli s9, s9, 16");
            e.op("srli s9, s9, 16");
        }
        _ => {}
    }

    // 1. Gram operands
    let conj = if eb == 4 { "s7" } else { "s6" };
    let (ld, st) = if eb == 4 { ("lw", "sw") } else { ("lh", "sh") };
    e.op(&format!("li a7, {}", nt * eb));
    e.op("li s3, 0");
    e.place("copy_row");
    e.addr("a0", "s1", l.h, &[("s3", eb)]);
    e.addr("a1", "s0", l.hc, &[("s3", l.row_bytes)]);
    if !aliased {
        e.addr("a6", "s0", l.hb, &[("s3", l.row_bytes)]);
    }
    e.op(&format!("li a2, {nr}"));
    e.place("copy_elem");
    e.op(&format!("{ld} t0, 0(a0)"));
    if !aliased {
        e.op(&format!("{st} t0, 0(a6)"));
        e.op(&format!("addi a6, a6, {eb}"));
    }
    e.op(&format!("xor t0, t0, {conj}"));
    e.op(&format!("{st} t0, 0(a1)"));
    e.op(&format!("addi a1, a1, {eb}"));
    e.op("add a0, a0, a7");
    e.op("addi a2, a2, -1");
    e.op("bnez a2, copy_elem");
    let odd_pad = v == Variant::WDotp8 && nr % 2 == 1;
    if odd_pad {
        e.op("sh zero, 0(a1)");
    }
    e.op("addi s3, s3, 1");
    e.op("blt s3, s5, copy_row");
    if aliased {
        e.addr("a0", "s1", l.y, &[]);
        e.addr("a1", "s0", l.yb, &[]);
        e.op(&format!("li a2, {nr}"));
        e.place("copy_y");
        e.op(&format!("{ld} t0, 0(a0)"));
        e.op(&format!("xor t0, t0, {conj}"));
        e.op(&format!("{st} t0, 0(a1)"));
        e.op(&format!("addi a0, a0, {eb}"));
        e.op(&format!("addi a1, a1, {eb}"));
        e.op("addi a2, a2, -1");
        e.op("bnez a2, copy_y");
        if odd_pad {
            e.op("sh zero, 0(a1)");
        }
    }

    // 2. Gram and matched filter
    let glen = if v == Variant::WDotp8 { nr.div_ceil(2) } else { nr };
    let wide_im = !matches!(gm, Mac::Complex16);
    let gram_init = |e: &mut Emitter, diag: bool| {
        e.op(if diag { "mv a4, s9" } else { "li a4, 0" });
        if wide_im {
            e.op("li a5, 0");
        }
    };
    let gram_init2 = |e: &mut Emitter, diag: bool| {
        gram_init(e, diag);
        e.op("li s10, 0");
        if wide_im {
            e.op("li s11, 0");
        }
    };
    let gram_store = |e: &mut Emitter, at: &str, off: u32, re: &str, im: &str| {
        match gm {
            Mac::Scalar16 => {}
            Mac::Scalar8 => {
                e.op(&format!("fcvt.h.b {re}, {re}"));
                e.op(&format!("fcvt.h.b {im}, {im}"));
            }
            Mac::Wide16 => {
                e.op(&format!("fcvt.h.s {re}, {re}"));
                e.op(&format!("fcvt.h.s {im}, {im}"));
            }
            Mac::Wide8 => {
                for r in [re, im] {
                    e.op(&format!("srli a6, {r}, 16"));
                    e.op(&format!("fadd.h {r}, {r}, a6"));
                }
            }
            Mac::Complex16 => {
                e.op(&format!("sw {re}, {off}({at})"));
                return;
            }
        }
        e.op(&format!("sh {re}, {off}({at})"));
        e.op(&format!("sh {im}, {}({at})", off + 2));
    };
    let y_src = if aliased { ("s0", l.yb) } else { ("s1", l.y) };
    e.op("li s3, 0");
    e.place("gram_row");
    e.op("li s4, 0");
    e.place("gram_pair");
    e.op("addi a6, s4, 1");
    e.op("bge a6, s3, gram_single");
    e.addr("a0", "s0", l.hc, &[("s3", l.row_bytes)]);
    e.addr("a1", "s0", l.hb, &[("s4", l.row_bytes)]);
    e.addr("a7", "a1", l.row_bytes, &[]);
    e.op(&format!("li a2, {glen}"));
    gram_init2(&mut e, false);
    e.dot2(gm);
    e.addr("t0", "s0", l.g, &[("s3", row), ("s4", 4)]);
    gram_store(&mut e, "t0", 0, "a4", "a5");
    gram_store(&mut e, "t0", 4, "s10", "s11");
    e.op("addi s4, s4, 2");
    e.op("j gram_pair");
    e.place("gram_single");
    e.op("beq s4, s3, gram_diag");
    e.addr("a0", "s0", l.hc, &[("s3", l.row_bytes)]);
    e.addr("a1", "s0", l.hb, &[("s4", l.row_bytes)]);
    e.op(&format!("li a2, {glen}"));
    gram_init(&mut e, false);
    e.dot(gm);
    e.addr("t0", "s0", l.g, &[("s3", row), ("s4", 4)]);
    gram_store(&mut e, "t0", 0, "a4", "a5");
    e.place("gram_diag");
    e.addr("a0", "s0", l.hc, &[("s3", l.row_bytes)]);
    e.addr("a1", "s0", l.hb, &[("s3", l.row_bytes)]);
    e.addr("a7", y_src.0, y_src.1, &[]);
    e.op(&format!("li a2, {glen}"));
    gram_init2(&mut e, true);
    e.dot2(gm);
    e.addr("t0", "s0", l.g, &[("s3", row + 4)]);
    gram_store(&mut e, "t0", 0, "a4", "a5");
    e.addr("t0", "s0", l.z, &[("s3", 4)]);
    gram_store(&mut e, "t0", 0, "s10", "s11");
    e.op("addi s3, s3, 1");
    e.op("blt s3, s5, gram_row");

    // 3. Cholesky
    e.op("li s3, 0");
    e.place("chol_row");
    e.op("li s4, 0");
    e.op("beq s4, s3, chol_diag");
    e.place("chol_col");
    e.addr("a6", "s0", l.g, &[("s3", row), ("s4", 4)]);
    e.op("lw a4, 0(a6)");
    e.solver_init(sm);
    e.addr("a0", "s0", l.la, &[("s3", row)]);
    e.addr("a1", "s0", l.mb, &[("s4", row)]);
    e.op("mv a2, s4");
    e.dot(sm);
    e.solver_finish(sm);
    e.addr("a6", "s0", l.d, &[("s4", 4)]);
    e.op("lw a6, 0(a6)");
    e.divide();
    e.addr("a6", "s0", l.la, &[("s3", row), ("s4", 4)]);
    e.store_pair("a6");
    e.op("xor a4, a4, s6");
    e.addr("a6", "s0", l.pt, &[("s4", row), ("s3", 4)]);
    e.store_pair("a6");
    if sm == Mac::Wide16 {
        e.op("xor a5, a5, s6");
    }
    e.addr("a6", "s0", l.mb, &[("s3", row), ("s4", 4)]);
    e.store_pair("a6");
    e.op("addi s4, s4, 1");
    e.op("blt s4, s3, chol_col");
    e.place("chol_diag");
    e.addr("a6", "s0", l.g, &[("s3", row + 4)]);
    e.op("lw a4, 0(a6)");
    e.solver_init(sm);
    e.addr("a0", "s0", l.la, &[("s3", row)]);
    e.addr("a1", "s0", l.mb, &[("s3", row)]);
    e.op("mv a2, s3");
    e.dot(sm);
    e.solver_finish(sm);
    // pivot must be a positive number: 0 < bits <= +inf
    e.op("bge zero, a4, pivot_fail");
    e.op("li a6, 0x7f800001");
    e.op("bge a4, a6, pivot_fail");
    e.op("fsqrt.s a4, a4");
    e.op("fcvt.h.s a4, a4");
    e.op("fcvt.s.h a4, a4");
    e.addr("a6", "s0", l.d, &[("s3", 4)]);
    e.op("sw a4, 0(a6)");
    e.op("addi s3, s3, 1");
    e.op("blt s3, s5, chol_row");
    e.op("j forward");
    e.place("pivot_fail");
    e.op("addi a6, s3, 1");
    e.addr("a7", "s1", l.status, &[]);
    e.op("sw a6, 0(a7)");
    e.op("j next");

    // 4. L·u = z
    e.place("forward");
    e.op("li s3, 0");
    e.place("fwd_row");
    e.addr("a6", "s0", l.z, &[("s3", 4)]);
    e.op("lw a4, 0(a6)");
    e.solver_init(sm);
    e.addr("a0", "s0", l.la, &[("s3", row)]);
    e.addr("a1", "s0", l.nu, &[]);
    e.op("mv a2, s3");
    e.dot(sm);
    e.solver_finish(sm);
    e.addr("a6", "s0", l.d, &[("s3", 4)]);
    e.op("lw a6, 0(a6)");
    e.divide();
    e.addr("a6", "s0", l.u, &[("s3", 4)]);
    e.store_pair("a6");
    e.op("xor a4, a4, s6");
    if sm != Mac::Wide16 {
        e.op("xor a5, a5, s6");
    }
    e.addr("a6", "s0", l.nu, &[("s3", 4)]);
    e.store_pair("a6");
    e.op("addi s3, s3, 1");
    e.op("blt s3, s5, fwd_row");

    // 5. Lᴴ·x̂ = u
    e.op("addi s3, s5, -1");
    e.place("bwd_row");
    e.addr("a6", "s0", l.u, &[("s3", 4)]);
    e.op("lw a4, 0(a6)");
    e.solver_init(sm);
    e.addr("a0", "s0", l.pt + 4, &[("s3", row + 4)]);
    e.addr("a1", "s0", l.xb + 4, &[("s3", 4)]);
    e.op("sub a2, s5, s3");
    e.op("addi a2, a2, -1");
    e.dot(sm);
    e.solver_finish(sm);
    e.addr("a6", "s0", l.d, &[("s3", 4)]);
    e.op("lw a6, 0(a6)");
    e.divide();
    e.addr("a6", "s1", l.xhat, &[("s3", 4)]);
    e.store_pair("a6");
    if sm == Mac::Wide16 {
        e.op("xor a5, a5, s6");
    }
    e.addr("a6", "s0", l.xb, &[("s3", 4)]);
    e.store_pair("a6");
    e.op("addi s3, s3, -1");
    e.op("bge s3, zero, bwd_row");
    e.addr("a6", "s1", l.status, &[]);
    e.op("sw zero, 0(a6)");

    e.place("next");
    e.op(&format!("li a6, {}", l.record_bytes));
    e.op("add s1, s1, a6");
    e.op("blt s1, s2, problem");
    e.op("barrier");
    e.op("halt");
    e.out
}
