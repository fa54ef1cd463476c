//! Host replicas of the guest kernels. Every value passes through the same
//! lowprec operation, in the same order, as the generated instruction
//! sequence; `gen.rs` documents the sequences.

use alloc::vec;
use alloc::vec::Vec;

use super::{NonPositiveDiagonal, QuantizedProblem, Variant};
use crate::lowprec::{
    complex_dotprod16, fp_add, fp_cast, fp_div, fp_fma, fp_fms, fp_sqrt, shuffle, widening_dotprod,
    FpFormat, LaneFormat, PackedWord, Widening,
};

const F8: FpFormat = FpFormat::FP8;
const F16: FpFormat = FpFormat::FP16;
const F32: FpFormat = FpFormat::FP32;

/// Shuffle selector turning a conjugated pair [re, -im] into [im, re].
pub(super) const SWAP16: u32 = 0x09;
/// The same on two conjugated fp8 pairs at once.
pub(super) const SWAP8: u32 = 0x2B09;

fn lo(w: u32, f: FpFormat) -> u32 {
    w & f.mask()
}

fn hi(w: u32, f: FpFormat) -> u32 {
    (w >> f.width()) & f.mask()
}

fn pack(re: u32, im: u32, f: FpFormat) -> u32 {
    (re & f.mask()) | ((im & f.mask()) << f.width())
}

fn conj(w: u32, f: FpFormat) -> u32 {
    w ^ (f.sign_bit() << f.width())
}

fn neg(w: u32, f: FpFormat) -> u32 {
    w ^ f.sign_bit() ^ (f.sign_bit() << f.width())
}

/// acc += a·b with four fused scalar operations:
/// re ← fms(ar, br, fms(ai, bi, re)), im ← fma(ar, bi, fma(ai, br, im)).
fn scalar_mac(acc: (u32, u32), a: u32, b: u32, f: FpFormat) -> (u32, u32) {
    let (ar, ai, br, bi) = (lo(a, f), hi(a, f), lo(b, f), hi(b, f));
    let re = fp_fms(ar, br, fp_fms(ai, bi, acc.0, f), f);
    let im = fp_fma(ar, bi, fp_fma(ai, br, acc.1, f), f);
    (re, im)
}

/// acc += a·b in fp32 lanes; `b` holds the conjugate of the right operand.
fn wide_mac(acc: (u32, u32), a: u32, b_conj: u32) -> (u32, u32) {
    let w = Widening::F16ToF32;
    let sw = shuffle(PackedWord(b_conj), PackedWord(b_conj), SWAP16, LaneFormat::F16)
        .expect("static selector");
    let re = widening_dotprod(PackedWord(a), PackedWord(b_conj), PackedWord(acc.0), w).0;
    let im = widening_dotprod(PackedWord(a), sw, PackedWord(acc.1), w).0;
    (re, im)
}

/// Arithmetic of the linear-system phase.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Solver {
    /// fp16 scalar accumulators (Half16, Quarter8, WDotp8).
    Scalar,
    /// fp32 accumulators via wdotp.h (WDotp16).
    Wide,
    /// packed fp16 accumulator via cdotp.h (CDotp16).
    Complex,
}

impl Solver {
    fn of(v: Variant) -> Self {
        match v {
            Variant::WDotp16 => Solver::Wide,
            Variant::CDotp16 => Solver::Complex,
            _ => Solver::Scalar,
        }
    }

    /// Right-operand encoding.
    fn bform(self, w: u32) -> u32 {
        match self {
            Solver::Wide => conj(w, F16),
            _ => w,
        }
    }

    /// acc := init; acc += Σ a[k]·b[k]; result widened to fp32 (re, im).
    fn dot(self, init: u32, a: &[u32], b: &[u32]) -> (u32, u32) {
        match self {
            Solver::Scalar => {
                let mut acc = (lo(init, F16), hi(init, F16));
                for (&x, &y) in a.iter().zip(b) {
                    acc = scalar_mac(acc, x, y, F16);
                }
                (fp_cast(acc.0, F16, F32), fp_cast(acc.1, F16, F32))
            }
            Solver::Wide => {
                let mut acc = (fp_cast(lo(init, F16), F16, F32), fp_cast(hi(init, F16), F16, F32));
                for (&x, &y) in a.iter().zip(b) {
                    acc = wide_mac(acc, x, y);
                }
                acc
            }
            Solver::Complex => {
                let mut acc = PackedWord(init);
                for (&x, &y) in a.iter().zip(b) {
                    acc = complex_dotprod16(PackedWord(x), PackedWord(y), acc);
                }
                (fp_cast(lo(acc.0, F16), F16, F32), fp_cast(hi(acc.0, F16), F16, F32))
            }
        }
    }
}

/// fp32 quotient rounded back to fp16.
fn div16(x32: u32, d32: u32) -> u32 {
    fp_cast(fp_div(x32, d32, F32), F32, F16)
}

/// A positive, non-NaN fp32 pivot.
pub(super) fn pivot_ok(d32: u32) -> bool {
    let s = d32 as i32;
    s > 0 && s <= 0x7F80_0000
}

/// Results of the Gram / matched-filter phase: lower triangle of G (row
/// major, full square storage) and z, all packed fp16 complex.
fn gram_phase(q: &QuantizedProblem) -> (Vec<u32>, Vec<u32>) {
    let (nt, nr) = (q.n_tx, q.n_rx);
    let v = q.variant;
    let mut g = vec![0u32; nt * nt];
    let mut z = vec![0u32; nt];
    let s2 = q.sigma2;
    match v {
        Variant::Half16 | Variant::CDotp16 | Variant::Quarter8 => {
            let f = v.storage();
            // Hc[i][k] = conj(H[k][i]); Hb[j][k] = H[k][j]
            let hc: Vec<Vec<u32>> = (0..nt)
                .map(|i| (0..nr).map(|k| conj(q.h[k * nt + i], f)).collect())
                .collect();
            let hb: Vec<Vec<u32>> = (0..nt)
                .map(|j| (0..nr).map(|k| q.h[k * nt + j]).collect())
                .collect();
            let dot = |init: u32, a: &[u32], b: &[u32]| -> u32 {
                if v == Variant::CDotp16 {
                    let mut acc = PackedWord(init);
                    for (&x, &y) in a.iter().zip(b) {
                        acc = complex_dotprod16(PackedWord(x), PackedWord(y), acc);
                    }
                    acc.0
                } else {
                    let mut acc = (lo(init, f), hi(init, f));
                    for (&x, &y) in a.iter().zip(b) {
                        acc = scalar_mac(acc, x, y, f);
                    }
                    pack(acc.0, acc.1, f)
                }
            };
            for i in 0..nt {
                for j in 0..=i {
                    let init = if i == j { s2 } else { 0 };
                    g[i * nt + j] = dot(init, &hc[i], &hb[j]);
                }
                z[i] = dot(0, &hc[i], &q.y);
            }
            if v == Variant::Quarter8 {
                let up = |w: u32| pack(fp_cast(lo(w, F8), F8, F16), fp_cast(hi(w, F8), F8, F16), F16);
                for i in 0..nt {
                    for j in 0..=i {
                        g[i * nt + j] = up(g[i * nt + j]);
                    }
                    z[i] = up(z[i]);
                }
            }
        }
        Variant::WDotp16 => {
            // Hc and Hb coincide: both hold conj(H) transposed
            let hc: Vec<Vec<u32>> = (0..nt)
                .map(|i| (0..nr).map(|k| conj(q.h[k * nt + i], F16)).collect())
                .collect();
            let yb: Vec<u32> = q.y.iter().map(|&w| conj(w, F16)).collect();
            let dot = |init: u32, a: &[u32], b: &[u32]| -> u32 {
                let mut acc = (init, 0);
                for (&x, &y) in a.iter().zip(b) {
                    acc = wide_mac(acc, x, y);
                }
                pack(fp_cast(acc.0, F32, F16), fp_cast(acc.1, F32, F16), F16)
            };
            let s2_32 = fp_cast(s2, F16, F32);
            for i in 0..nt {
                for j in 0..=i {
                    g[i * nt + j] = dot(if i == j { s2_32 } else { 0 }, &hc[i], &hc[j]);
                }
                z[i] = dot(0, &hc[i], &yb);
            }
        }
        Variant::WDotp8 => {
            // rows of conj(H) transposed, padded to an even length so that
            // every 32-bit word holds two complex fp8 elements
            let pairs = nr.div_ceil(2);
            let words = |col: &dyn Fn(usize) -> u32| -> Vec<u32> {
                (0..pairs)
                    .map(|p| {
                        let e = |k: usize| if k < nr { col(k) } else { 0 };
                        e(2 * p) | (e(2 * p + 1) << 16)
                    })
                    .collect()
            };
            let hc: Vec<Vec<u32>> = (0..nt)
                .map(|i| words(&|k| conj(q.h[k * nt + i], F8)))
                .collect();
            let yb = words(&|k| conj(q.y[k], F8));
            let dot = |init: u32, a: &[u32], b: &[u32]| -> u32 {
                let w = Widening::F8ToF16;
                let (mut re, mut im) = (PackedWord(init), PackedWord(0));
                for (&x, &y) in a.iter().zip(b) {
                    re = widening_dotprod(PackedWord(x), PackedWord(y), re, w);
                    let sw = shuffle(PackedWord(y), PackedWord(y), SWAP8, LaneFormat::F8)
                        .expect("static selector");
                    im = widening_dotprod(PackedWord(x), sw, im, w);
                }
                let fold = |p: PackedWord| fp_add(lo(p.0, F16), hi(p.0, F16), F16);
                pack(fold(re), fold(im), F16)
            };
            let s2_16 = fp_cast(s2, F8, F16);
            for i in 0..nt {
                for j in 0..=i {
                    g[i * nt + j] = dot(if i == j { s2_16 } else { 0 }, &hc[i], &hc[j]);
                }
                z[i] = dot(0, &hc[i], &yb);
            }
        }
        Variant::Double64 => unreachable!("no reduced-precision model for double64"),
    }
    (g, z)
}

/// Bit-true model of the guest kernel for `q.variant`; returns x̂ as packed
/// fp16 complex words.
pub fn functional_mmse(q: &QuantizedProblem) -> Result<Vec<u32>, NonPositiveDiagonal> {
    assert!(q.variant != Variant::Double64, "use golden_mmse for double64");
    let n = q.n_tx;
    let s = Solver::of(q.variant);
    let (g, z) = gram_phase(q);

    // La[i][k] = L[i][k]; Mb[j][k] = bform(-conj L[j][k]); Pt[i][k] = -conj L[k][i]
    let mut la = vec![0u32; n * n];
    let mut mb = vec![0u32; n * n];
    let mut pt = vec![0u32; n * n];
    let mut d32 = vec![0u32; n];
    for i in 0..n {
        for j in 0..=i {
            let (re, im) = s.dot(g[i * n + j], &la[i * n..i * n + j], &mb[j * n..j * n + j]);
            if i == j {
                if !pivot_ok(re) {
                    return Err(NonPositiveDiagonal { index: i });
                }
                let l16 = fp_cast(fp_sqrt(re, F32), F32, F16);
                d32[i] = fp_cast(l16, F16, F32);
            } else {
                let l = pack(div16(re, d32[j]), div16(im, d32[j]), F16);
                la[i * n + j] = l;
                mb[i * n + j] = s.bform(neg(conj(l, F16), F16));
                pt[j * n + i] = neg(conj(l, F16), F16);
            }
        }
    }

    let mut u = vec![0u32; n];
    let mut nu = vec![0u32; n];
    for i in 0..n {
        let (re, im) = s.dot(z[i], &la[i * n..i * n + i], &nu[..i]);
        u[i] = pack(div16(re, d32[i]), div16(im, d32[i]), F16);
        nu[i] = s.bform(neg(u[i], F16));
    }

    let mut x = vec![0u32; n];
    let mut xb = vec![0u32; n];
    for i in (0..n).rev() {
        let (re, im) = s.dot(u[i], &pt[i * n + i + 1..i * n + n], &xb[i + 1..]);
        x[i] = pack(div16(re, d32[i]), div16(im, d32[i]), F16);
        xb[i] = s.bform(x[i]);
    }
    Ok(x)
}
