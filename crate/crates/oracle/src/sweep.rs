//! Comparison drivers: run an implementation and the oracle over a case set
//! and tally mismatches. Shared by the unit suites and the acceptance run.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fp::{self, Small};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fmt {
    F8,
    F16,
    F32,
}

impl Fmt {
    fn small(self) -> Option<Small> {
        match self {
            Fmt::F8 => Some(Small::Fp8),
            Fmt::F16 => Some(Small::Fp16),
            Fmt::F32 => None,
        }
    }

    pub fn width(self) -> u32 {
        match self {
            Fmt::F8 => 8,
            Fmt::F16 => 16,
            Fmt::F32 => 32,
        }
    }
}

/// The arithmetic under test. Operands and results are raw bit patterns in
/// the low bits; packed operations take whole 32-bit words.
pub trait Subject: Sync {
    fn add(&self, a: u32, b: u32, f: Fmt) -> u32;
    fn sub(&self, a: u32, b: u32, f: Fmt) -> u32;
    fn mul(&self, a: u32, b: u32, f: Fmt) -> u32;
    fn div(&self, a: u32, b: u32, f: Fmt) -> u32;
    fn fma(&self, a: u32, b: u32, c: u32, f: Fmt) -> u32;
    fn fms(&self, a: u32, b: u32, c: u32, f: Fmt) -> u32;
    fn sqrt(&self, a: u32, f: Fmt) -> u32;
    fn cast(&self, a: u32, from: Fmt, to: Fmt) -> u32;
    fn wdotp16(&self, a: u32, b: u32, acc: u32) -> u32;
    fn wdotp8(&self, a: u32, b: u32, acc: u32) -> u32;
    fn cdotp16(&self, a: u32, b: u32, acc: u32) -> u32;
}

fn canon32(x: f32) -> u32 {
    if x.is_nan() {
        0x7FC0_0000
    } else {
        x.to_bits()
    }
}

fn f(x: u32) -> f32 {
    f32::from_bits(x)
}

/// Reference results: enumeration oracle for the small formats, host FPU for
/// fp32.
pub struct Oracle;

impl Subject for Oracle {
    fn add(&self, a: u32, b: u32, t: Fmt) -> u32 {
        match t.small() {
            Some(s) => fp::add(a, b, s),
            None => canon32(f(a) + f(b)),
        }
    }
    fn sub(&self, a: u32, b: u32, t: Fmt) -> u32 {
        match t.small() {
            Some(s) => fp::sub(a, b, s),
            None => canon32(f(a) - f(b)),
        }
    }
    fn mul(&self, a: u32, b: u32, t: Fmt) -> u32 {
        match t.small() {
            Some(s) => fp::mul_(a, b, s),
            None => canon32(f(a) * f(b)),
        }
    }
    fn div(&self, a: u32, b: u32, t: Fmt) -> u32 {
        match t.small() {
            Some(s) => fp::div(a, b, s),
            None => canon32(f(a) / f(b)),
        }
    }
    fn fma(&self, a: u32, b: u32, c: u32, t: Fmt) -> u32 {
        match t.small() {
            Some(s) => fp::fma(a, b, c, s),
            None => canon32(f(a).mul_add(f(b), f(c))),
        }
    }
    fn fms(&self, a: u32, b: u32, c: u32, t: Fmt) -> u32 {
        match t.small() {
            Some(s) => fp::fms(a, b, c, s),
            None => canon32(f(a).mul_add(f(b), -f(c))),
        }
    }
    fn sqrt(&self, a: u32, t: Fmt) -> u32 {
        match t.small() {
            Some(s) => fp::sqrt(a, s),
            None => canon32(f(a).sqrt()),
        }
    }
    fn cast(&self, a: u32, from: Fmt, to: Fmt) -> u32 {
        match (from.small(), to.small()) {
            (Some(x), Some(y)) => fp::cast(a, x, y),
            (Some(x), None) => fp::to_f32_bits(a, x),
            (None, Some(y)) => fp::from_f32_bits(a, y),
            (None, None) => canon32(f(a)),
        }
    }
    fn wdotp16(&self, a: u32, b: u32, acc: u32) -> u32 {
        fp::wdotp16(
            [a & 0xFFFF, a >> 16],
            [b & 0xFFFF, b >> 16],
            acc,
        )
    }
    fn wdotp8(&self, a: u32, b: u32, acc: u32) -> u32 {
        let l = |w: u32, i: u32| (w >> (8 * i)) & 0xFF;
        let lo = fp::wdotp8_lane([l(a, 0), l(a, 1)], [l(b, 0), l(b, 1)], acc & 0xFFFF);
        let hi = fp::wdotp8_lane([l(a, 2), l(a, 3)], [l(b, 2), l(b, 3)], acc >> 16);
        lo | (hi << 16)
    }
    fn cdotp16(&self, a: u32, b: u32, acc: u32) -> u32 {
        let s = |w: u32| [w & 0xFFFF, w >> 16];
        let [re, im] = fp::cdotp16(s(a), s(b), s(acc));
        re | (im << 16)
    }
}

#[derive(Clone, Debug)]
pub struct Tally {
    pub label: String,
    pub cases: u64,
    pub mismatches: u64,
    /// operands, subject result, oracle result
    pub first: Option<(Vec<u32>, u32, u32)>,
}

impl Tally {
    pub fn ok(&self) -> bool {
        self.mismatches == 0 && self.cases > 0
    }
}

impl fmt::Display for Tally {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} cases, {} mismatches",
            self.label, self.cases, self.mismatches
        )?;
        if let Some((ops, got, want)) = &self.first {
            write!(f, " (first: {ops:x?} -> {got:#x}, want {want:#x})")?;
        }
        Ok(())
    }
}

/// Compare over `n` cases produced by `case(i)`.
pub fn compare<const N: usize>(
    label: &str,
    n: u64,
    case: impl Fn(u64) -> [u32; N] + Sync,
    subject: impl Fn([u32; N]) -> u32 + Sync,
    oracle: impl Fn([u32; N]) -> u32 + Sync,
) -> Tally {
    let (mismatches, first) = (0..n)
        .into_par_iter()
        .map(|i| {
            let ops = case(i);
            let (got, want) = (subject(ops), oracle(ops));
            if got == want {
                (0u64, None)
            } else {
                (1, Some((i, ops.to_vec(), got, want)))
            }
        })
        .reduce(
            || (0, None),
            |(ma, fa), (mb, fb)| {
                let first = match (fa, fb) {
                    (Some(x), Some(y)) => Some(if x.0 <= y.0 { x } else { y }),
                    (x, y) => x.or(y),
                };
                (ma + mb, first)
            },
        );
    Tally {
        label: label.to_string(),
        cases: n,
        mismatches,
        first: first.map(|(_, o, g, w)| (o, g, w)),
    }
}

/// Encodings at the edges of every range: zeros, subnormal limits, the
/// normal threshold, neighbours of one, the largest finite values, inf and
/// NaN, in both signs.
pub fn boundary_codes(t: Fmt) -> Vec<u32> {
    let (m, w) = match t {
        Fmt::F8 => (2, 8),
        Fmt::F16 => (10, 16),
        Fmt::F32 => (23, 32),
    };
    let e = w - 1 - m;
    let bias = (1u32 << (e - 1)) - 1;
    let one = bias << m;
    let inf = ((1u32 << e) - 1) << m;
    let mut v = vec![
        0,
        1,
        2,
        3,
        (1 << m) - 2,
        (1 << m) - 1,
        1 << m,
        (1 << m) + 1,
        one - 1,
        one,
        one + 1,
        inf - 2,
        inf - 1,
        inf,
        inf + 1,
        inf | (1 << (m - 1)),
    ];
    let sign = 1u32 << (w - 1);
    let neg: Vec<u32> = v.iter().map(|x| x | sign).collect();
    v.extend(neg);
    v.sort_unstable();
    v.dedup();
    v
}

pub fn random_words(seed: u64, n: usize, width: u32) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = if width == 32 {
        u32::MAX
    } else {
        (1 << width) - 1
    };
    (0..n).map(|_| rng.random::<u32>() & mask).collect()
}

fn exhaustive_binary(
    label: &str,
    t: Fmt,
    s: &(dyn Fn(u32, u32) -> u32 + Sync),
    o: &(dyn Fn(u32, u32) -> u32 + Sync),
) -> Tally {
    let n = 1u64 << (2 * t.width());
    let w = t.width();
    compare(
        label,
        n,
        |i| [(i >> w) as u32, (i & ((1 << w) - 1)) as u32],
        |[a, b]| s(a, b),
        |[a, b]| o(a, b),
    )
}

/// Sampled binary check: every pair of boundary codes, then `n` random pairs.
fn sampled_binary(
    label: &str,
    t: Fmt,
    n: usize,
    seed: u64,
    s: &(dyn Fn(u32, u32) -> u32 + Sync),
    o: &(dyn Fn(u32, u32) -> u32 + Sync),
) -> Tally {
    let b = boundary_codes(t);
    let r = random_words(seed, 2 * n, t.width());
    let nb = b.len() * b.len();
    compare(
        label,
        (nb + n) as u64,
        |i| {
            let i = i as usize;
            if i < nb {
                [b[i / b.len()], b[i % b.len()]]
            } else {
                let j = i - nb;
                [r[2 * j], r[2 * j + 1]]
            }
        },
        |[a, c]| s(a, c),
        |[a, c]| o(a, c),
    )
}

fn sampled_ternary(
    label: &str,
    t: Fmt,
    n: usize,
    seed: u64,
    s: &(dyn Fn(u32, u32, u32) -> u32 + Sync),
    o: &(dyn Fn(u32, u32, u32) -> u32 + Sync),
) -> Tally {
    let b = boundary_codes(t);
    let r = random_words(seed, 3 * n, t.width());
    let nb = b.len() * b.len() * b.len();
    compare(
        label,
        (nb + n) as u64,
        |i| {
            let i = i as usize;
            if i < nb {
                let l = b.len();
                [b[i / (l * l)], b[(i / l) % l], b[i % l]]
            } else {
                let j = i - nb;
                [r[3 * j], r[3 * j + 1], r[3 * j + 2]]
            }
        },
        |[a, c, d]| s(a, c, d),
        |[a, c, d]| o(a, c, d),
    )
}

/// Every FP8 table is exhaustive (all 2^16 pairs, all 2^24 fma triples);
/// FP16 and FP32 use `samples` random operands plus all boundary
/// combinations, except FP16 unary operations which are exhaustive.
pub fn arithmetic_suite(subject: &dyn Subject, samples: usize, seed: u64) -> Vec<Tally> {
    let o = Oracle;
    let mut out = Vec::new();
    let t = Fmt::F8;
    out.push(exhaustive_binary("fp8 add", t, &|a, b| subject.add(a, b, t), &|a, b| o.add(a, b, t)));
    out.push(exhaustive_binary("fp8 sub", t, &|a, b| subject.sub(a, b, t), &|a, b| o.sub(a, b, t)));
    out.push(exhaustive_binary("fp8 mul", t, &|a, b| subject.mul(a, b, t), &|a, b| o.mul(a, b, t)));
    out.push(exhaustive_binary("fp8 div", t, &|a, b| subject.div(a, b, t), &|a, b| o.div(a, b, t)));
    out.push(compare(
        "fp8 fma",
        1 << 24,
        |i| [(i >> 16) as u32, ((i >> 8) & 0xFF) as u32, (i & 0xFF) as u32],
        |[a, b, c]| subject.fma(a, b, c, t),
        |[a, b, c]| o.fma(a, b, c, t),
    ));
    out.push(compare(
        "fp8 fms",
        1 << 24,
        |i| [(i >> 16) as u32, ((i >> 8) & 0xFF) as u32, (i & 0xFF) as u32],
        |[a, b, c]| subject.fms(a, b, c, t),
        |[a, b, c]| o.fms(a, b, c, t),
    ));
    for (label, t) in [("fp8 sqrt", Fmt::F8), ("fp16 sqrt", Fmt::F16)] {
        out.push(compare(
            label,
            1 << t.width(),
            |i| [i as u32],
            |[a]| subject.sqrt(a, t),
            |[a]| o.sqrt(a, t),
        ));
    }
    for (from, to) in [
        (Fmt::F8, Fmt::F16),
        (Fmt::F8, Fmt::F32),
        (Fmt::F16, Fmt::F8),
        (Fmt::F16, Fmt::F32),
    ] {
        out.push(compare(
            &format!("cast {from:?}->{to:?}"),
            1 << from.width(),
            |i| [i as u32],
            |[a]| subject.cast(a, from, to),
            |[a]| o.cast(a, from, to),
        ));
    }
    let r32 = random_words(seed ^ 0x32, samples, 32);
    let b32 = boundary_codes(Fmt::F32);
    for to in [Fmt::F8, Fmt::F16] {
        out.push(compare(
            &format!("cast F32->{to:?}"),
            (b32.len() + r32.len()) as u64,
            |i| {
                let i = i as usize;
                [if i < b32.len() { b32[i] } else { r32[i - b32.len()] }]
            },
            |[a]| subject.cast(a, Fmt::F32, to),
            |[a]| o.cast(a, Fmt::F32, to),
        ));
    }
    for (k, t) in [Fmt::F16, Fmt::F32].into_iter().enumerate() {
        let seed = seed.wrapping_add(1000 * k as u64);
        let name = |op: &str| format!("{} {op}", if t == Fmt::F16 { "fp16" } else { "fp32" });
        out.push(sampled_binary(&name("add"), t, samples, seed + 1, &|a, b| subject.add(a, b, t), &|a, b| o.add(a, b, t)));
        out.push(sampled_binary(&name("sub"), t, samples, seed + 2, &|a, b| subject.sub(a, b, t), &|a, b| o.sub(a, b, t)));
        out.push(sampled_binary(&name("mul"), t, samples, seed + 3, &|a, b| subject.mul(a, b, t), &|a, b| o.mul(a, b, t)));
        out.push(sampled_binary(&name("div"), t, samples, seed + 4, &|a, b| subject.div(a, b, t), &|a, b| o.div(a, b, t)));
        out.push(sampled_ternary(&name("fma"), t, samples, seed + 5, &|a, b, c| subject.fma(a, b, c, t), &|a, b, c| o.fma(a, b, c, t)));
        out.push(sampled_ternary(&name("fms"), t, samples, seed + 6, &|a, b, c| subject.fms(a, b, c, t), &|a, b, c| o.fms(a, b, c, t)));
    }
    let r32 = random_words(seed ^ 0x5151, samples, 32);
    out.push(compare(
        "fp32 sqrt",
        samples as u64,
        |i| [r32[i as usize]],
        |[a]| subject.sqrt(a, Fmt::F32),
        |[a]| o.sqrt(a, Fmt::F32),
    ));
    out.extend(packed_suite(subject, samples, seed ^ 0xD07));
    out
}

/// Random packed words; lanes are drawn from a mix of boundary codes and
/// random codes so special values appear often enough to matter.
fn packed_words(seed: u64, n: usize, lane: Fmt) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = boundary_codes(lane);
    let w = lane.width();
    let lanes = 32 / w;
    (0..n)
        .map(|_| {
            (0..lanes).fold(0u32, |acc, k| {
                let v = if rng.random_range(0..8) == 0 {
                    b[rng.random_range(0..b.len())]
                } else {
                    rng.random::<u32>() & (u32::MAX >> (32 - w))
                };
                acc | (v << (k * w))
            })
        })
        .collect()
}

/// Words whose lanes are moderate-magnitude values, so that accumulation
/// actually cancels and rounds rather than saturating to inf.
fn moderate_words(seed: u64, n: usize, lane: Fmt) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, m, bias) = match lane {
        Fmt::F8 => (8, 2, 15),
        Fmt::F16 => (16, 10, 15),
        Fmt::F32 => (32, 23, 127),
    };
    let lanes = 32 / w;
    (0..n)
        .map(|_| {
            (0..lanes).fold(0u32, |acc, k| {
                let sign = rng.random_range(0..2u32) << (w - 1);
                let e = (bias + rng.random_range(-6..=6)) as u32;
                let frac = rng.random::<u32>() & ((1 << m) - 1);
                acc | ((sign | (e << m) | frac) << (k * w))
            })
        })
        .collect()
}

pub fn packed_suite(subject: &dyn Subject, samples: usize, seed: u64) -> Vec<Tally> {
    let o = Oracle;
    let mut out = Vec::new();
    type Op<'a> = &'a (dyn Fn(&dyn Subject, u32, u32, u32) -> u32 + Sync);
    let ops: [(&str, Fmt, Fmt, Op); 3] = [
        ("wdotp fp16->fp32", Fmt::F16, Fmt::F32, &|s, a, b, c| s.wdotp16(a, b, c)),
        ("wdotp fp8->fp16", Fmt::F8, Fmt::F16, &|s, a, b, c| s.wdotp8(a, b, c)),
        ("cdotp fp16", Fmt::F16, Fmt::F16, &|s, a, b, c| s.cdotp16(a, b, c)),
    ];
    for (k, (label, inl, accl, op)) in ops.into_iter().enumerate() {
        let seed = seed + 10 * k as u64;
        for (kind, gen) in [
            ("mixed", packed_words as fn(u64, usize, Fmt) -> Vec<u32>),
            ("moderate", moderate_words),
        ] {
            let a = gen(seed, samples, inl);
            let b = gen(seed + 1, samples, inl);
            let c = gen(seed + 2, samples, accl);
            out.push(compare(
                &format!("{label} ({kind})"),
                samples as u64,
                |i| {
                    let i = i as usize;
                    [a[i], b[i], c[i]]
                },
                |[x, y, z]| op(subject, x, y, z),
                |[x, y, z]| op(&o, x, y, z),
            ));
        }
    }
    out
}
