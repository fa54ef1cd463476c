//! Bit-exact fp32 / fp16 / fp8 arithmetic.
//!
//! Values travel as raw bit patterns in the low bits of a `u32`. Every
//! operation rounds to nearest, ties to even, keeps subnormals, and returns
//! the canonical quiet NaN (exponent all ones, mantissa MSB set) for any NaN
//! result.

mod packed;

pub use packed::{
    complex_dotprod16, shuffle, widening_dotprod, LaneFormat, PackedWord, ShuffleError, Widening,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FpName {
    Fp32,
    Fp16,
    Fp8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FpFormat {
    pub name: FpName,
    pub exp_bits: u32,
    pub mant_bits: u32,
    pub bias: i32,
    /// Overflow clamps to the largest finite value instead of producing inf.
    pub saturating: bool,
}

impl FpFormat {
    pub const FP32: FpFormat = FpFormat {
        name: FpName::Fp32,
        exp_bits: 8,
        mant_bits: 23,
        bias: 127,
        saturating: false,
    };
    pub const FP16: FpFormat = FpFormat {
        name: FpName::Fp16,
        exp_bits: 5,
        mant_bits: 10,
        bias: 15,
        saturating: false,
    };
    /// E5M2: the top byte of a binary16.
    pub const FP8: FpFormat = FpFormat {
        name: FpName::Fp8,
        exp_bits: 5,
        mant_bits: 2,
        bias: 15,
        saturating: false,
    };

    pub const fn sign_bits(self) -> u32 {
        1
    }

    pub const fn width(self) -> u32 {
        1 + self.exp_bits + self.mant_bits
    }

    pub const fn with_saturation(mut self, on: bool) -> Self {
        self.saturating = on;
        self
    }

    pub const fn mask(self) -> u32 {
        if self.width() == 32 {
            u32::MAX
        } else {
            (1 << self.width()) - 1
        }
    }

    pub const fn sign_bit(self) -> u32 {
        1 << (self.width() - 1)
    }

    const fn exp_max(self) -> u32 {
        (1 << self.exp_bits) - 1
    }

    pub const fn inf(self, neg: bool) -> u32 {
        (self.exp_max() << self.mant_bits) | if neg { self.sign_bit() } else { 0 }
    }

    pub const fn zero(self, neg: bool) -> u32 {
        if neg {
            self.sign_bit()
        } else {
            0
        }
    }

    pub const fn qnan(self) -> u32 {
        (self.exp_max() << self.mant_bits) | (1 << (self.mant_bits - 1))
    }

    pub const fn max_finite(self, neg: bool) -> u32 {
        self.inf(neg) - 1
    }

    pub const fn is_nan(self, bits: u32) -> bool {
        (bits & (self.sign_bit() - 1)) > self.inf(false)
    }

    pub const fn emin(self) -> i32 {
        1 - self.bias
    }
}

/// Unpacked operand. Finite values are `sig * 2^exp` with `sig > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Num {
    Nan,
    Inf(bool),
    Zero(bool),
    Fin { neg: bool, sig: u128, exp: i32 },
}

impl Num {
    fn neg(self) -> bool {
        match self {
            Num::Nan => false,
            Num::Inf(n) | Num::Zero(n) => n,
            Num::Fin { neg, .. } => neg,
        }
    }

    fn negate(self) -> Num {
        match self {
            Num::Nan => Num::Nan,
            Num::Inf(n) => Num::Inf(!n),
            Num::Zero(n) => Num::Zero(!n),
            Num::Fin { neg, sig, exp } => Num::Fin {
                neg: !neg,
                sig,
                exp,
            },
        }
    }
}

pub(crate) fn unpack(bits: u32, f: FpFormat) -> Num {
    let bits = bits & f.mask();
    let neg = bits & f.sign_bit() != 0;
    let e = (bits >> f.mant_bits) & f.exp_max();
    let m = bits & ((1 << f.mant_bits) - 1);
    if e == f.exp_max() {
        if m == 0 {
            Num::Inf(neg)
        } else {
            Num::Nan
        }
    } else if e == 0 {
        if m == 0 {
            Num::Zero(neg)
        } else {
            Num::Fin {
                neg,
                sig: m as u128,
                exp: f.emin() - f.mant_bits as i32,
            }
        }
    } else {
        Num::Fin {
            neg,
            sig: (m | (1 << f.mant_bits)) as u128,
            exp: e as i32 - f.bias - f.mant_bits as i32,
        }
    }
}

fn bit_len(x: u128) -> i32 {
    128 - x.leading_zeros() as i32
}

/// Round `sig * 2^exp` (plus a sliver below 2^exp when `sticky`) into `f`.
/// Callers with `sticky` set must supply at least `mant_bits + 3` bits.
fn round_pack(neg: bool, sig: u128, exp: i32, sticky: bool, f: FpFormat) -> u32 {
    if sig == 0 {
        return f.zero(neg);
    }
    let mant = f.mant_bits as i32;
    let e_top = bit_len(sig) - 1 + exp;
    let mut e_eff = e_top.max(f.emin());
    let shift = e_eff - mant - exp;
    let mut m = if shift <= 0 {
        sig << (-shift) as u32
    } else if shift > 128 {
        0
    } else {
        let (kept, round, rest) = if shift == 128 {
            (0, sig >> 127 != 0, sig & (u128::MAX >> 1) != 0)
        } else {
            let s = shift as u32;
            (
                sig >> s,
                (sig >> (s - 1)) & 1 != 0,
                sig & ((1u128 << (s - 1)) - 1) != 0,
            )
        };
        let rest = rest || sticky;
        if round && (rest || kept & 1 != 0) {
            kept + 1
        } else {
            kept
        }
    };
    if m >> (mant + 1) != 0 {
        m >>= 1;
        e_eff += 1;
    }
    if m == 0 {
        return f.zero(neg);
    }
    let biased = if m >> mant != 0 { e_eff + f.bias } else { 0 };
    if biased >= f.exp_max() as i32 {
        return if f.saturating {
            f.max_finite(neg)
        } else {
            f.inf(neg)
        };
    }
    let frac = (m as u32) & ((1 << mant) - 1);
    f.zero(neg) | ((biased as u32) << mant) | frac
}

fn round_num(x: Num, f: FpFormat) -> u32 {
    match x {
        Num::Nan => f.qnan(),
        Num::Inf(n) => f.inf(n),
        Num::Zero(n) => f.zero(n),
        Num::Fin { neg, sig, exp } => round_pack(neg, sig, exp, false, f),
    }
}

/// Exact signed sum of two nonzero finite values, packed as
/// (neg, sig, exp, sticky). Returns None when the sum is exactly zero.
fn exact_sum(a: (bool, u128, i32), b: (bool, u128, i32)) -> Option<(bool, u128, i32, bool)> {
    let top = |x: (bool, u128, i32)| x.2 + bit_len(x.1);
    let (hi, lo) = if top(a) >= top(b) { (a, b) } else { (b, a) };
    let t = top(hi) - 120;
    debug_assert!(hi.2 >= t);
    let hs = hi.1 << (hi.2 - t) as u32;
    let (ls, lost) = if lo.2 >= t {
        (lo.1 << (lo.2 - t) as u32, false)
    } else {
        let d = (t - lo.2) as u32;
        if d >= 128 {
            (0, true)
        } else {
            (lo.1 >> d, lo.1 & ((1u128 << d) - 1) != 0)
        }
    };
    if hi.0 == lo.0 {
        Some((hi.0, hs + ls, t, lost))
    } else if lost {
        // hi dominates by far; borrow one unit so the sliver stays positive
        Some((hi.0, hs - ls - 1, t, true))
    } else if hs >= ls {
        if hs == ls {
            None
        } else {
            Some((hi.0, hs - ls, t, false))
        }
    } else {
        Some((lo.0, ls - hs, t, false))
    }
}

fn add_num(a: Num, b: Num, f: FpFormat) -> u32 {
    match (a, b) {
        (Num::Nan, _) | (_, Num::Nan) => f.qnan(),
        (Num::Inf(x), Num::Inf(y)) => {
            if x == y {
                f.inf(x)
            } else {
                f.qnan()
            }
        }
        (Num::Inf(x), _) | (_, Num::Inf(x)) => f.inf(x),
        (Num::Zero(x), Num::Zero(y)) => f.zero(x && y),
        (Num::Zero(_), v) | (v, Num::Zero(_)) => round_num(v, f),
        (
            Num::Fin {
                neg: na,
                sig: sa,
                exp: ea,
            },
            Num::Fin {
                neg: nb,
                sig: sb,
                exp: eb,
            },
        ) => match exact_sum((na, sa, ea), (nb, sb, eb)) {
            None => f.zero(false),
            Some((n, s, e, st)) => round_pack(n, s, e, st, f),
        },
    }
}

fn mul_exact(a: Num, b: Num) -> Num {
    match (a, b) {
        (Num::Nan, _) | (_, Num::Nan) => Num::Nan,
        (Num::Inf(_), Num::Zero(_)) | (Num::Zero(_), Num::Inf(_)) => Num::Nan,
        (Num::Inf(x), y) | (y, Num::Inf(x)) => Num::Inf(x ^ y.neg()),
        (Num::Zero(x), y) | (y, Num::Zero(x)) => Num::Zero(x ^ y.neg()),
        (
            Num::Fin {
                neg: na,
                sig: sa,
                exp: ea,
            },
            Num::Fin {
                neg: nb,
                sig: sb,
                exp: eb,
            },
        ) => Num::Fin {
            neg: na ^ nb,
            sig: sa * sb,
            exp: ea + eb,
        },
    }
}

/// a*b + c on unpacked operands, rounded once into `f`. Operands may come
/// from narrower formats (widening accumulation).
pub(crate) fn fma_num(a: Num, b: Num, c: Num, f: FpFormat) -> u32 {
    let p = mul_exact(a, b);
    add_num(p, c, f)
}

pub fn encode_fp(value: f64, f: FpFormat) -> u32 {
    round_num(unpack_f64(value), f)
}

fn unpack_f64(x: f64) -> Num {
    let bits = x.to_bits();
    let neg = bits >> 63 != 0;
    let e = ((bits >> 52) & 0x7FF) as i32;
    let m = bits & ((1 << 52) - 1);
    if e == 0x7FF {
        if m == 0 {
            Num::Inf(neg)
        } else {
            Num::Nan
        }
    } else if e == 0 {
        if m == 0 {
            Num::Zero(neg)
        } else {
            Num::Fin {
                neg,
                sig: m as u128,
                exp: -1074,
            }
        }
    } else {
        Num::Fin {
            neg,
            sig: (m | (1 << 52)) as u128,
            exp: e - 1075,
        }
    }
}

/// Exact value of an encoding. Every fp32/fp16/fp8 value is an f64.
pub fn decode_fp(bits: u32, f: FpFormat) -> f64 {
    match unpack(bits, f) {
        Num::Nan => f64::NAN,
        Num::Inf(n) => {
            if n {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        }
        Num::Zero(n) => {
            if n {
                -0.0
            } else {
                0.0
            }
        }
        Num::Fin { neg, sig, exp } => {
            let v = sig as f64 * libm::exp2(exp as f64);
            if neg {
                -v
            } else {
                v
            }
        }
    }
}

pub fn fp_add(a: u32, b: u32, f: FpFormat) -> u32 {
    add_num(unpack(a, f), unpack(b, f), f)
}

pub fn fp_sub(a: u32, b: u32, f: FpFormat) -> u32 {
    add_num(unpack(a, f), unpack(b, f).negate(), f)
}

pub fn fp_mul(a: u32, b: u32, f: FpFormat) -> u32 {
    round_num(mul_exact(unpack(a, f), unpack(b, f)), f)
}

pub fn fp_fma(a: u32, b: u32, c: u32, f: FpFormat) -> u32 {
    fma_num(unpack(a, f), unpack(b, f), unpack(c, f), f)
}

/// a*b - c, one rounding.
pub fn fp_fms(a: u32, b: u32, c: u32, f: FpFormat) -> u32 {
    fma_num(unpack(a, f), unpack(b, f), unpack(c, f).negate(), f)
}

pub fn fp_div(a: u32, b: u32, f: FpFormat) -> u32 {
    match (unpack(a, f), unpack(b, f)) {
        (Num::Nan, _) | (_, Num::Nan) => f.qnan(),
        (Num::Inf(_), Num::Inf(_)) | (Num::Zero(_), Num::Zero(_)) => f.qnan(),
        (Num::Inf(x), y) => f.inf(x ^ y.neg()),
        (x, Num::Inf(y)) => f.zero(x.neg() ^ y),
        (x, Num::Zero(y)) => f.inf(x.neg() ^ y),
        (Num::Zero(x), y) => f.zero(x ^ y.neg()),
        (
            Num::Fin {
                neg: na,
                sig: sa,
                exp: ea,
            },
            Num::Fin {
                neg: nb,
                sig: sb,
                exp: eb,
            },
        ) => {
            const K: u32 = 80;
            let n = sa << K;
            round_pack(na ^ nb, n / sb, ea - eb - K as i32, !n.is_multiple_of(sb), f)
        }
    }
}

fn isqrt(n: u128) -> u128 {
    let mut rem = n;
    let mut root = 0u128;
    let mut bit = 1u128 << 126;
    while bit > rem {
        bit >>= 2;
    }
    while bit != 0 {
        if rem >= root + bit {
            rem -= root + bit;
            root = (root >> 1) + bit;
        } else {
            root >>= 1;
        }
        bit >>= 2;
    }
    root
}

pub fn fp_sqrt(a: u32, f: FpFormat) -> u32 {
    match unpack(a, f) {
        Num::Nan | Num::Inf(true) => f.qnan(),
        Num::Inf(false) => f.inf(false),
        Num::Zero(n) => f.zero(n),
        Num::Fin { neg: true, .. } => f.qnan(),
        Num::Fin { sig, exp, .. } => {
            let mut s = 110 - bit_len(sig);
            if (exp - s) % 2 != 0 {
                s += 1;
            }
            let n = sig << s as u32;
            let r = isqrt(n);
            round_pack(false, r, (exp - s) / 2, r * r != n, f)
        }
    }
}

pub fn fp_cast(bits: u32, from: FpFormat, to: FpFormat) -> u32 {
    round_num(unpack(bits, from), to)
}

/// Sign-extend a narrow pattern to 32 bits, as results sit in the integer
/// register file.
pub fn sign_extend(bits: u32, f: FpFormat) -> u32 {
    let sh = 32 - f.width();
    (((bits << sh) as i32) >> sh) as u32
}
