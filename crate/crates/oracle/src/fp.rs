//! Enumeration oracle for the 8- and 16-bit floating point formats.
//!
//! Every finite value is held as an integer count of the format's smallest
//! subnormal. Rounding is done by binary search over the sorted table of all
//! non-negative finite encodings and an exact comparison against the midpoint
//! of the two neighbours, ties going to the even encoding.

use std::cmp::Ordering;
use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Small {
    /// 1/5/2, bias 15.
    Fp8,
    /// IEEE binary16.
    Fp16,
}

impl Small {
    pub const fn exp_bits(self) -> u32 {
        5
    }
    pub const fn mant_bits(self) -> u32 {
        match self {
            Small::Fp8 => 2,
            Small::Fp16 => 10,
        }
    }
    pub const fn bias(self) -> i32 {
        15
    }
    pub const fn width(self) -> u32 {
        1 + self.exp_bits() + self.mant_bits()
    }
    /// Values are counted in units of 2^-scale.
    pub const fn scale(self) -> u32 {
        (self.bias() - 1) as u32 + self.mant_bits()
    }
    pub const fn sign_bit(self) -> u32 {
        1 << (self.width() - 1)
    }
    pub const fn max_finite_code(self) -> u32 {
        (((1 << self.exp_bits()) - 1) << self.mant_bits()) - 1
    }
    pub const fn inf_code(self) -> u32 {
        self.max_finite_code() + 1
    }
    pub const fn qnan(self) -> u32 {
        self.inf_code() | (1 << (self.mant_bits() - 1))
    }
    pub const fn codes(self) -> u32 {
        1 << self.width()
    }

    fn table(self) -> &'static [i128] {
        static FP8: OnceLock<Vec<i128>> = OnceLock::new();
        static FP16: OnceLock<Vec<i128>> = OnceLock::new();
        let cell = match self {
            Small::Fp8 => &FP8,
            Small::Fp16 => &FP16,
        };
        cell.get_or_init(|| {
            (0..=self.max_finite_code())
                .map(|c| code_units(self, c))
                .collect()
        })
    }
}

fn code_units(f: Small, code: u32) -> i128 {
    let m = f.mant_bits();
    let e = code >> m;
    let frac = (code & ((1 << m) - 1)) as i128;
    if e == 0 {
        frac
    } else {
        (frac | (1 << m)) << (e - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Val {
    Nan,
    Inf(bool),
    /// (negative, magnitude in units of 2^-scale)
    Fin(bool, i128),
}

pub fn decode(bits: u32, f: Small) -> Val {
    let neg = bits & f.sign_bit() != 0;
    let mag = bits & (f.sign_bit() - 1);
    if mag > f.inf_code() {
        Val::Nan
    } else if mag == f.inf_code() {
        Val::Inf(neg)
    } else {
        Val::Fin(neg, code_units(f, mag))
    }
}

/// Exact value of an encoding as f64 (every 8/16-bit value is an f64).
pub fn to_f64(bits: u32, f: Small) -> f64 {
    match decode(bits, f) {
        Val::Nan => f64::NAN,
        Val::Inf(n) => {
            if n {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        }
        Val::Fin(n, u) => {
            let v = u as f64 * (2.0f64).powi(-(f.scale() as i32));
            if n {
                -v
            } else {
                v
            }
        }
    }
}

/// A positive exact quantity.
#[derive(Clone, Copy, Debug)]
enum Exact {
    /// n / 2^s
    Dyadic { n: i128, s: u32 },
    /// n / d
    Ratio { n: i128, d: i128 },
    /// sqrt(n / 2^s)
    Sqrt { n: i128, s: u32 },
}

fn shl(x: i128, k: u32) -> i128 {
    assert!(
        x == 0 || (x.leading_zeros() > k + 1),
        "oracle overflow shifting {x} by {k}"
    );
    x << k
}

fn mul(a: i128, b: i128) -> i128 {
    a.checked_mul(b).expect("oracle overflow in multiply")
}

/// Compare x against v / 2^t.
fn cmp_exact(x: Exact, v: i128, t: u32) -> Ordering {
    match x {
        Exact::Dyadic { n, s } => {
            if s >= t {
                n.cmp(&shl(v, s - t))
            } else {
                shl(n, t - s).cmp(&v)
            }
        }
        Exact::Ratio { n, d } => shl(n, t).cmp(&mul(v, d)),
        Exact::Sqrt { n, s } => shl(n, 2 * t).cmp(&shl(mul(v, v), s)),
    }
}

fn zero(neg: bool, f: Small) -> u32 {
    if neg {
        f.sign_bit()
    } else {
        0
    }
}

fn inf(neg: bool, f: Small) -> u32 {
    f.inf_code() | zero(neg, f)
}

fn round(x: Exact, neg: bool, f: Small) -> u32 {
    let table = f.table();
    let scale = f.scale();
    // largest i with table[i] <= x
    let (mut lo, mut hi) = (0usize, table.len());
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if cmp_exact(x, table[mid], scale) == Ordering::Less {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let code = if cmp_exact(x, table[lo], scale) == Ordering::Equal {
        lo as u32
    } else {
        let next = if lo + 1 < table.len() {
            table[lo + 1]
        } else {
            // 2^(emax+1): where the next binade would start
            1i128 << ((1 << f.exp_bits()) - 1 - f.bias() + scale as i32) as u32
        };
        match cmp_exact(x, table[lo] + next, scale + 1) {
            Ordering::Less => lo as u32,
            Ordering::Greater => lo as u32 + 1,
            Ordering::Equal => {
                if lo % 2 == 0 {
                    lo as u32
                } else {
                    lo as u32 + 1
                }
            }
        }
    };
    code | zero(neg, f)
}

fn signed(v: Val) -> i128 {
    match v {
        Val::Fin(n, u) => {
            if n {
                -u
            } else {
                u
            }
        }
        _ => unreachable!(),
    }
}

pub fn neg(bits: u32, f: Small) -> u32 {
    bits ^ f.sign_bit()
}

pub fn add(a: u32, b: u32, f: Small) -> u32 {
    match (decode(a, f), decode(b, f)) {
        (Val::Nan, _) | (_, Val::Nan) => f.qnan(),
        (Val::Inf(x), Val::Inf(y)) => {
            if x == y {
                inf(x, f)
            } else {
                f.qnan()
            }
        }
        (Val::Inf(x), _) | (_, Val::Inf(x)) => inf(x, f),
        (va @ Val::Fin(sa, ua), vb @ Val::Fin(sb, ub)) => {
            let n = signed(va) + signed(vb);
            if n == 0 {
                if ua == 0 && ub == 0 {
                    zero(sa && sb, f)
                } else {
                    zero(false, f)
                }
            } else {
                round(
                    Exact::Dyadic {
                        n: n.abs(),
                        s: f.scale(),
                    },
                    n < 0,
                    f,
                )
            }
        }
    }
}

pub fn sub(a: u32, b: u32, f: Small) -> u32 {
    add(a, neg(b, f), f)
}

pub fn mul_(a: u32, b: u32, f: Small) -> u32 {
    match (decode(a, f), decode(b, f)) {
        (Val::Nan, _) | (_, Val::Nan) => f.qnan(),
        (Val::Inf(_), Val::Fin(_, 0)) | (Val::Fin(_, 0), Val::Inf(_)) => f.qnan(),
        (Val::Inf(x), Val::Inf(y))
        | (Val::Inf(x), Val::Fin(y, _))
        | (Val::Fin(x, _), Val::Inf(y)) => inf(x ^ y, f),
        (Val::Fin(x, ua), Val::Fin(y, ub)) => {
            let n = mul(ua, ub);
            if n == 0 {
                zero(x ^ y, f)
            } else {
                round(
                    Exact::Dyadic {
                        n,
                        s: 2 * f.scale(),
                    },
                    x ^ y,
                    f,
                )
            }
        }
    }
}

/// a*b + c with one rounding.
pub fn fma(a: u32, b: u32, c: u32, f: Small) -> u32 {
    let (va, vb, vc) = (decode(a, f), decode(b, f), decode(c, f));
    if matches!(va, Val::Nan) || matches!(vb, Val::Nan) || matches!(vc, Val::Nan) {
        return f.qnan();
    }
    let prod_inf = match (va, vb) {
        (Val::Inf(_), Val::Fin(_, 0)) | (Val::Fin(_, 0), Val::Inf(_)) => return f.qnan(),
        (Val::Inf(x), Val::Inf(y))
        | (Val::Inf(x), Val::Fin(y, _))
        | (Val::Fin(x, _), Val::Inf(y)) => Some(x ^ y),
        _ => None,
    };
    match (prod_inf, vc) {
        (Some(p), Val::Inf(q)) => {
            return if p == q { inf(p, f) } else { f.qnan() };
        }
        (Some(p), _) => return inf(p, f),
        (None, Val::Inf(q)) => return inf(q, f),
        _ => {}
    }
    let (Val::Fin(sa, ua), Val::Fin(sb, ub), Val::Fin(sc, uc)) = (va, vb, vc) else {
        unreachable!()
    };
    let p = mul(ua, ub);
    let sp = sa ^ sb;
    let p_signed = if sp { -p } else { p };
    let c_signed = shl(uc, f.scale());
    let n = p_signed + if sc { -c_signed } else { c_signed };
    if n == 0 {
        if p == 0 && uc == 0 {
            zero(sp && sc, f)
        } else {
            zero(false, f)
        }
    } else {
        round(
            Exact::Dyadic {
                n: n.abs(),
                s: 2 * f.scale(),
            },
            n < 0,
            f,
        )
    }
}

/// a*b - c with one rounding.
pub fn fms(a: u32, b: u32, c: u32, f: Small) -> u32 {
    fma(a, b, neg(c, f), f)
}

pub fn div(a: u32, b: u32, f: Small) -> u32 {
    match (decode(a, f), decode(b, f)) {
        (Val::Nan, _) | (_, Val::Nan) => f.qnan(),
        (Val::Inf(_), Val::Inf(_)) => f.qnan(),
        (Val::Inf(x), Val::Fin(y, _)) => inf(x ^ y, f),
        (Val::Fin(x, _), Val::Inf(y)) => zero(x ^ y, f),
        (Val::Fin(_, 0), Val::Fin(_, 0)) => f.qnan(),
        (Val::Fin(x, _), Val::Fin(y, 0)) => inf(x ^ y, f),
        (Val::Fin(x, 0), Val::Fin(y, _)) => zero(x ^ y, f),
        (Val::Fin(x, ua), Val::Fin(y, ub)) => round(Exact::Ratio { n: ua, d: ub }, x ^ y, f),
    }
}

pub fn sqrt(a: u32, f: Small) -> u32 {
    match decode(a, f) {
        Val::Nan | Val::Inf(true) => f.qnan(),
        Val::Inf(false) => inf(false, f),
        Val::Fin(n, 0) => zero(n, f),
        Val::Fin(true, _) => f.qnan(),
        Val::Fin(false, u) => round(Exact::Sqrt { n: u, s: f.scale() }, false, f),
    }
}

/// Conversion between the two small formats.
pub fn cast(bits: u32, from: Small, to: Small) -> u32 {
    match decode(bits, from) {
        Val::Nan => to.qnan(),
        Val::Inf(n) => inf(n, to),
        Val::Fin(n, 0) => zero(n, to),
        Val::Fin(n, u) => round(
            Exact::Dyadic {
                n: u,
                s: from.scale(),
            },
            n,
            to,
        ),
    }
}

/// Small format to fp32 bits. Exact, so the host conversion is the oracle.
pub fn to_f32_bits(bits: u32, f: Small) -> u32 {
    let v = to_f64(bits, f);
    if v.is_nan() {
        0x7FC0_0000
    } else {
        (v as f32).to_bits()
    }
}

/// fp32 bits to a small format.
pub fn from_f32_bits(bits: u32, f: Small) -> u32 {
    let x = f32::from_bits(bits);
    let neg = bits >> 31 != 0;
    if x.is_nan() {
        return f.qnan();
    }
    if x.is_infinite() {
        return inf(neg, f);
    }
    let ax = x.abs() as f64;
    // at or below half the smallest subnormal: rounds to zero (the tie is even)
    if ax <= (2.0f64).powi(-(f.scale() as i32) - 1) {
        return zero(neg, f);
    }
    let max = to_f64(f.max_finite_code(), f);
    if ax >= 2.0 * max {
        return inf(neg, f);
    }
    let mag = bits & 0x7FFF_FFFF;
    let e_field = (mag >> 23) as i32;
    let (m, e) = if e_field == 0 {
        ((mag & 0x7F_FFFF) as i128, -149)
    } else {
        (((mag & 0x7F_FFFF) | 0x80_0000) as i128, e_field - 150)
    };
    let x = if e >= 0 {
        Exact::Dyadic {
            n: shl(m, e as u32),
            s: 0,
        }
    } else {
        Exact::Dyadic { n: m, s: (-e) as u32 }
    };
    round(x, neg, f)
}

/// Widening dot product of two fp8 lanes into one fp16 accumulator lane,
/// rounding after each addition.
pub fn wdotp8_lane(a: [u32; 2], b: [u32; 2], acc: u32) -> u32 {
    let mut r = acc;
    for i in 0..2 {
        r = fma_mixed8(a[i], b[i], r);
    }
    r
}

/// acc(fp16) + a(fp8)*b(fp8), product exact, one rounding to fp16.
fn fma_mixed8(a: u32, b: u32, acc: u32) -> u32 {
    let (f8, f16) = (Small::Fp8, Small::Fp16);
    let (va, vb, vc) = (decode(a, f8), decode(b, f8), decode(acc, f16));
    if matches!(va, Val::Nan) || matches!(vb, Val::Nan) || matches!(vc, Val::Nan) {
        return f16.qnan();
    }
    let prod_inf = match (va, vb) {
        (Val::Inf(_), Val::Fin(_, 0)) | (Val::Fin(_, 0), Val::Inf(_)) => return f16.qnan(),
        (Val::Inf(x), Val::Inf(y))
        | (Val::Inf(x), Val::Fin(y, _))
        | (Val::Fin(x, _), Val::Inf(y)) => Some(x ^ y),
        _ => None,
    };
    match (prod_inf, vc) {
        (Some(p), Val::Inf(q)) => return if p == q { inf(p, f16) } else { f16.qnan() },
        (Some(p), _) => return inf(p, f16),
        (None, Val::Inf(q)) => return inf(q, f16),
        _ => {}
    }
    let (Val::Fin(sa, ua), Val::Fin(sb, ub), Val::Fin(sc, uc)) = (va, vb, vc) else {
        unreachable!()
    };
    // product in units of 2^-32, accumulator in units of 2^-24
    let p = mul(ua, ub);
    let sp = sa ^ sb;
    let c = shl(uc, 8);
    let n = (if sp { -p } else { p }) + (if sc { -c } else { c });
    if n == 0 {
        if p == 0 && uc == 0 {
            zero(sp && sc, f16)
        } else {
            zero(false, f16)
        }
    } else {
        round(Exact::Dyadic { n: n.abs(), s: 32 }, n < 0, f16)
    }
}

/// One fp32 accumulator step of the fp16 widening dot product: the product of
/// two fp16 values is exact in fp32, so host fp32 addition rounds correctly.
pub fn wdotp16(a: [u32; 2], b: [u32; 2], acc: u32) -> u32 {
    let mut r = f32::from_bits(acc);
    for i in 0..2 {
        let p = (to_f64(a[i], Small::Fp16) * to_f64(b[i], Small::Fp16)) as f32;
        r += p;
    }
    if r.is_nan() {
        0x7FC0_0000
    } else {
        r.to_bits()
    }
}

/// Complex fp16 multiply-accumulate with exact products and inner sums and one
/// rounding per component. Returns (re, im).
pub fn cdotp16(a: [u32; 2], b: [u32; 2], acc: [u32; 2]) -> [u32; 2] {
    let f = Small::Fp16;
    let vals = [a[0], a[1], b[0], b[1], acc[0], acc[1]].map(|x| decode(x, f));
    let mut out = [0u32; 2];
    for k in 0..2 {
        let special = vals[..4]
            .iter()
            .chain(std::iter::once(&vals[4 + k]))
            .any(|v| !matches!(v, Val::Fin(..)));
        out[k] = if special {
            cdotp_special(&vals, k)
        } else {
            cdotp_exact(&vals, k)
        };
    }
    out
}

// With a NaN or inf among the inputs the result is NaN or inf; f64 gets
// that right since finite fp16 products cannot overflow it.
fn cdotp_special(vals: &[Val; 6], k: usize) -> u32 {
    let [ar, ai, br, bi, cr, ci] = vals.map(|v| match v {
        Val::Nan => f64::NAN,
        Val::Inf(n) => {
            if n {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        }
        Val::Fin(n, u) => {
            let x = u as f64 * (2.0f64).powi(-24);
            if n {
                -x
            } else {
                x
            }
        }
    });
    let x = if k == 0 {
        cr + (ar * br - ai * bi)
    } else {
        ci + (ar * bi + ai * br)
    };
    let f = Small::Fp16;
    if x.is_nan() {
        f.qnan()
    } else {
        assert!(x.is_infinite());
        inf(x < 0.0, f)
    }
}

fn cdotp_exact(vals: &[Val; 6], k: usize) -> u32 {
    let f = Small::Fp16;
    let (ar, ai, br, bi) = (
        signed(vals[0]),
        signed(vals[1]),
        signed(vals[2]),
        signed(vals[3]),
    );
    // products in units of 2^-48; the second one enters negated for re
    let (p, q, p_neg, q_neg) = if k == 0 {
        (
            mul(ar, br),
            -mul(ai, bi),
            sign_of_product(vals[0], vals[2]),
            !sign_of_product(vals[1], vals[3]),
        )
    } else {
        (
            mul(ar, bi),
            mul(ai, br),
            sign_of_product(vals[0], vals[3]),
            sign_of_product(vals[1], vals[2]),
        )
    };
    let inner = p + q;
    let Val::Fin(sc, uc) = vals[4 + k] else {
        unreachable!()
    };
    let cu = shl(uc, 24);
    let n = inner + if sc { -cu } else { cu };
    if n == 0 {
        if inner == 0 && uc == 0 {
            let inner_neg = p == 0 && q == 0 && p_neg && q_neg;
            zero(inner_neg && sc, f)
        } else {
            zero(false, f)
        }
    } else {
        round(Exact::Dyadic { n: n.abs(), s: 48 }, n < 0, f)
    }
}

fn sign_of_product(a: Val, b: Val) -> bool {
    match (a, b) {
        (Val::Fin(x, _), Val::Fin(y, _)) => x ^ y,
        _ => false,
    }
}

/// Encode a real (given as f64) by nearest-even over the value table.
pub fn encode_f64(x: f64, f: Small) -> u32 {
    if x.is_nan() {
        return f.qnan();
    }
    let neg = x.is_sign_negative();
    if x.is_infinite() {
        return inf(neg, f);
    }
    if x == 0.0 {
        return zero(neg, f);
    }
    let ax = x.abs();
    let bits = ax.to_bits();
    let e_field = (bits >> 52) as i32;
    let (m, e) = if e_field == 0 {
        ((bits & ((1 << 52) - 1)) as i128, -1074)
    } else {
        (((bits & ((1 << 52) - 1)) | (1 << 52)) as i128, e_field - 1075)
    };
    if ax <= (2.0f64).powi(-(f.scale() as i32) - 1) {
        return zero(neg, f);
    }
    if ax >= 2.0 * to_f64(f.max_finite_code(), f) {
        return inf(neg, f);
    }
    let x = if e >= 0 {
        Exact::Dyadic {
            n: shl(m, e as u32),
            s: 0,
        }
    } else {
        Exact::Dyadic { n: m, s: (-e) as u32 }
    };
    round(x, neg, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fp16_one_and_limits() {
        assert_eq!(encode_f64(1.0, Small::Fp16), 0x3C00);
        assert_eq!(to_f64(0x7BFF, Small::Fp16), 65504.0);
        assert_eq!(to_f64(0x0001, Small::Fp16), (2.0f64).powi(-24));
    }

    #[test]
    fn fp8_table_agrees_with_fp16_prefix() {
        for c in 0..256u32 {
            let v8 = to_f64(c, Small::Fp8);
            let v16 = to_f64(c << 8, Small::Fp16);
            assert!(v8 == v16 || (v8.is_nan() && v16.is_nan()));
        }
    }

    #[test]
    fn nine_rounds_to_eight_in_fp8() {
        let three = encode_f64(3.0, Small::Fp8);
        assert_eq!(mul_(three, three, Small::Fp8), encode_f64(8.0, Small::Fp8));
    }

    #[test]
    fn fp16_host_f32_sanity() {
        for x in [0.1f32, 65519.0, 65520.0, 1e-8, 3.0e-8, -2.5] {
            let via_oracle = from_f32_bits(x.to_bits(), Small::Fp16);
            let via_f64 = encode_f64(x as f64, Small::Fp16);
            assert_eq!(via_oracle, via_f64, "{x}");
        }
        assert_eq!(from_f32_bits(65520.0f32.to_bits(), Small::Fp16), 0x7C00);
        assert_eq!(from_f32_bits(65519.0f32.to_bits(), Small::Fp16), 0x7BFF);
    }
}
