use super::{round_pack, unpack, FpFormat, Num};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LaneFormat {
    F32,
    F16,
    F8,
    I16,
    I8,
}

impl LaneFormat {
    pub const fn width(self) -> u32 {
        match self {
            LaneFormat::F32 => 32,
            LaneFormat::F16 | LaneFormat::I16 => 16,
            LaneFormat::F8 | LaneFormat::I8 => 8,
        }
    }

    pub const fn lanes(self) -> u32 {
        32 / self.width()
    }

    pub const fn fp(self) -> Option<FpFormat> {
        match self {
            LaneFormat::F32 => Some(FpFormat::FP32),
            LaneFormat::F16 => Some(FpFormat::FP16),
            LaneFormat::F8 => Some(FpFormat::FP8),
            _ => None,
        }
    }
}

/// 32-bit SIMD container; lane 0 sits in the least-significant bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct PackedWord(pub u32);

impl PackedWord {
    pub fn lane(self, fmt: LaneFormat, i: u32) -> u32 {
        debug_assert!(i < fmt.lanes());
        let w = fmt.width();
        if w == 32 {
            self.0
        } else {
            (self.0 >> (i * w)) & ((1 << w) - 1)
        }
    }

    pub fn with_lane(self, fmt: LaneFormat, i: u32, v: u32) -> Self {
        let w = fmt.width();
        if w == 32 {
            return PackedWord(v);
        }
        let m = ((1u32 << w) - 1) << (i * w);
        PackedWord((self.0 & !m) | ((v << (i * w)) & m))
    }

    pub fn from_lanes(fmt: LaneFormat, lanes: &[u32]) -> Self {
        debug_assert_eq!(lanes.len() as u32, fmt.lanes());
        lanes
            .iter()
            .enumerate()
            .fold(PackedWord(0), |w, (i, &v)| w.with_lane(fmt, i as u32, v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Widening {
    /// 2×fp16 products into one fp32 lane.
    F16ToF32,
    /// 4×fp8 products into two fp16 lanes (lane k takes inputs 2k, 2k+1).
    F8ToF16,
}

impl Widening {
    pub const fn formats(self) -> (LaneFormat, LaneFormat) {
        match self {
            Widening::F16ToF32 => (LaneFormat::F16, LaneFormat::F32),
            Widening::F8ToF16 => (LaneFormat::F8, LaneFormat::F16),
        }
    }
}

/// Each product is exact; each accumulation step rounds once into the
/// accumulator format, lower input lane first.
pub fn widening_dotprod(a: PackedWord, b: PackedWord, acc: PackedWord, w: Widening) -> PackedWord {
    let (inl, accl) = w.formats();
    let (inf, accf) = (inl.fp().unwrap(), accl.fp().unwrap());
    let mut out = acc;
    for k in 0..accl.lanes() {
        let mut r = acc.lane(accl, k);
        for i in [2 * k, 2 * k + 1] {
            r = super::fma_num(
                unpack(a.lane(inl, i), inf),
                unpack(b.lane(inl, i), inf),
                unpack(r, accf),
                accf,
            );
        }
        out = out.with_lane(accl, k, r);
    }
    out
}

#[derive(Clone, Copy)]
enum Term {
    Nan,
    Inf(bool),
    /// signed fixed-point value plus the sign of a zero
    Fin(i128, bool),
}

/// fp16 value in units of 2^-scale.
fn fixed(x: Num, scale: i32) -> Term {
    match x {
        Num::Nan => Term::Nan,
        Num::Inf(n) => Term::Inf(n),
        Num::Zero(n) => Term::Fin(0, n),
        Num::Fin { neg, sig, exp } => {
            let v = (sig as i128) << (exp + scale) as u32;
            Term::Fin(if neg { -v } else { v }, neg)
        }
    }
}

fn tmul(a: Term, b: Term) -> Term {
    match (a, b) {
        (Term::Nan, _) | (_, Term::Nan) => Term::Nan,
        (Term::Inf(_), Term::Fin(0, _)) | (Term::Fin(0, _), Term::Inf(_)) => Term::Nan,
        (Term::Inf(x), Term::Inf(y)) => Term::Inf(x ^ y),
        (Term::Inf(x), Term::Fin(v, n)) | (Term::Fin(v, n), Term::Inf(x)) => {
            Term::Inf(x ^ (v < 0 || (v == 0 && n)))
        }
        // 2^-24 units in, 2^-48 units out
        (Term::Fin(x, nx), Term::Fin(y, ny)) => Term::Fin(x * y, nx ^ ny),
    }
}

fn tneg(a: Term) -> Term {
    match a {
        Term::Nan => Term::Nan,
        Term::Inf(n) => Term::Inf(!n),
        Term::Fin(v, n) => Term::Fin(-v, !n),
    }
}

fn tadd(a: Term, b: Term) -> Term {
    match (a, b) {
        (Term::Nan, _) | (_, Term::Nan) => Term::Nan,
        (Term::Inf(x), Term::Inf(y)) => {
            if x == y {
                Term::Inf(x)
            } else {
                Term::Nan
            }
        }
        (Term::Inf(x), _) | (_, Term::Inf(x)) => Term::Inf(x),
        (Term::Fin(x, nx), Term::Fin(y, ny)) => {
            let s = x + y;
            let zero_neg = if x == 0 && y == 0 { nx && ny } else { false };
            Term::Fin(s, if s == 0 { zero_neg } else { s < 0 })
        }
    }
}

fn tround16(t: Term) -> u32 {
    let f = FpFormat::FP16;
    match t {
        Term::Nan => f.qnan(),
        Term::Inf(n) => f.inf(n),
        Term::Fin(0, n) => f.zero(n),
        Term::Fin(v, _) => round_pack(v < 0, v.unsigned_abs(), -48, false, f),
    }
}

/// Complex fp16 MAC: acc + a·b with exact products and inner sum, one
/// rounding per component. Lane 0 is the real part.
pub fn complex_dotprod16(a: PackedWord, b: PackedWord, acc: PackedWord) -> PackedWord {
    let l = LaneFormat::F16;
    let f = FpFormat::FP16;
    let t = |w: PackedWord, i, s| fixed(unpack(w.lane(l, i), f), s);
    let (ar, ai, br, bi) = (t(a, 0, 24), t(a, 1, 24), t(b, 0, 24), t(b, 1, 24));
    let (cr, ci) = (t(acc, 0, 48), t(acc, 1, 48));
    let re = tadd(cr, tadd(tmul(ar, br), tneg(tmul(ai, bi))));
    let im = tadd(ci, tadd(tmul(ar, bi), tmul(ai, br)));
    PackedWord::from_lanes(l, &[tround16(re), tround16(im)])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("shuffle selector {index} for output lane {lane} is out of range")]
pub struct ShuffleError {
    pub lane: u32,
    pub index: u32,
}

/// Lane permutation over the concatenation a‖b (a's lanes first). Output
/// lane k is controlled by nibble k of `mask`: bits 2:0 pick the source lane,
/// bit 3 flips its sign bit.
pub fn shuffle(
    a: PackedWord,
    b: PackedWord,
    mask: u32,
    fmt: LaneFormat,
) -> Result<PackedWord, ShuffleError> {
    let n = fmt.lanes();
    let mut out = PackedWord(0);
    for k in 0..n {
        let nib = (mask >> (4 * k)) & 0xF;
        let index = nib & 7;
        if index >= 2 * n {
            return Err(ShuffleError { lane: k, index });
        }
        let mut v = if index < n {
            a.lane(fmt, index)
        } else {
            b.lane(fmt, index - n)
        };
        if nib & 8 != 0 {
            v ^= 1 << (fmt.width() - 1);
        }
        out = out.with_lane(fmt, k, v);
    }
    Ok(out)
}
