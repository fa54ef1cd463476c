//! Transmission side: seeded bits, Gray-coded square QAM, AWGN and flat
//! Rayleigh MIMO channels, hard-decision demapping.
//!
//! Randomness comes from ChaCha12 (`rand_chacha`), seeded through
//! `SeedableRng::seed_from_u64`; Gaussian samples use the Box-Muller
//! transform on 53-bit uniforms.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// `count` bits, least-significant bit of each 64-bit draw first.
pub fn random_bits(seed: u64, count: usize) -> Vec<u8> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let w = r.next_u64();
        let take = (count - out.len()).min(64);
        out.extend((0..take).map(|i| ((w >> i) & 1) as u8));
    }
    out
}

/// Uniform in (0, 1].
fn open_unit(r: &mut impl RngCore) -> f64 {
    ((r.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Pairs of independent standard normals.
pub struct Gaussian<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> Gaussian<R> {
    pub fn new(rng: R) -> Self {
        Gaussian { rng, spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        let u1 = open_unit(&mut self.rng);
        let u2 = open_unit(&mut self.rng);
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let t = 2.0 * PI * u2;
        self.spare = Some(r * libm::sin(t));
        r * libm::cos(t)
    }

    /// Circular complex Gaussian with total variance `var`.
    pub fn complex(&mut self, var: f64) -> Complex64 {
        let s = libm::sqrt(var / 2.0);
        Complex64::new(s * self.sample(), s * self.sample())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Modulation {
    Qam16,
    Qam64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PhyError {
    #[error("{len} bits is not a multiple of {per_symbol} bits per symbol")]
    Length { len: usize, per_symbol: usize },
}

fn gray_decode(mut g: u32) -> u32 {
    let mut b = g;
    while g > 1 {
        g >>= 1;
        b ^= g;
    }
    b
}

impl Modulation {
    pub const fn order(self) -> u32 {
        match self {
            Modulation::Qam16 => 16,
            Modulation::Qam64 => 64,
        }
    }

    pub const fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    /// Levels per axis.
    const fn side(self) -> u32 {
        match self {
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 8,
        }
    }

    /// 1/√(2(M−1)/3): unit average energy.
    pub fn scale(self) -> f64 {
        1.0 / libm::sqrt(2.0 * (self.order() as f64 - 1.0) / 3.0)
    }

    /// Amplitude of a per-axis Gray label.
    fn level(self, label: u32) -> f64 {
        let idx = gray_decode(label);
        (2 * idx) as f64 - (self.side() - 1) as f64
    }

    /// Point for a full label: the high half of the bits drives I.
    pub fn point(self, label: u32) -> Complex64 {
        let m = self.bits_per_symbol() as u32 / 2;
        let s = self.scale();
        Complex64::new(
            self.level(label >> m) * s,
            self.level(label & ((1 << m) - 1)) * s,
        )
    }

    /// (label, point) for every constellation point, by label.
    pub fn constellation(self) -> Vec<(u32, Complex64)> {
        (0..self.order()).map(|l| (l, self.point(l))).collect()
    }

    pub fn modulate(self, bits: &[u8]) -> Result<Vec<Complex64>, PhyError> {
        let k = self.bits_per_symbol();
        if !bits.len().is_multiple_of(k) {
            return Err(PhyError::Length {
                len: bits.len(),
                per_symbol: k,
            });
        }
        Ok(bits
            .chunks(k)
            .map(|c| self.point(c.iter().fold(0, |a, &b| (a << 1) | (b & 1) as u32)))
            .collect())
    }

    /// Per-axis label nearest to `v`. Decision boundaries sit at the
    /// midpoints of adjacent levels; a value exactly on one goes to the
    /// smaller label.
    fn slice(self, v: f64) -> u32 {
        let s = self.scale();
        let side = self.side();
        // labels ordered by amplitude
        let by_amp: Vec<u32> = (0..side).map(|i| i ^ (i >> 1)).collect();
        let mut best = 0;
        for i in 0..side - 1 {
            let lo = self.level(by_amp[i as usize]) * s;
            let hi = self.level(by_amp[i as usize + 1]) * s;
            let mid = (lo + hi) / 2.0;
            if v > mid || (v == mid && by_amp[i as usize + 1] < by_amp[i as usize]) {
                best = i + 1;
            } else {
                break;
            }
        }
        by_amp[best as usize]
    }

    /// Hard decision. Returns the bits and whether any symbol was erased
    /// (non-finite input, decided as the all-zero label).
    pub fn demodulate(self, x: &[Complex64]) -> (Vec<u8>, usize) {
        let k = self.bits_per_symbol();
        let m = k as u32 / 2;
        let mut bits = Vec::with_capacity(x.len() * k);
        let mut erasures = 0;
        for z in x {
            let label = if z.re.is_finite() && z.im.is_finite() {
                (self.slice(z.re) << m) | self.slice(z.im)
            } else {
                erasures += 1;
                0
            };
            bits.extend((0..k).rev().map(|i| ((label >> i) & 1) as u8));
        }
        (bits, erasures)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ChannelKind {
    #[cfg_attr(feature = "serde", serde(rename = "awgn"))]
    AwgnIdentity,
    #[cfg_attr(feature = "serde", serde(rename = "rayleigh"))]
    FlatRayleigh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SnrConvention {
    /// Symbol energy over noise density at each receive antenna.
    #[default]
    EsN0,
    /// Bit energy over noise density at each receive antenna.
    EbN0,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    pub n_tx: usize,
    pub n_rx: usize,
    /// `f64::INFINITY` switches the noise off.
    pub snr_db: f64,
    pub convention: SnrConvention,
}

/// Complex noise variance for unit-energy symbols.
pub fn noise_variance(snr_db: f64, convention: SnrConvention, m: Modulation) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    let es_n0 = libm::pow(10.0, snr_db / 10.0);
    match convention {
        SnrConvention::EsN0 => 1.0 / es_n0,
        SnrConvention::EbN0 => 1.0 / (es_n0 * m.bits_per_symbol() as f64),
    }
}

pub struct ChannelOutput {
    /// Row-major n_rx × n_tx.
    pub h: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub sigma2: f64,
}

/// y = Hx + n with perfect channel knowledge handed back.
pub fn apply_channel(x: &[Complex64], ch: &ChannelModel, sigma2: f64, seed: u64) -> ChannelOutput {
    assert_eq!(x.len(), ch.n_tx);
    let mut g = Gaussian::new(rng(seed));
    let (nt, nr) = (ch.n_tx, ch.n_rx);
    let h: Vec<Complex64> = match ch.kind {
        ChannelKind::AwgnIdentity => (0..nr * nt)
            .map(|k| {
                if k / nt == k % nt {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect(),
        ChannelKind::FlatRayleigh => (0..nr * nt).map(|_| g.complex(1.0)).collect(),
    };
    let y = (0..nr)
        .map(|r| {
            let s: Complex64 = (0..nt).map(|c| h[r * nt + c] * x[c]).sum();
            if sigma2 > 0.0 {
                s + g.complex(sigma2)
            } else {
                s
            }
        })
        .collect();
    ChannelOutput { h, y, sigma2 }
}
