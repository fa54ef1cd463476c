//! MMSE detection x̂ = (ĤᴴĤ + σ²I)⁻¹Ĥᴴy: the double-precision golden model,
//! bit-true host models of the five reduced-precision variants, and the
//! generator of the matching guest programs.

mod functional;
mod gen;
pub mod golden;
mod layout;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;

use crate::cluster::{Cluster, ClusterConfig, ClusterError, ClusterRunReport, RunOptions};
use crate::emu::{LatencyTable, Program};
use crate::lowprec::{decode_fp, encode_fp, FpFormat};

pub use functional::functional_mmse;
pub use gen::{generate_kernel, KernelError, KernelImage};
pub use golden::golden_mmse;
pub use layout::{
    extract_results, load_problems, CapacityError, LayoutDescriptor, ProblemResult, CANARY,
};

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionProblem {
    pub n_tx: usize,
    pub n_rx: usize,
    /// Row-major n_rx × n_tx.
    pub h: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub sigma2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("non-positive Cholesky pivot at index {index}")]
pub struct NonPositiveDiagonal {
    pub index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Variant {
    Double64,
    Half16,
    WDotp16,
    CDotp16,
    Quarter8,
    WDotp8,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Double64,
        Variant::Half16,
        Variant::WDotp16,
        Variant::CDotp16,
        Variant::Quarter8,
        Variant::WDotp8,
    ];

    /// The variants that exist as guest programs.
    pub const EMULATED: [Variant; 5] = [
        Variant::Half16,
        Variant::WDotp16,
        Variant::CDotp16,
        Variant::Quarter8,
        Variant::WDotp8,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            Variant::Double64 => "double64",
            Variant::Half16 => "half16",
            Variant::WDotp16 => "wdotp16",
            Variant::CDotp16 => "cdotp16",
            Variant::Quarter8 => "quarter8",
            Variant::WDotp8 => "wdotp8",
        }
    }

    /// Format Ĥ, y and σ² are stored in. Values after the Gram phase are fp16.
    pub const fn storage(self) -> FpFormat {
        match self {
            Variant::Quarter8 | Variant::WDotp8 => FpFormat::FP8,
            _ => FpFormat::FP16,
        }
    }

    /// Bytes per stored complex input element.
    pub const fn element_bytes(self) -> u32 {
        2 * self.storage().width() / 8
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown variant `{0}` (expected one of double64, half16, wdotp16, cdotp16, quarter8, wdotp8)")]
pub struct UnknownVariant(pub alloc::string::String);

impl FromStr for Variant {
    type Err = UnknownVariant;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownVariant(s.into()))
    }
}

/// A problem rounded (RNE) to a variant's storage format. Complex elements
/// are packed real part first: `re | im << w` for element width w.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedProblem {
    pub variant: Variant,
    pub n_tx: usize,
    pub n_rx: usize,
    pub h: Vec<u32>,
    pub y: Vec<u32>,
    /// In the storage format.
    pub sigma2: u32,
}

pub fn pack_complex(z: Complex64, f: FpFormat) -> u32 {
    encode_fp(z.re, f) | (encode_fp(z.im, f) << f.width())
}

pub fn unpack_complex(w: u32, f: FpFormat) -> Complex64 {
    Complex64::new(decode_fp(w & f.mask(), f), decode_fp((w >> f.width()) & f.mask(), f))
}

impl QuantizedProblem {
    pub fn new(p: &DetectionProblem, variant: Variant) -> Self {
        let f = variant.storage();
        QuantizedProblem {
            variant,
            n_tx: p.n_tx,
            n_rx: p.n_rx,
            h: p.h.iter().map(|&z| pack_complex(z, f)).collect(),
            y: p.y.iter().map(|&z| pack_complex(z, f)).collect(),
            sigma2: encode_fp(p.sigma2, f),
        }
    }

    /// The values the quantized problem actually holds.
    pub fn dequantize(&self) -> DetectionProblem {
        let f = self.variant.storage();
        DetectionProblem {
            n_tx: self.n_tx,
            n_rx: self.n_rx,
            h: self.h.iter().map(|&w| unpack_complex(w, f)).collect(),
            y: self.y.iter().map(|&w| unpack_complex(w, f)).collect(),
            sigma2: decode_fp(self.sigma2, f),
        }
    }
}

/// Results and timing of one emulated kernel run.
pub struct KernelRun {
    pub results: Vec<ProblemResult>,
    pub report: ClusterRunReport,
}

/// Load `problems` into a fresh cluster, run `k` to completion and read the
/// results back. `problems` must hold `n_harts × batch` entries, hart-major.
pub fn run_kernel(
    k: &KernelImage,
    problems: &[QuantizedProblem],
    cfg: &ClusterConfig,
    table: &LatencyTable,
    opts: RunOptions,
) -> Result<KernelRun, ClusterError> {
    let mut c = Cluster::new(*cfg, k.layout.n_harts)?;
    c.load(&k.image)?;
    load_problems(&c.mem, &k.layout, problems).map_err(ClusterError::Load)?;
    let prog = Program::new(&k.image, table);
    let report = c.run(&prog, table, opts)?;
    let results = extract_results(&c.mem, &k.layout).map_err(ClusterError::Load)?;
    Ok(KernelRun { results, report })
}

/// Decoded fp16 complex output words.
pub fn decode_xhat(words: &[u32]) -> Vec<Complex64> {
    words
        .iter()
        .map(|&w| unpack_complex(w, FpFormat::FP16))
        .collect()
}
