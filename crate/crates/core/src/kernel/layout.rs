//! Where every problem field and intermediate lives in cluster memory.
//!
//! Each hart owns a slot in its own tile: `batch` problem records followed
//! by one scratch area reused by every problem of the batch.
//!
//! ```text
//! record:  y | σ² (4 B) | x̂ | Ĥ | status (4 B)
//! scratch: Hc | Hb or conj(y) | G | z | La | Mb | Pt | d | NU | u | XB
//! ```
//! The status word is 0 after a successful solve and `i + 1` when the
//! Cholesky pivot `i` was not positive.

use alloc::vec::Vec;

use super::{NonPositiveDiagonal, QuantizedProblem, Variant};
use crate::cluster::{ClusterConfig, ClusterMemory};
use crate::emu::MemFault;

/// Pattern written over x̂ and the status word before a run.
pub const CANARY: u32 = 0xDEAD_BEEF;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("kernel needs {required} bytes per hart, only {available} available")]
pub struct CapacityError {
    pub required: u32,
    pub available: u32,
}

fn align4(x: u32) -> u32 {
    (x + 3) & !3
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayoutDescriptor {
    pub variant: Variant,
    pub n_tx: u32,
    pub n_rx: u32,
    pub batch: u32,
    pub n_harts: u32,
    pub cores_per_tile: u32,
    pub l1_bytes_per_tile: u32,
    /// Bytes per hart slot.
    pub share: u32,
    pub record_bytes: u32,
    /// Field offsets inside a record.
    pub y: u32,
    pub sigma2: u32,
    pub xhat: u32,
    pub h: u32,
    pub status: u32,
    /// Offsets inside the scratch area, which starts at `batch * record_bytes`.
    pub hc: u32,
    pub hb: u32,
    /// conj(y), wdotp variants only.
    pub yb: u32,
    pub g: u32,
    pub z: u32,
    pub la: u32,
    pub mb: u32,
    pub pt: u32,
    pub d: u32,
    pub nu: u32,
    pub u: u32,
    pub xb: u32,
    pub scratch_bytes: u32,
    /// Bytes per Gram-phase row (Hc, Hb, conj(y)).
    pub row_bytes: u32,
}

impl LayoutDescriptor {
    pub fn new(
        variant: Variant,
        n_tx: u32,
        n_rx: u32,
        batch: u32,
        n_harts: u32,
        cfg: &ClusterConfig,
    ) -> Result<Self, CapacityError> {
        let eb = variant.element_bytes();
        let y = 0;
        let sigma2 = align4(n_rx * eb);
        let xhat = sigma2 + 4;
        let h = xhat + 4 * n_tx;
        let status = align4(h + n_rx * n_tx * eb);
        let record_bytes = status + 4;

        // wdotp.b rows carry an even number of elements
        let row_elems = if variant == Variant::WDotp8 {
            n_rx.next_multiple_of(2)
        } else {
            n_rx
        };
        let row_bytes = align4(row_elems * eb);
        let mat = 4 * n_tx * n_tx;
        let vec = 4 * n_tx;
        let mut at = 0;
        let mut take = |n: u32| {
            let o = at;
            at += n;
            o
        };
        let hc = take(n_tx * row_bytes);
        // the wdotp variants read both Gram operands from Hc and need conj(y)
        let aliased = matches!(variant, Variant::WDotp16 | Variant::WDotp8);
        let hb = if aliased { hc } else { take(n_tx * row_bytes) };
        let yb = if aliased { take(row_bytes) } else { 0 };
        let g = take(mat);
        let z = take(vec);
        let la = take(mat);
        let mb = take(mat);
        let pt = take(mat);
        let d = take(vec);
        let nu = take(vec);
        let u = take(vec);
        let xb = take(vec);
        let scratch_bytes = at;

        let active = n_harts.min(cfg.cores_per_tile).max(1);
        let share = (cfg.l1_bytes_per_tile / active) & !3;
        let required = batch
            .checked_mul(record_bytes)
            .and_then(|r| r.checked_add(scratch_bytes))
            .unwrap_or(u32::MAX);
        let tiles = cfg.tiles();
        if required > share || n_harts > tiles * cfg.cores_per_tile {
            return Err(CapacityError {
                required,
                available: if n_harts > tiles * cfg.cores_per_tile { 0 } else { share },
            });
        }
        Ok(LayoutDescriptor {
            variant,
            n_tx,
            n_rx,
            batch,
            n_harts,
            cores_per_tile: cfg.cores_per_tile,
            l1_bytes_per_tile: cfg.l1_bytes_per_tile,
            share,
            record_bytes,
            y,
            sigma2,
            xhat,
            h,
            status,
            hc,
            hb,
            yb,
            g,
            z,
            la,
            mb,
            pt,
            d,
            nu,
            u,
            xb,
            scratch_bytes,
            row_bytes,
        })
    }

    pub fn slot_base(&self, hart: u32) -> u32 {
        crate::map::L1_BASE
            + (hart / self.cores_per_tile) * self.l1_bytes_per_tile
            + (hart % self.cores_per_tile) * self.share
    }

    pub fn record_base(&self, hart: u32, index: u32) -> u32 {
        self.slot_base(hart) + index * self.record_bytes
    }

    pub fn scratch_base(&self, hart: u32) -> u32 {
        self.slot_base(hart) + self.batch * self.record_bytes
    }

    pub fn problems(&self) -> usize {
        (self.n_harts * self.batch) as usize
    }

    /// Hart and record index of problem `p`.
    pub fn place(&self, p: usize) -> (u32, u32) {
        let p = p as u32;
        (p / self.batch, p % self.batch)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemResult {
    pub xhat: Vec<u32>,
    pub status: u32,
}

impl ProblemResult {
    /// False when the kernel never reached this problem.
    pub fn completed(&self) -> bool {
        self.status != CANARY
    }

    pub fn outcome(&self) -> Result<&[u32], NonPositiveDiagonal> {
        match self.status {
            0 => Ok(&self.xhat),
            s => Err(NonPositiveDiagonal {
                index: s.wrapping_sub(1) as usize,
            }),
        }
    }
}

fn element_bytes(w: u32, variant: Variant) -> ([u8; 4], usize) {
    (w.to_le_bytes(), variant.element_bytes() as usize)
}

/// Write the quantized inputs and canaries of every problem.
///
/// # Panics
/// If `problems` does not match the layout's shape.
pub fn load_problems(
    mem: &ClusterMemory,
    layout: &LayoutDescriptor,
    problems: &[QuantizedProblem],
) -> Result<(), MemFault> {
    assert_eq!(problems.len(), layout.problems(), "problem count");
    for (p, q) in problems.iter().enumerate() {
        assert_eq!(q.variant, layout.variant, "variant");
        assert_eq!((q.n_tx as u32, q.n_rx as u32), (layout.n_tx, layout.n_rx), "shape");
        let (hart, idx) = layout.place(p);
        let base = layout.record_base(hart, idx);
        let mut rec = Vec::with_capacity(layout.record_bytes as usize);
        let mut put = |off: u32, words: &[u32]| {
            rec.resize(off as usize, 0);
            for &w in words {
                let (b, n) = element_bytes(w, layout.variant);
                rec.extend_from_slice(&b[..n]);
            }
        };
        put(layout.y, &q.y);
        put(layout.h, &q.h);
        rec.resize(layout.record_bytes as usize, 0);
        rec[layout.sigma2 as usize..][..4].copy_from_slice(&q.sigma2.to_le_bytes());
        for i in 0..layout.n_tx {
            rec[(layout.xhat + 4 * i) as usize..][..4].copy_from_slice(&CANARY.to_le_bytes());
        }
        rec[layout.status as usize..][..4].copy_from_slice(&CANARY.to_le_bytes());
        mem.write_bytes(base, &rec)?;
    }
    Ok(())
}

/// Read back x̂ and the status word of every problem.
pub fn extract_results(
    mem: &ClusterMemory,
    layout: &LayoutDescriptor,
) -> Result<Vec<ProblemResult>, MemFault> {
    (0..layout.problems())
        .map(|p| {
            let (hart, idx) = layout.place(p);
            let base = layout.record_base(hart, idx);
            let mut buf = alloc::vec![0u8; layout.record_bytes as usize];
            mem.read_bytes(base, &mut buf)?;
            let word = |off: u32| {
                u32::from_le_bytes(buf[off as usize..][..4].try_into().expect("4 bytes"))
            };
            Ok(ProblemResult {
                xhat: (0..layout.n_tx).map(|i| word(layout.xhat + 4 * i)).collect(),
                status: word(layout.status),
            })
        })
        .collect()
}
