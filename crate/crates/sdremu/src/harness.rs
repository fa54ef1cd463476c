//! Monte-Carlo BER sweeps and cycle reports.
//!
//! One iteration detects `n_sc` independent problems. Its seed is a pure
//! function of (master seed, SNR index, iteration index), and every problem
//! draws its bits and channel from seeds derived from that, so all
//! variants and engines see the same transmissions.
//!
//! A point stops at the first iteration after which the error target or
//! the trial budget is reached, exactly as a sequential loop would. Workers
//! run iterations ahead speculatively; results are reduced in index order
//! and anything past the stopping iteration is discarded.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sdremu_core::cluster::{Cluster, ClusterConfig, ClusterError, HartRow, RunOptions};
use sdremu_core::emu::{LatencyTable, Program};
use sdremu_core::kernel::{
    decode_xhat, extract_results, functional_mmse, generate_kernel, golden_mmse, load_problems,
    DetectionProblem, KernelError, KernelImage, QuantizedProblem, Variant,
};
use sdremu_core::phy::{
    apply_channel, noise_variance, random_bits, ChannelKind, ChannelModel, Modulation,
    SnrConvention,
};

use crate::fast::{run_cluster, ExecMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Generated kernels on the emulated cluster.
    Emulated,
    /// Host replicas of the kernels, bit-identical to `Emulated`.
    Functional,
    /// Double-precision reference; ignores the variant.
    Golden,
}

/// What the emulated engine runs on.
#[derive(Clone, Debug, PartialEq)]
pub struct Emulation {
    pub cluster: ClusterConfig,
    pub latency: LatencyTable,
    pub mode: ExecMode,
    pub options: RunOptions,
}

impl Default for Emulation {
    fn default() -> Self {
        Emulation {
            cluster: ClusterConfig::default(),
            latency: LatencyTable::default(),
            mode: ExecMode::Deterministic,
            options: RunOptions::default(),
        }
    }
}

fn default_modulation() -> Modulation {
    Modulation::Qam16
}
fn default_target() -> u64 {
    100
}
fn default_max_trials() -> u64 {
    1_000_000
}
fn default_n_sc() -> usize {
    1638
}
fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variant: Variant,
    #[serde(default = "default_modulation")]
    pub modulation: Modulation,
    pub channel: ChannelKind,
    #[serde(default)]
    pub convention: SnrConvention,
    pub n_tx: usize,
    pub n_rx: usize,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_target")]
    pub target_bit_errors: u64,
    /// Problems per point before giving up on the target.
    #[serde(default = "default_max_trials")]
    pub max_trials: u64,
    #[serde(default = "default_n_sc")]
    pub n_sc: usize,
    pub engine: Engine,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Harts used by the emulated engine; by default enough to hold `n_sc`
    /// problems, at most the whole cluster.
    #[serde(default)]
    pub harts: Option<u32>,
    #[serde(skip)]
    pub emulation: Emulation,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid sweep: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("problem {problem} of iteration {iteration}: {source}")]
    Engine {
        iteration: u64,
        problem: usize,
        source: ClusterError,
    },
    #[error(transparent)]
    Cluster(ClusterError),
}

impl HarnessError {
    /// The underlying cluster error, if the failure came from a run.
    pub fn cluster_error(&self) -> Option<&ClusterError> {
        match self {
            HarnessError::Engine { source, .. } => Some(source),
            HarnessError::Cluster(e) => Some(e),
            _ => None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.snr_db.is_empty() {
            return bad("snr_db list is empty");
        }
        if self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return bad("snr_db must be a number or +inf");
        }
        if self.target_bit_errors == 0 {
            return bad("target_bit_errors must be at least 1");
        }
        if self.max_trials == 0 || self.n_sc == 0 || self.workers == 0 {
            return bad("max_trials, n_sc and workers must be at least 1");
        }
        if self.n_tx == 0 || self.n_rx < self.n_tx {
            return bad("need 1 <= n_tx <= n_rx");
        }
        if self.channel == ChannelKind::AwgnIdentity && self.n_rx != self.n_tx {
            return bad("the identity channel needs n_rx == n_tx");
        }
        if self.engine == Engine::Emulated && self.variant == Variant::Double64 {
            return bad("double64 has no emulated kernel");
        }
        Ok(())
    }

    fn channel_model(&self, snr_db: f64) -> ChannelModel {
        ChannelModel {
            kind: self.channel,
            n_tx: self.n_tx,
            n_rx: self.n_rx,
            snr_db,
            convention: self.convention,
        }
    }

    fn bits_per_problem(&self) -> u64 {
        (self.n_tx * self.modulation.bits_per_symbol()) as u64
    }
}

/// SplitMix64 finaliser over the combined words.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn iteration_seed(master: u64, snr_index: usize, iteration: u64) -> u64 {
    mix(mix(master, snr_index as u64), iteration)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IterationOutcome {
    pub bit_errors: u64,
    pub bits: u64,
    /// Problems whose detection failed or produced non-finite symbols. All
    /// their bits are counted as errors.
    pub erasures: u64,
    pub trials: u64,
}

/// Transmitted bits and the detection problem for every subcarrier.
pub fn iteration_problems(
    cfg: &SweepConfig,
    snr_index: usize,
    iteration: u64,
) -> (Vec<Vec<u8>>, Vec<DetectionProblem>) {
    let snr = cfg.snr_db[snr_index];
    let ch = cfg.channel_model(snr);
    let s2 = noise_variance(snr, cfg.convention, cfg.modulation);
    let seed = iteration_seed(cfg.master_seed, snr_index, iteration);
    (0..cfg.n_sc)
        .map(|p| {
            let bits = random_bits(mix(seed, 2 * p as u64), cfg.bits_per_problem() as usize);
            let x = cfg.modulation.modulate(&bits).expect("whole symbols");
            let out = apply_channel(&x, &ch, s2, mix(seed, 2 * p as u64 + 1));
            let prob = DetectionProblem {
                n_tx: cfg.n_tx,
                n_rx: cfg.n_rx,
                h: out.h,
                y: out.y,
                sigma2: out.sigma2,
            };
            (bits, prob)
        })
        .unzip()
}

/// Estimates for every problem; `None` when the detector gave up.
fn detect(
    cfg: &SweepConfig,
    problems: &[DetectionProblem],
    iteration: u64,
) -> Result<Vec<Option<Vec<Complex64>>>, HarnessError> {
    let v = cfg.variant;
    match cfg.engine {
        Engine::Golden => Ok(problems.iter().map(|p| golden_mmse(p).ok()).collect()),
        Engine::Functional if v == Variant::Double64 => {
            Ok(problems.iter().map(|p| golden_mmse(p).ok()).collect())
        }
        Engine::Functional => Ok(problems
            .iter()
            .map(|p| {
                functional_mmse(&QuantizedProblem::new(p, v))
                    .ok()
                    .map(|w| decode_xhat(&w))
            })
            .collect()),
        Engine::Emulated => {
            let qs: Vec<_> = problems.iter().map(|p| QuantizedProblem::new(p, v)).collect();
            let (k, batch) = emulated_kernel(cfg)?;
            emulate(&k, batch, &qs, &cfg.emulation, iteration)
        }
    }
}

/// Kernel for the emulated engine and its per-hart batch.
pub fn emulated_kernel(cfg: &SweepConfig) -> Result<(KernelImage, u32), HarnessError> {
    let cl = &cfg.emulation.cluster;
    let harts = cfg
        .harts
        .unwrap_or_else(|| cl.cores().min(cfg.n_sc as u32))
        .max(1);
    let batch = (cfg.n_sc as u32).div_ceil(harts);
    let k = generate_kernel(cfg.variant, cfg.n_tx as u32, cfg.n_rx as u32, batch, harts, cl)?;
    Ok((k, batch))
}

fn emulate(
    k: &KernelImage,
    batch: u32,
    qs: &[QuantizedProblem],
    em: &Emulation,
    iteration: u64,
) -> Result<Vec<Option<Vec<Complex64>>>, HarnessError> {
    let slots = k.layout.problems();
    // unused slots repeat the last problem
    let mut padded = qs.to_vec();
    padded.resize(slots, qs[qs.len() - 1].clone());
    let mut c = Cluster::new(em.cluster, k.layout.n_harts).map_err(|e| HarnessError::Cluster(e.into()))?;
    let fail = |c: &Cluster, e: ClusterError| {
        let problem = match &e {
            ClusterError::Trap { hart, .. } => {
                // s1 holds the current record
                let s1 = c.harts[*hart as usize].regs[9];
                let first = k.layout.record_base(*hart, 0);
                let idx = s1.wrapping_sub(first) / k.layout.record_bytes;
                (*hart * batch + idx.min(batch - 1)) as usize
            }
            _ => 0,
        };
        HarnessError::Engine {
            iteration,
            problem,
            source: e,
        }
    };
    c.load(&k.image).map_err(|e| fail(&c, e))?;
    load_problems(&c.mem, &k.layout, &padded).map_err(|e| fail(&c, ClusterError::Load(e)))?;
    let prog = Program::new(&k.image, &em.latency);
    if let Err(e) = run_cluster(&mut c, &prog, &em.latency, em.options, em.mode) {
        return Err(fail(&c, e));
    }
    let res = extract_results(&c.mem, &k.layout).map_err(|e| fail(&c, ClusterError::Load(e)))?;
    Ok(res
        .iter()
        .take(qs.len())
        .map(|r| r.outcome().ok().map(decode_xhat))
        .collect())
}

pub fn run_iteration(
    cfg: &SweepConfig,
    snr_index: usize,
    iteration: u64,
) -> Result<IterationOutcome, HarnessError> {
    let (bits, problems) = iteration_problems(cfg, snr_index, iteration);
    let xs = detect(cfg, &problems, iteration)?;
    let mut out = IterationOutcome {
        trials: problems.len() as u64,
        ..Default::default()
    };
    for (sent, x) in bits.iter().zip(xs) {
        out.bits += sent.len() as u64;
        match x.filter(|x| x.iter().all(|z| z.re.is_finite() && z.im.is_finite())) {
            Some(x) => {
                let (got, _) = cfg.modulation.demodulate(&x);
                out.bit_errors += sent.iter().zip(&got).filter(|(a, b)| a != b).count() as u64;
            }
            None => {
                out.erasures += 1;
                out.bit_errors += sent.len() as u64;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub trials: u64,
    #[serde(rename = "erasures")]
    pub erasure_problems: u64,
}

impl BerPoint {
    fn new(snr_db: f64) -> Self {
        BerPoint {
            snr_db,
            ber: 0.0,
            bit_errors: 0,
            bits_total: 0,
            trials: 0,
            erasure_problems: 0,
        }
    }

    fn add(&mut self, o: &IterationOutcome) {
        self.bit_errors += o.bit_errors;
        self.bits_total += o.bits;
        self.trials += o.trials;
        self.erasure_problems += o.erasures;
        self.ber = self.bit_errors as f64 / self.bits_total as f64;
    }

    /// Binomial standard error of the BER estimate.
    pub fn std_error(&self) -> f64 {
        (self.ber * (1.0 - self.ber) / self.bits_total as f64).sqrt()
    }

    /// Below the error target: the point stopped on the trial budget.
    pub fn low_confidence(&self, target: u64) -> bool {
        self.bit_errors < target
    }
}

fn sweep_point(cfg: &SweepConfig, snr_index: usize) -> Result<BerPoint, HarnessError> {
    let mut pt = BerPoint::new(cfg.snr_db[snr_index]);
    let ahead = cfg.workers as u64;
    let mut next = 0u64;
    loop {
        let chunk: Vec<_> = (next..next + ahead)
            .into_par_iter()
            .map(|i| run_iteration(cfg, snr_index, i))
            .collect();
        next += ahead;
        for r in chunk {
            pt.add(&r?);
            if pt.bit_errors >= cfg.target_bit_errors || pt.trials >= cfg.max_trials {
                return Ok(pt);
            }
        }
    }
}

/// One point per SNR, independent of `workers`.
pub fn ber_sweep(cfg: &SweepConfig) -> Result<Vec<BerPoint>, HarnessError> {
    cfg.validate()?;
    if cfg.engine == Engine::Emulated {
        // fail early on shapes that do not fit
        emulated_kernel(cfg)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    pool.install(|| (0..cfg.snr_db.len()).map(|i| sweep_point(cfg, i)).collect())
}

/// Shape and data of a cycle measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSpec {
    pub variant: Variant,
    pub n_tx: u32,
    pub n_rx: u32,
    #[serde(default = "one")]
    pub batch: u32,
    #[serde(default = "one")]
    pub harts: u32,
    /// SNR of the random Rayleigh problems the kernel runs on.
    #[serde(default = "default_cycle_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> u32 {
    1
}
fn default_cycle_snr() -> f64 {
    20.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleReport {
    pub variant: Variant,
    pub n_tx: u32,
    pub n_rx: u32,
    pub batch: u32,
    pub rows: Vec<HartRow>,
    /// Problems that stopped on a non-positive pivot.
    pub failed_problems: usize,
    pub wall: Duration,
}

impl CycleReport {
    /// Parallel cycles: the slowest hart.
    pub fn total_cycles(&self) -> u64 {
        self.rows.iter().map(|r| r.cycles).max().unwrap_or(0)
    }

    pub fn total_instructions(&self) -> u64 {
        self.rows.iter().map(|r| r.instructions).sum()
    }

    pub fn raw_stalls(&self) -> u64 {
        self.rows.iter().map(|r| r.raw_stalls).sum()
    }

    pub fn mem_stalls(&self) -> u64 {
        self.rows.iter().map(|r| r.mem_stalls).sum()
    }

    pub fn barrier_wait(&self) -> u64 {
        self.rows.iter().map(|r| r.barrier_wait).sum()
    }

    /// Emulated instructions per host second, in millions.
    pub fn mips(&self) -> f64 {
        self.total_instructions() as f64 / self.wall.as_secs_f64().max(1e-9) / 1e6
    }
}

/// Problems for a cycle measurement: 16-QAM over flat Rayleigh.
pub fn cycle_problems(spec: &CycleSpec) -> Vec<QuantizedProblem> {
    let m = Modulation::Qam16;
    let n = (spec.batch * spec.harts) as usize;
    let (nt, nr) = (spec.n_tx as usize, spec.n_rx as usize);
    let ch = ChannelModel {
        kind: ChannelKind::FlatRayleigh,
        n_tx: nt,
        n_rx: nr,
        snr_db: spec.snr_db,
        convention: SnrConvention::EsN0,
    };
    let s2 = noise_variance(spec.snr_db, ch.convention, m);
    (0..n as u64)
        .map(|p| {
            let x = m
                .modulate(&random_bits(mix(spec.seed, 2 * p), nt * m.bits_per_symbol()))
                .expect("whole symbols");
            let out = apply_channel(&x, &ch, s2, mix(spec.seed, 2 * p + 1));
            let d = DetectionProblem {
                n_tx: nt,
                n_rx: nr,
                h: out.h,
                y: out.y,
                sigma2: out.sigma2,
            };
            QuantizedProblem::new(&d, spec.variant)
        })
        .collect()
}

/// Run the kernel once on representative data and collect its timing.
pub fn cycle_report(spec: &CycleSpec, em: &Emulation) -> Result<CycleReport, HarnessError> {
    let k = generate_kernel(spec.variant, spec.n_tx, spec.n_rx, spec.batch, spec.harts, &em.cluster)?;
    let qs = cycle_problems(spec);
    let mut c = Cluster::new(em.cluster, spec.harts).map_err(|e| HarnessError::Cluster(e.into()))?;
    c.load(&k.image).map_err(HarnessError::Cluster)?;
    load_problems(&c.mem, &k.layout, &qs).map_err(|e| HarnessError::Cluster(ClusterError::Load(e)))?;
    let prog = Program::new(&k.image, &em.latency);
    let t0 = Instant::now();
    let report = run_cluster(&mut c, &prog, &em.latency, em.options, em.mode).map_err(HarnessError::Cluster)?;
    let wall = t0.elapsed();
    let res = extract_results(&c.mem, &k.layout).map_err(|e| HarnessError::Cluster(ClusterError::Load(e)))?;
    Ok(CycleReport {
        variant: spec.variant,
        n_tx: spec.n_tx,
        n_rx: spec.n_rx,
        batch: spec.batch,
        rows: report.rows,
        failed_problems: res.iter().filter(|r| r.outcome().is_err()).count(),
        wall,
    })
}
