//! The many-core machine: hierarchy parameters, the address map, flat
//! functional memory, barriers and the deterministic round-robin scheduler.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicU32, Ordering};

use crate::emu::{
    DataMemory, HartState, HartStatus, LatencyTable, MemFault, MemoryLatencyMode, Program,
    StepOutcome, Trap,
};
use crate::isa::ProgramImage;
use crate::map::{BANKS_PER_TILE, L1_BASE, L2_BASE, TEXT_BASE};

/// Size of the text window in the address map.
pub const TEXT_WINDOW: u32 = 0x1000_0000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct RegionLatencies {
    pub same_tile: u32,
    pub same_subgroup: u32,
    pub same_group: u32,
    pub cross_group: u32,
    pub l2: u32,
}

impl Default for RegionLatencies {
    fn default() -> Self {
        RegionLatencies {
            same_tile: 1,
            same_subgroup: 5,
            same_group: 7,
            cross_group: 9,
            l2: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct ClusterConfig {
    pub cores_per_tile: u32,
    pub tiles_per_subgroup: u32,
    pub subgroups_per_group: u32,
    pub groups: u32,
    pub l1_bytes_per_tile: u32,
    pub l2_bytes: u32,
    pub latencies: RegionLatencies,
    pub dma_beat_bytes: u32,
    pub dma_setup_cycles: u32,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            cores_per_tile: 8,
            tiles_per_subgroup: 8,
            subgroups_per_group: 4,
            groups: 4,
            l1_bytes_per_tile: 32 * 1024,
            l2_bytes: 1 << 20,
            latencies: RegionLatencies::default(),
            dma_beat_bytes: 16,
            dma_setup_cycles: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("l1_bytes_per_tile must be a multiple of {0}")]
    TileSize(u32),
    #[error("L1 of {0} bytes does not fit below the text window")]
    L1TooLarge(u64),
    #[error("l2_bytes must be a multiple of 4 and at most 2 GiB")]
    L2Size,
    #[error("same_tile latency must be 1")]
    SameTile,
    #[error("{0} latency must be between 1 and 9")]
    L1Latency(&'static str),
    #[error("{0} harts requested but the cluster has {1} cores")]
    TooManyHarts(u32, u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    L1 { tile: u32, bank: u32 },
    Text,
    L2,
}

impl ClusterConfig {
    pub fn tiles(&self) -> u32 {
        self.tiles_per_subgroup * self.subgroups_per_group * self.groups
    }

    pub fn cores(&self) -> u32 {
        self.tiles() * self.cores_per_tile
    }

    pub fn l1_bytes(&self) -> u64 {
        self.tiles() as u64 * self.l1_bytes_per_tile as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("cores_per_tile", self.cores_per_tile),
            ("tiles_per_subgroup", self.tiles_per_subgroup),
            ("subgroups_per_group", self.subgroups_per_group),
            ("groups", self.groups),
            ("l1_bytes_per_tile", self.l1_bytes_per_tile),
            ("dma_beat_bytes", self.dma_beat_bytes),
            ("l2 latency", self.latencies.l2),
        ] {
            if v == 0 {
                return Err(ConfigError::Zero(name));
            }
        }
        if !self.l1_bytes_per_tile.is_multiple_of(4 * BANKS_PER_TILE) {
            return Err(ConfigError::TileSize(4 * BANKS_PER_TILE));
        }
        if self.l1_bytes() > (TEXT_BASE - L1_BASE) as u64 {
            return Err(ConfigError::L1TooLarge(self.l1_bytes()));
        }
        if !self.l2_bytes.is_multiple_of(4) || self.l2_bytes > 0u32.wrapping_sub(L2_BASE) {
            return Err(ConfigError::L2Size);
        }
        let l = &self.latencies;
        if l.same_tile != 1 {
            return Err(ConfigError::SameTile);
        }
        for (name, v) in [
            ("same_subgroup", l.same_subgroup),
            ("same_group", l.same_group),
            ("cross_group", l.cross_group),
        ] {
            if !(1..=9).contains(&v) {
                return Err(ConfigError::L1Latency(name));
            }
        }
        Ok(())
    }

    /// The tile a hart sits in.
    pub fn tile_of(&self, hart_id: u32) -> u32 {
        hart_id / self.cores_per_tile
    }

    pub fn tile_base(&self, tile: u32) -> u32 {
        L1_BASE + tile * self.l1_bytes_per_tile
    }

    pub fn region(&self, addr: u32) -> Result<Region, MemFault> {
        let l1_end = L1_BASE as u64 + self.l1_bytes();
        if addr >= L1_BASE && (addr as u64) < l1_end {
            let off = addr - L1_BASE;
            return Ok(Region::L1 {
                tile: off / self.l1_bytes_per_tile,
                bank: (off % self.l1_bytes_per_tile / 4) % BANKS_PER_TILE,
            });
        }
        if (TEXT_BASE..TEXT_BASE + TEXT_WINDOW).contains(&addr) {
            return Ok(Region::Text);
        }
        if addr >= L2_BASE && ((addr - L2_BASE) as u64) < self.l2_bytes as u64 {
            return Ok(Region::L2);
        }
        Err(MemFault::OutOfMap { addr })
    }

    /// Latency of a data access from `hart_id` to `region` in region mode.
    pub fn region_latency(&self, region: Region, hart_id: u32) -> u32 {
        let l = &self.latencies;
        match region {
            Region::L2 => l.l2,
            Region::Text => 1,
            Region::L1 { tile, .. } => {
                let me = self.tile_of(hart_id);
                let sub = |t: u32| t / self.tiles_per_subgroup;
                let grp = |t: u32| sub(t) / self.subgroups_per_group;
                if tile == me {
                    l.same_tile
                } else if sub(tile) == sub(me) {
                    l.same_subgroup
                } else if grp(tile) == grp(me) {
                    l.same_group
                } else {
                    l.cross_group
                }
            }
        }
    }
}

/// Region and access latency of `addr` for a request from `hart_id` under
/// the table's memory mode.
pub fn classify_address(
    addr: u32,
    hart_id: u32,
    cfg: &ClusterConfig,
    table: &LatencyTable,
) -> Result<(Region, u32), MemFault> {
    let r = cfg.region(addr)?;
    let lat = match table.memory_mode {
        MemoryLatencyMode::ConservativeUniform => table.uniform_latency,
        MemoryLatencyMode::RegionBased => cfg.region_latency(r, hart_id),
    };
    Ok((r, lat))
}

/// Flat functional memory. Words are atomics so that harts on different
/// host threads can share it; ordering is relaxed, which is enough for
/// data-race-free programs.
pub struct ClusterMemory {
    cfg: ClusterConfig,
    l1: Vec<AtomicU32>,
    l2: Vec<AtomicU32>,
}

fn zeroed(words: usize) -> Vec<AtomicU32> {
    (0..words).map(|_| AtomicU32::new(0)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CopyError {
    #[error("source and destination overlap")]
    Overlap,
    #[error("{0}")]
    Fault(MemFault),
}

impl ClusterMemory {
    pub fn new(cfg: ClusterConfig) -> Self {
        ClusterMemory {
            l1: zeroed((cfg.l1_bytes() / 4) as usize),
            l2: zeroed((cfg.l2_bytes / 4) as usize),
            cfg,
        }
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.cfg
    }

    pub fn clear(&self) {
        for w in self.l1.iter().chain(&self.l2) {
            w.store(0, Ordering::Relaxed);
        }
    }

    fn word(&self, addr: u32) -> Result<&AtomicU32, MemFault> {
        match self.cfg.region(addr)? {
            Region::L1 { .. } => Ok(&self.l1[((addr - L1_BASE) / 4) as usize]),
            Region::L2 => Ok(&self.l2[((addr - L2_BASE) / 4) as usize]),
            Region::Text => Err(MemFault::OutOfMap { addr }),
        }
    }

    fn check(addr: u32, width: u32) -> Result<(), MemFault> {
        if !matches!(width, 1 | 2 | 4) || !addr.is_multiple_of(width) {
            return Err(MemFault::Misaligned { addr, width });
        }
        Ok(())
    }

    pub fn read_bytes(&self, addr: u32, out: &mut [u8]) -> Result<(), MemFault> {
        for (i, b) in out.iter_mut().enumerate() {
            *b = self.read(addr.wrapping_add(i as u32), 1)? as u8;
        }
        Ok(())
    }

    pub fn write_bytes(&self, addr: u32, bytes: &[u8]) -> Result<(), MemFault> {
        for (i, &b) in bytes.iter().enumerate() {
            self.write(addr.wrapping_add(i as u32), 1, b as u32)?;
        }
        Ok(())
    }

    /// Byte-exact copy; returns the cycle cost of the transfer.
    pub fn bulk_copy(&self, src: u32, dst: u32, len: u32) -> Result<u64, CopyError> {
        let cost = self.cfg.dma_setup_cycles as u64 + len.div_ceil(self.cfg.dma_beat_bytes) as u64;
        if len == 0 {
            return Ok(cost);
        }
        let (s, d, n) = (src as u64, dst as u64, len as u64);
        if s < d + n && d < s + n {
            return Err(CopyError::Overlap);
        }
        for a in [s, s + n - 1, d, d + n - 1] {
            if a > u32::MAX as u64 {
                return Err(CopyError::Fault(MemFault::OutOfMap { addr: u32::MAX }));
            }
        }
        let mut buf = alloc::vec![0u8; len as usize];
        self.read_bytes(src, &mut buf).map_err(CopyError::Fault)?;
        self.write_bytes(dst, &buf).map_err(CopyError::Fault)?;
        Ok(cost)
    }
}

impl DataMemory for ClusterMemory {
    fn read(&self, addr: u32, width: u32) -> Result<u32, MemFault> {
        Self::check(addr, width)?;
        let w = self.word(addr)?.load(Ordering::Relaxed);
        let sh = 8 * (addr % 4);
        Ok(match width {
            4 => w,
            2 => (w >> sh) & 0xFFFF,
            _ => (w >> sh) & 0xFF,
        })
    }

    fn write(&self, addr: u32, width: u32, value: u32) -> Result<(), MemFault> {
        Self::check(addr, width)?;
        let cell = self.word(addr)?;
        if width == 4 {
            cell.store(value, Ordering::Relaxed);
            return Ok(());
        }
        let sh = 8 * (addr % 4);
        let m = if width == 2 { 0xFFFF } else { 0xFF } << sh;
        let _ = cell.fetch_update(Ordering::Relaxed, Ordering::Relaxed, |w| {
            Some((w & !m) | ((value << sh) & m))
        });
        Ok(())
    }

    fn region_latency(&self, addr: u32, hart_id: u32) -> u32 {
        match self.cfg.region(addr) {
            Ok(r) => self.cfg.region_latency(r, hart_id),
            Err(_) => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ClusterError {
    #[error("hart {hart}: {trap}")]
    Trap { hart: u32, trap: Trap },
    #[error("step budget exhausted; harts {missing:?} never reached the barrier that {waiting:?} wait at")]
    Deadlock { waiting: Vec<u32>, missing: Vec<u32> },
    #[error("step budget exhausted on harts {0:?}")]
    BudgetExhausted(Vec<u32>),
    #[error("{0}")]
    Load(MemFault),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Release every hart waiting at the barrier at the latest arrival plus
/// `overhead`. Halted harts do not take part; any running or trapped hart
/// means the barrier can never complete.
pub fn barrier_step(harts: &mut [HartState], overhead: u32) -> Result<(), ClusterError> {
    let missing: Vec<u32> = harts
        .iter()
        .filter(|h| matches!(h.status, HartStatus::Running | HartStatus::Trapped))
        .map(|h| h.hart_id)
        .collect();
    let waiting: Vec<u32> = harts
        .iter()
        .filter(|h| h.status == HartStatus::AtBarrier)
        .map(|h| h.hart_id)
        .collect();
    if !missing.is_empty() {
        return Err(ClusterError::Deadlock { waiting, missing });
    }
    let Some(last) = harts
        .iter()
        .filter(|h| h.status == HartStatus::AtBarrier)
        .map(|h| h.cycle)
        .max()
    else {
        return Ok(());
    };
    let resume = last + overhead as u64;
    for h in harts.iter_mut().filter(|h| h.status == HartStatus::AtBarrier) {
        h.stats.barrier_wait += resume - h.cycle;
        h.cycle = resume;
        h.status = HartStatus::Running;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Instructions per hart per round-robin turn.
    pub quantum: u64,
    /// Per-hart instruction budget.
    pub max_steps: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            quantum: 1000,
            max_steps: 1 << 32,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HartRow {
    pub hart_id: u32,
    pub instructions: u64,
    pub cycles: u64,
    pub raw_stalls: u64,
    pub mem_stalls: u64,
    pub barrier_wait: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClusterRunReport {
    pub rows: Vec<HartRow>,
}

impl ClusterRunReport {
    pub fn from_harts(harts: &[HartState]) -> Self {
        ClusterRunReport {
            rows: harts
                .iter()
                .map(|h| HartRow {
                    hart_id: h.hart_id,
                    instructions: h.stats.instructions,
                    cycles: h.cycle,
                    raw_stalls: h.stats.raw_stalls,
                    mem_stalls: h.stats.mem_stalls,
                    barrier_wait: h.stats.barrier_wait,
                })
                .collect(),
        }
    }

    /// Parallel cycle count: the slowest hart.
    pub fn total_cycles(&self) -> u64 {
        self.rows.iter().map(|r| r.cycles).max().unwrap_or(0)
    }

    pub fn total_instructions(&self) -> u64 {
        self.rows.iter().map(|r| r.instructions).sum()
    }
}

pub struct Cluster {
    pub mem: ClusterMemory,
    pub harts: Vec<HartState>,
}

impl Cluster {
    pub fn new(cfg: ClusterConfig, n_harts: u32) -> Result<Self, ConfigError> {
        cfg.validate()?;
        if n_harts == 0 {
            return Err(ConfigError::Zero("harts"));
        }
        if n_harts > cfg.cores() {
            return Err(ConfigError::TooManyHarts(n_harts, cfg.cores()));
        }
        Ok(Cluster {
            mem: ClusterMemory::new(cfg),
            harts: (0..n_harts).map(|i| HartState::new(i, 0)).collect(),
        })
    }

    pub fn config(&self) -> &ClusterConfig {
        self.mem.config()
    }

    /// Write the image's data runs and put every hart at the entry point.
    pub fn load(&mut self, image: &ProgramImage) -> Result<(), ClusterError> {
        for run in &image.data {
            self.mem
                .write_bytes(run.addr, &run.bytes)
                .map_err(ClusterError::Load)?;
        }
        self.reset_harts(image.entry);
        Ok(())
    }

    pub fn reset_harts(&mut self, entry: u32) {
        for h in &mut self.harts {
            *h = HartState::new(h.hart_id, entry);
        }
    }

    /// DMA transfer issued by `hart`; its cycle count absorbs the cost.
    pub fn bulk_copy(&mut self, hart: usize, src: u32, dst: u32, len: u32) -> Result<(), CopyError> {
        let cost = self.mem.bulk_copy(src, dst, len)?;
        self.harts[hart].cycle += cost;
        Ok(())
    }

    /// Deterministic round-robin execution until every hart halts.
    pub fn run(
        &mut self,
        prog: &Program,
        table: &LatencyTable,
        opts: RunOptions,
    ) -> Result<ClusterRunReport, ClusterError> {
        let quantum = opts.quantum.max(1);
        let mut used = alloc::vec![0u64; self.harts.len()];
        loop {
            let mut any_running = false;
            for (h, steps) in self.harts.iter_mut().zip(used.iter_mut()) {
                let mut turn = 0;
                while h.status == HartStatus::Running && turn < quantum && *steps < opts.max_steps {
                    turn += 1;
                    *steps += 1;
                    if let StepOutcome::Trapped(trap) = h.step(prog, &self.mem).outcome {
                        return Err(ClusterError::Trap {
                            hart: h.hart_id,
                            trap,
                        });
                    }
                }
                any_running |= h.status == HartStatus::Running;
            }
            if any_running {
                if used
                    .iter()
                    .zip(&self.harts)
                    .any(|(&u, h)| h.status == HartStatus::Running && u < opts.max_steps)
                {
                    continue;
                }
                return Err(budget_error(&self.harts));
            }
            if self.harts.iter().all(|h| h.status == HartStatus::Halted) {
                return Ok(ClusterRunReport::from_harts(&self.harts));
            }
            barrier_step(&mut self.harts, table.barrier_overhead)?;
        }
    }
}

/// Error for a run whose budget ran out: a deadlock report when some harts
/// are waiting at a barrier, otherwise the list of harts still running.
pub fn budget_error(harts: &[HartState]) -> ClusterError {
    let ids = |s: HartStatus| -> Vec<u32> {
        harts
            .iter()
            .filter(|h| h.status == s)
            .map(|h| h.hart_id)
            .collect()
    };
    let waiting = ids(HartStatus::AtBarrier);
    let missing = ids(HartStatus::Running);
    if waiting.is_empty() {
        ClusterError::BudgetExhausted(missing)
    } else {
        ClusterError::Deadlock { waiting, missing }
    }
}
