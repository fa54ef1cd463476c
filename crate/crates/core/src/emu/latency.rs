use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};

use crate::isa::{Instruction, Mnemonic, TABLE};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MemoryLatencyMode {
    /// Every data access costs `uniform_latency`, whatever the region.
    ConservativeUniform,
    /// Cost depends on where the address lives relative to the requester.
    RegionBased,
}

/// Static per-instruction latencies. Everything other than the 9-cycle
/// memory figure is an uncalibrated default meant to be overridden from a
/// file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatencyTable {
    per_mnemonic: BTreeMap<String, u32>,
    pub memory_mode: MemoryLatencyMode,
    pub uniform_latency: u32,
    pub barrier_overhead: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LatencyError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}`")]
    BadValue { line: usize, value: String },
    #[error("line {line}: expected `key value`")]
    Syntax { line: usize },
}

fn default_latency(m: Mnemonic) -> u32 {
    use Mnemonic::*;
    match m {
        Mul | Mulh | Mulhsu | Mulhu => 2,
        Div | Divu | Rem | Remu => 8,
        Fadd | Fsub | Fmul | Fmadd | Fmsub | Fcvt => 3,
        Fdiv | Fsqrt => 10,
        Wdotp | Cdotp | Shuffle => 3,
        _ => 1,
    }
}

fn table_names() -> impl Iterator<Item = (String, Mnemonic)> {
    TABLE.iter().map(|e| {
        let mut i = Instruction::new(e.mnemonic);
        i.fmt = e.fmt;
        i.src_fmt = e.src_fmt;
        (i.name(), e.mnemonic)
    })
}

impl Default for LatencyTable {
    fn default() -> Self {
        LatencyTable {
            per_mnemonic: table_names()
                .map(|(n, m)| (n, default_latency(m)))
                .collect(),
            memory_mode: MemoryLatencyMode::ConservativeUniform,
            uniform_latency: 9,
            barrier_overhead: 10,
        }
    }
}

impl LatencyTable {
    /// Every latency 1, uniform memory latency 1, no barrier overhead.
    pub fn unit() -> Self {
        LatencyTable {
            per_mnemonic: table_names().map(|(n, _)| (n, 1)).collect(),
            memory_mode: MemoryLatencyMode::ConservativeUniform,
            uniform_latency: 1,
            barrier_overhead: 0,
        }
    }

    pub fn latency(&self, ins: &Instruction) -> u32 {
        if ins.mnemonic == Mnemonic::Illegal {
            return 1;
        }
        self.per_mnemonic.get(&ins.name()).copied().unwrap_or(1)
    }

    pub fn set(&mut self, mnemonic: &str, latency: u32) -> bool {
        match self.per_mnemonic.get_mut(mnemonic) {
            Some(v) if latency >= 1 => {
                *v = latency;
                true
            }
            _ => false,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u32)> {
        self.per_mnemonic.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Parse the line-oriented format on top of the defaults:
    ///
    /// ```text
    /// # comment
    /// fmadd.h 3
    /// memory.mode uniform        # or region
    /// memory.uniform 9
    /// barrier.overhead 10
    /// ```
    pub fn parse(text: &str) -> Result<Self, LatencyError> {
        let mut t = LatencyTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut parts = body.split_whitespace();
            let (Some(key), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(LatencyError::Syntax { line });
            };
            let bad = || LatencyError::BadValue {
                line,
                value: value.to_string(),
            };
            let num = || value.parse::<u32>().map_err(|_| bad());
            match key {
                "memory.mode" => {
                    t.memory_mode = match value {
                        "uniform" => MemoryLatencyMode::ConservativeUniform,
                        "region" => MemoryLatencyMode::RegionBased,
                        _ => return Err(bad()),
                    }
                }
                "memory.uniform" => {
                    t.uniform_latency = num()?;
                    if t.uniform_latency == 0 {
                        return Err(bad());
                    }
                }
                "barrier.overhead" => t.barrier_overhead = num()?,
                k => {
                    let v = num()?;
                    if !t.per_mnemonic.contains_key(k) {
                        return Err(LatencyError::UnknownKey {
                            line,
                            key: k.to_string(),
                        });
                    }
                    if !t.set(k, v) {
                        return Err(bad());
                    }
                }
            }
        }
        Ok(t)
    }

    /// Inverse of `parse`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mode = match self.memory_mode {
            MemoryLatencyMode::ConservativeUniform => "uniform",
            MemoryLatencyMode::RegionBased => "region",
        };
        s.push_str(&format!("memory.mode {mode}\n"));
        s.push_str(&format!("memory.uniform {}\n", self.uniform_latency));
        s.push_str(&format!("barrier.overhead {}\n", self.barrier_overhead));
        for (k, v) in &self.per_mnemonic {
            s.push_str(&format!("{k} {v}\n"));
        }
        s
    }
}
