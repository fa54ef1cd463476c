//! Cluster execution with harts spread over host threads.
//!
//! Between two barriers every hart runs on its own worker until it stops.
//! Timing stays per hart, so for data-race-free programs the results and
//! the report match the deterministic round-robin scheduler.

use std::str::FromStr;

use rayon::prelude::*;
use sdremu_core::cluster::{barrier_step, budget_error, Cluster, ClusterError, ClusterRunReport, RunOptions};
use sdremu_core::emu::{Event, HartStatus, LatencyTable, Program};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExecMode {
    #[default]
    Deterministic,
    Fast,
}

impl FromStr for ExecMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "deterministic" => Ok(ExecMode::Deterministic),
            "fast" => Ok(ExecMode::Fast),
            _ => Err(format!("unknown mode `{s}` (deterministic or fast)")),
        }
    }
}

pub fn run_cluster(
    c: &mut Cluster,
    prog: &Program,
    table: &LatencyTable,
    opts: RunOptions,
    mode: ExecMode,
) -> Result<ClusterRunReport, ClusterError> {
    if mode == ExecMode::Deterministic {
        return c.run(prog, table, opts);
    }
    let mem = &c.mem;
    loop {
        let events: Vec<(u32, Event)> = c
            .harts
            .par_iter_mut()
            .filter(|h| h.status == HartStatus::Running)
            .map(|h| {
                let left = opts.max_steps.saturating_sub(h.stats.instructions);
                (h.hart_id, h.run_until_event(prog, mem, left))
            })
            .collect();
        if let Some(&(hart, Event::Trapped(trap))) =
            events.iter().find(|(_, e)| matches!(e, Event::Trapped(_)))
        {
            return Err(ClusterError::Trap { hart, trap });
        }
        if events.iter().any(|(_, e)| *e == Event::StepBudgetExhausted) {
            return Err(budget_error(&c.harts));
        }
        if c.harts.iter().all(|h| h.status == HartStatus::Halted) {
            return Ok(ClusterRunReport::from_harts(&c.harts));
        }
        barrier_step(&mut c.harts, table.barrier_overhead)?;
    }
}
