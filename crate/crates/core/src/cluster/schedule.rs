use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::job::{decompose_job, Job, RowTask};
use super::pool::OpuPool;
use crate::error::{Error, Result};
use crate::opu::Kernel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulePolicy {
    /// Extra slots charged when an OPU must load a different kernel row.
    #[serde(default)]
    pub reload_penalty_slots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledTask {
    pub task: RowTask,
    pub opu: usize,
    pub ready_slot: u64,
    pub start_slot: u64,
    pub end_slot: u64,
}

impl ScheduledTask {
    pub fn busy_slots(&self) -> u64 {
        self.end_slot - self.start_slot
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub opu_count: usize,
    pub slot_ns: f64,
    /// In dispatch order.
    pub tasks: Vec<ScheduledTask>,
    /// Jobs that could not be decomposed, with the reason.
    pub rejected: BTreeMap<u64, String>,
}

impl Assignment {
    pub fn first_ready_slot(&self) -> u64 {
        self.tasks.iter().map(|t| t.ready_slot).min().unwrap_or(0)
    }

    pub fn end_slot(&self) -> u64 {
        self.tasks.iter().map(|t| t.end_slot).max().unwrap_or(0)
    }

    /// Slots from the first task becoming ready to the last one finishing.
    pub fn makespan_slots(&self) -> u64 {
        self.end_slot() - self.first_ready_slot().min(self.end_slot())
    }

    pub fn busy_slots_per_opu(&self) -> Vec<u64> {
        let mut busy = vec![0; self.opu_count];
        for t in &self.tasks {
            busy[t.opu] += t.busy_slots();
        }
        busy
    }

    /// Every task on a valid OPU, at most one task at a time per OPU.
    pub fn check(&self) -> Result<()> {
        let mut per_opu: Vec<Vec<(u64, u64)>> = vec![Vec::new(); self.opu_count];
        for t in &self.tasks {
            if t.opu >= self.opu_count {
                return Err(Error::InvalidPort {
                    port: t.opu,
                    ports: self.opu_count,
                });
            }
            if t.start_slot < t.ready_slot || t.end_slot < t.start_slot {
                return Err(Error::Validation {
                    path: format!("task {}.{}", t.task.job_id, t.task.index),
                    message: "runs before it is ready".into(),
                });
            }
            per_opu[t.opu].push((t.start_slot, t.end_slot));
        }
        for (opu, spans) in per_opu.iter_mut().enumerate() {
            spans.sort_unstable();
            if spans.windows(2).any(|w| w[1].0 < w[0].1) {
                return Err(Error::Validation {
                    path: format!("opu {opu}"),
                    message: "overlapping tasks".into(),
                });
            }
        }
        Ok(())
    }
}

pub fn ready_slot(submit_time_ns: f64, slot_ns: f64) -> u64 {
    let s = (submit_time_ns / slot_ns - 1e-9).ceil();
    if s > 0.0 {
        s as u64
    } else {
        0
    }
}

pub fn schedule(jobs: &[Job], pool: &OpuPool) -> Result<Assignment> {
    schedule_with(jobs, pool, &SchedulePolicy::default())
}

/// FIFO greedy: jobs in `(submit_time, id)` order, each row task to the
/// OPU that can start it earliest, lowest id on ties.
pub fn schedule_with(jobs: &[Job], pool: &OpuPool, policy: &SchedulePolicy) -> Result<Assignment> {
    let mut ids = BTreeSet::new();
    for j in jobs {
        if !ids.insert(j.id) {
            return Err(Error::Validation {
                path: format!("jobs.{}", j.id),
                message: "duplicate job id".into(),
            });
        }
        if !(j.submit_time_ns >= 0.0) || !j.submit_time_ns.is_finite() {
            return Err(Error::Validation {
                path: format!("jobs.{}.submit_time_ns", j.id),
                message: "must be finite and nonnegative".into(),
            });
        }
    }
    let mut order: Vec<&Job> = jobs.iter().collect();
    order.sort_by(|a, b| {
        a.submit_time_ns
            .total_cmp(&b.submit_time_ns)
            .then(a.id.cmp(&b.id))
    });

    let slot_ns = pool.slot_ns();
    let mut avail = vec![0u64; pool.len()];
    let mut loaded: Vec<Option<Kernel>> = vec![None; pool.len()];
    let mut tasks = Vec::new();
    let mut rejected = BTreeMap::new();
    for job in order {
        let parts = match decompose_job(job, pool.used_ports()) {
            Ok(p) => p,
            Err(e) => {
                rejected.insert(job.id, e.to_string());
                continue;
            }
        };
        let ready = ready_slot(job.submit_time_ns, slot_ns);
        for task in parts {
            let opu = (0..pool.len())
                .min_by_key(|&o| (avail[o].max(ready), o))
                .expect("pool is nonempty");
            let start = avail[opu].max(ready);
            let reload = if loaded[opu].as_ref() == Some(&task.row_kernel) {
                0
            } else {
                policy.reload_penalty_slots
            };
            let end = start + reload + task.slots;
            avail[opu] = end;
            loaded[opu] = Some(task.row_kernel.clone());
            tasks.push(ScheduledTask {
                task,
                opu,
                ready_slot: ready,
                start_slot: start,
                end_slot: end,
            });
        }
    }
    Ok(Assignment {
        opu_count: pool.len(),
        slot_ns,
        tasks,
        rejected,
    })
}
