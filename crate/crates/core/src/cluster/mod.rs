//! Cloud computing center: a pool of OPUs fed by edge nodes, with
//! wavelength allocation, FIFO scheduling of row tasks and throughput,
//! latency and energy accounting.

mod job;
mod pool;
mod run;
mod schedule;

pub use job::{decompose_job, Job, JobKind, RowTask, TaskPath};
pub use pool::{wavelength_allocate, EdgeChannel, OpuPool};
pub use run::{
    run_cluster, write_report_csv, JobOutcome, JobOutput, JobReport, RunOptions, ThroughputReport,
    DEFAULT_OPU_POWER_MW,
};
pub use schedule::{
    ready_slot, schedule, schedule_with, Assignment, SchedulePolicy, ScheduledTask,
};
