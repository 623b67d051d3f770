//! Schedules a burst of 1D and 2D jobs on a five-OPU pool and prints the
//! per-job latency and energy plus the aggregate throughput.

use optocloud::cluster::{
    run_cluster, schedule, wavelength_allocate, Job, JobKind, OpuPool, RunOptions,
};
use optocloud::convnet::{FeatureMap, Kernel2d};
use optocloud::link::LinkModel;
use optocloud::opu::{Kernel, OpuConfig};
use rand::Rng;

fn main() -> optocloud::Result<()> {
    let pool = OpuPool::uniform(OpuConfig::new(8).noisy(10.0), 5)?;
    let channels = wavelength_allocate(&pool.plan(3)?, 4)?;
    println!(
        "edge teeth: {:?}",
        channels.iter().map(|c| c.tooth).collect::<Vec<_>>()
    );

    let mut rng = optocloud::seed::rng(1);
    let mut jobs = Vec::new();
    for id in 0..20u64 {
        let kind = if id % 4 == 3 {
            JobKind::Conv2d {
                kernel: Kernel2d::new(3, (0..9).map(|_| rng.random_range(-1.0..1.0)).collect())?,
                image: FeatureMap::new(
                    1,
                    6,
                    8,
                    (0..48).map(|_| rng.random_range(0.0..1.0)).collect(),
                )?,
            }
        } else {
            JobKind::Conv1d {
                kernel: Kernel::new((0..3).map(|_| rng.random_range(-1.0..1.0)).collect())?,
                input: (0..8).map(|_| rng.random_range(0.0..1.0)).collect(),
            }
        };
        let mut job = Job::new(id, kind);
        job.origin_edge = id as usize % 4;
        job.submit_time_ns = (id / 5) as f64 * 0.2;
        jobs.push(job);
    }

    let assignment = schedule(&jobs, &pool)?;
    let (_, report) = run_cluster(
        &assignment,
        &pool,
        &jobs,
        &LinkModel::default(),
        &RunOptions::default(),
    )?;
    println!("job  opus        latency_ns  energy_pj");
    for j in &report.jobs {
        println!(
            "{:>3}  {:<10}  {:>10.1}  {:>9.2}",
            j.id,
            format!("{:?}", j.opus),
            j.latency_ns.unwrap_or(f64::NAN),
            j.energy_pj
        );
    }
    println!(
        "{} tasks in {} slots: {:.2} TOPS of {:.2} peak",
        report.tasks, report.makespan_slots, report.achieved_tops, report.peak_tops_bound
    );
    Ok(())
}
