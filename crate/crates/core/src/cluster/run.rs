use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::job::{Job, JobKind};
use super::pool::OpuPool;
use super::schedule::Assignment;
use crate::convnet::{run_row_task, FeatureMap, UnitRange};
use crate::error::{Error, Result};
use crate::link::LinkModel;

/// Default electrical power of one busy OPU: modulators, detectors and
/// the waveshaper, mW.
pub const DEFAULT_OPU_POWER_MW: f64 = 106.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub run_seed: u64,
    pub opu_power_mw: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            run_seed: 0,
            opu_power_mw: DEFAULT_OPU_POWER_MW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum JobOutput {
    Vector(Vec<f64>),
    Map(FeatureMap),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<JobOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobReport {
    pub id: u64,
    pub origin_edge: usize,
    pub opus: Vec<usize>,
    pub tasks: usize,
    pub ops: u64,
    pub start_ns: Option<f64>,
    pub end_ns: Option<f64>,
    /// Uplink, queueing, compute and downlink.
    pub latency_ns: Option<f64>,
    pub energy_pj: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub opus: usize,
    pub baud_ghz: f64,
    pub slot_ns: f64,
    pub tasks: usize,
    pub total_ops: u64,
    pub makespan_slots: u64,
    pub makespan_ns: f64,
    pub achieved_tops: f64,
    pub peak_tops_bound: f64,
    pub utilization: Vec<f64>,
    pub one_way_delay_ns: f64,
    pub jobs: Vec<JobReport>,
}

impl ThroughputReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Mapped input planes of one job.
struct Prepared {
    planes: Vec<(Vec<f64>, UnitRange)>,
    width: usize,
}

fn prepare(job: &Job) -> Prepared {
    let one = |v: &[f64]| {
        let r = UnitRange::fit(v);
        (r.apply(v), r)
    };
    match &job.kind {
        JobKind::Conv1d { input, .. } => Prepared {
            planes: vec![one(input)],
            width: input.len(),
        },
        JobKind::Conv2d { image: map, .. } | JobKind::Layer { input: map, .. } => Prepared {
            planes: (0..map.channels).map(|c| one(map.plane(c))).collect(),
            width: map.width,
        },
    }
}

fn assemble(job: &Job, parts: Vec<(&super::job::RowTask, Vec<f64>)>) -> Result<JobOutput> {
    match &job.kind {
        JobKind::Conv1d { .. } => Ok(JobOutput::Vector(
            parts.into_iter().next().map(|(_, v)| v).unwrap_or_default(),
        )),
        JobKind::Conv2d { kernel, image } => {
            let k = kernel.size();
            let mut out = FeatureMap::zeros(1, image.height - k + 1, image.width - k + 1);
            for (_, p) in parts {
                out.data_mut().iter_mut().zip(p).for_each(|(o, v)| *o += v);
            }
            Ok(JobOutput::Map(out))
        }
        JobKind::Layer { layer, input } => {
            let k = layer.kernel_size;
            let mut out = FeatureMap::zeros(
                layer.out_channels,
                input.height - k + 1,
                input.width - k + 1,
            );
            for (task, p) in parts {
                if let super::job::TaskPath::LayerRow { out: o, .. } = task.path {
                    out.plane_mut(o)
                        .iter_mut()
                        .zip(p)
                        .for_each(|(a, v)| *a += v);
                }
            }
            layer.finish(&mut out, None)?;
            Ok(JobOutput::Map(out))
        }
    }
}

/// Executes an assignment. Tasks run in parallel; results are gathered by
/// task position, so outputs and reports do not depend on thread timing.
/// A failing task fails only its own job.
pub fn run_cluster(
    assignment: &Assignment,
    pool: &OpuPool,
    jobs: &[Job],
    link: &LinkModel,
    options: &RunOptions,
) -> Result<(Vec<JobOutcome>, ThroughputReport)> {
    if assignment.opu_count != pool.len() {
        return Err(Error::shape(
            format!("{} OPUs", pool.len()),
            assignment.opu_count,
        ));
    }
    assignment.check()?;
    link.validate()?;
    if !(options.opu_power_mw >= 0.0) {
        return Err(Error::param("opu_power_mw", "must be nonnegative"));
    }
    let by_id: BTreeMap<u64, &Job> = jobs.iter().map(|j| (j.id, j)).collect();
    for t in &assignment.tasks {
        if !by_id.contains_key(&t.task.job_id) {
            return Err(Error::Validation {
                path: format!("assignment.job {}", t.task.job_id),
                message: "not in the job list".into(),
            });
        }
    }
    let prepared: BTreeMap<u64, Prepared> = by_id.iter().map(|(&id, j)| (id, prepare(j))).collect();

    let results: Vec<Result<Vec<f64>>> = assignment
        .tasks
        .par_iter()
        .map(|st| {
            let job = by_id[&st.task.job_id];
            let prep = &prepared[&job.id];
            let (mapped, range) = &prep.planes[st.task.input_channel()];
            let stream = st.task.stream(job.effective_seed(options.run_seed));
            run_row_task(
                &pool.opus()[st.opu],
                &st.task.row_kernel,
                mapped,
                prep.width,
                st.task.first_row,
                st.task.out_rows,
                *range,
                stream,
            )
        })
        .collect();

    let slot_ns = assignment.slot_ns;
    let one_way = link.one_way_delay_ns();
    let mut outcomes = Vec::with_capacity(jobs.len());
    let mut reports = Vec::with_capacity(jobs.len());
    for job in jobs {
        let mine: Vec<usize> = (0..assignment.tasks.len())
            .filter(|&i| assignment.tasks[i].task.job_id == job.id)
            .collect();
        let mut error = assignment.rejected.get(&job.id).cloned();
        if error.is_none() && mine.is_empty() {
            error = Some("job was not scheduled".into());
        }
        let mut parts = Vec::with_capacity(mine.len());
        for &i in &mine {
            match &results[i] {
                Ok(v) => parts.push((&assignment.tasks[i].task, v.clone())),
                Err(e) if error.is_none() => error = Some(e.to_string()),
                Err(_) => {}
            }
        }
        let output = match error {
            None => match assemble(job, parts) {
                Ok(o) => Some(o),
                Err(e) => {
                    error = Some(e.to_string());
                    None
                }
            },
            Some(_) => None,
        };

        let mut opus: Vec<usize> = mine.iter().map(|&i| assignment.tasks[i].opu).collect();
        opus.sort_unstable();
        opus.dedup();
        let busy: u64 = mine.iter().map(|&i| assignment.tasks[i].busy_slots()).sum();
        let start = mine.iter().map(|&i| assignment.tasks[i].start_slot).min();
        let end = mine.iter().map(|&i| assignment.tasks[i].end_slot).max();
        reports.push(JobReport {
            id: job.id,
            origin_edge: job.origin_edge,
            opus,
            tasks: mine.len(),
            ops: mine.iter().map(|&i| assignment.tasks[i].task.ops).sum(),
            start_ns: start.map(|s| s as f64 * slot_ns),
            end_ns: end.map(|e| e as f64 * slot_ns),
            latency_ns: end.map(|e| 2.0 * one_way + e as f64 * slot_ns - job.submit_time_ns),
            energy_pj: options.opu_power_mw * busy as f64 * slot_ns,
            error: error.clone(),
        });
        outcomes.push(JobOutcome {
            id: job.id,
            output,
            error,
        });
    }

    let makespan_slots = assignment.makespan_slots();
    let makespan_ns = makespan_slots as f64 * slot_ns;
    let total_ops: u64 = assignment.tasks.iter().map(|t| t.task.ops).sum();
    let achieved_tops = if makespan_slots > 0 {
        total_ops as f64 / makespan_ns / 1000.0
    } else {
        0.0
    };
    let utilization = assignment
        .busy_slots_per_opu()
        .into_iter()
        .map(|b| {
            if makespan_slots > 0 {
                b as f64 / makespan_slots as f64
            } else {
                0.0
            }
        })
        .collect();
    let report = ThroughputReport {
        opus: pool.len(),
        baud_ghz: pool.baud_ghz(),
        slot_ns,
        tasks: assignment.tasks.len(),
        total_ops,
        makespan_slots,
        makespan_ns,
        achieved_tops,
        peak_tops_bound: pool.peak_tops_bound(),
        utilization,
        one_way_delay_ns: one_way,
        jobs: reports,
    };
    Ok((outcomes, report))
}

/// One row per job: `id,opu,start_ns,latency_ns,energy_pj`. Jobs spread
/// over several OPUs list them separated by `;`.
pub fn write_report_csv<W: Write>(out: W, report: &ThroughputReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "opu", "start_ns", "latency_ns", "energy_pj"])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
    for j in &report.jobs {
        let opus = j
            .opus
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            j.id.to_string(),
            opus,
            opt(j.start_ns),
            opt(j.latency_ns),
            format!("{:.3}", j.energy_pj),
        ])?;
    }
    w.flush()?;
    Ok(())
}
