use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{
    invalid, ConvolveSection, ImageSource, LoadedScenario, SweepAxis, ThroughputPoint,
};
use crate::cluster::{
    run_cluster, schedule_with, wavelength_allocate, write_report_csv, Job, JobKind, OpuPool,
    RunOptions, ThroughputReport,
};
use crate::convnet::{
    conv1d_via_opu, conv2d_via_opus, correlate2d_valid, evaluate_classifier, first_layer_trace,
    load_kernel_fixture, load_mnist, load_model, save_model, standard_kernels, train_toy_cnn,
    Dataset, FeatureMap, ModelExecution, NamedKernel, Split, ToyCnn,
};
use crate::energy::{total_power, write_power_csv, PowerFixture, Scope};
use crate::error::{Error, Result};
use crate::link::{ber_sweep, write_sweep_csv};
use crate::opu::{
    noise_sigma, op_precision, op_trials, peak_tops, read_vector_csv, write_trace_csv,
    ElementaryOp, Kernel, Opu, OpuConfig, OpuMode,
};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Power,
    Throughput,
}

impl std::str::FromStr for ReportKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(Self::Power),
            "throughput" => Ok(Self::Throughput),
            _ => Err(Error::param(
                "kind",
                format!("unknown report {s:?}; expected power or throughput"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Convolve,
    Sweep(Option<SweepAxis>),
    Report(Option<ReportKind>),
    RunCluster,
    TrainToy,
    Eval,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Convolve => "convolve",
            Self::Sweep(_) => "sweep",
            Self::Report(_) => "report",
            Self::RunCluster => "run-cluster",
            Self::TrainToy => "train-toy",
            Self::Eval => "eval",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub scenario_hash: String,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub artifacts: BTreeMap<String, PathBuf>,
    pub summary: Vec<String>,
    pub wall_clock_s: f64,
}

/// A scenario bound to an output directory and an effective seed.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub loaded: LoadedScenario,
    pub out_dir: PathBuf,
}

#[derive(Default)]
struct Output {
    artifacts: BTreeMap<String, PathBuf>,
    summary: Vec<String>,
}

impl Output {
    fn file(&mut self, ctx: &RunContext, name: &str) -> Result<BufWriter<File>> {
        let path = ctx.out_dir.join(name);
        self.artifacts.insert(name.to_string(), path.clone());
        Ok(BufWriter::new(File::create(path)?))
    }

    fn json<T: Serialize>(&mut self, ctx: &RunContext, name: &str, value: &T) -> Result<()> {
        let mut w = self.file(ctx, name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn note(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }
}

impl RunContext {
    /// `out` and `seed` override the scenario's values.
    pub fn new(mut loaded: LoadedScenario, out: Option<PathBuf>, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            loaded.scenario.seed = s;
        }
        let out_dir = out
            .or_else(|| loaded.scenario.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(&loaded.scenario.name));
        Self { loaded, out_dir }
    }

    pub fn seed(&self) -> u64 {
        self.loaded.scenario.seed
    }
}

/// Runs a command and writes `manifest.json` beside its artifacts.
pub fn execute(command: Command, ctx: &RunContext) -> Result<RunManifest> {
    let t0 = Instant::now();
    std::fs::create_dir_all(&ctx.out_dir)?;
    let mut out = Output::default();
    match command {
        Command::Convolve => cmd_convolve(ctx, &mut out)?,
        Command::Sweep(axis) => cmd_sweep(ctx, axis, &mut out)?,
        Command::Report(kind) => cmd_report(ctx, kind, &mut out)?,
        Command::RunCluster => cmd_run_cluster(ctx, &mut out)?,
        Command::TrainToy => cmd_train_toy(ctx, &mut out)?,
        Command::Eval => cmd_eval(ctx, &mut out)?,
    }
    let manifest = RunManifest {
        scenario: ctx.loaded.scenario.name.clone(),
        scenario_hash: ctx.loaded.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.name().to_string(),
        seed: ctx.seed(),
        artifacts: out.artifacts,
        summary: out.summary,
        wall_clock_s: t0.elapsed().as_secs_f64(),
    };
    let mut w = BufWriter::new(File::create(ctx.out_dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(manifest)
}

fn with_mode(cfg: &OpuConfig, mode: OpuMode) -> OpuConfig {
    OpuConfig {
        mode,
        ..cfg.clone()
    }
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn write_map_csv<W: Write>(mut w: W, map: &[f64], width: usize) -> Result<()> {
    for row in map.chunks(width) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn read_map_csv(path: &Path) -> Result<FeatureMap> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut width = None;
    let mut height = 0;
    for rec in reader.records() {
        let rec = rec?;
        let row: Vec<f64> = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| invalid("convolve.image.path", e.to_string()))
            })
            .collect::<Result<_>>()?;
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(invalid("convolve.image.path", "rows differ in length"));
        }
        data.extend(row);
        height += 1;
    }
    FeatureMap::new(1, height, width.unwrap_or(0), data)
}

fn load_split(
    ctx: &RunContext,
    dir: &Option<PathBuf>,
    split: Split,
    limit: Option<usize>,
) -> Result<Dataset> {
    let d = load_mnist(&ctx.loaded.mnist_dir(dir), split)?;
    Ok(match limit {
        Some(n) => d.take(n),
        None => d,
    })
}

fn cmd_convolve(ctx: &RunContext, out: &mut Output) -> Result<()> {
    let sec = ctx
        .loaded
        .scenario
        .convolve
        .clone()
        .ok_or_else(|| invalid("convolve", "section is required"))?;
    let modes = [
        sec.kernel.is_some(),
        sec.kernels.is_some(),
        sec.elementary.is_some(),
    ];
    if modes.iter().filter(|&&m| m).count() != 1 {
        return Err(invalid(
            "convolve",
            "set exactly one of kernel, kernels or elementary",
        ));
    }
    let cfg = ctx.loaded.opu_config()?;
    if sec.kernel.is_some() {
        convolve_1d(ctx, &sec, &cfg, out)
    } else if sec.kernels.is_some() {
        convolve_2d(ctx, &sec, &cfg, out)
    } else {
        convolve_elementary(ctx, &sec, &cfg, out)
    }
}

fn convolve_1d(
    ctx: &RunContext,
    sec: &ConvolveSection,
    cfg: &OpuConfig,
    out: &mut Output,
) -> Result<()> {
    let weights = sec.kernel.clone().unwrap_or_default();
    let kernel = Kernel::new(weights).map_err(|e| invalid("convolve.kernel", e.to_string()))?;
    let used = cfg.used_input_ports.len();
    if kernel.len() > used {
        return Err(invalid(
            "convolve.kernel",
            format!("{} taps exceed the {used} used input ports", kernel.len()),
        ));
    }
    let input = match (&sec.input, &sec.input_csv) {
        (Some(v), None) => v.clone(),
        (None, Some(p)) => read_vector_csv(File::open(ctx.loaded.resolve(p))?)?,
        _ => {
            return Err(invalid(
                "convolve.input",
                "set exactly one of input or input_csv",
            ))
        }
    };
    if input.len() < kernel.len() {
        return Err(invalid(
            "convolve.input",
            format!("needs at least {} samples", kernel.len()),
        ));
    }
    let ideal = conv1d_via_opu(
        &Opu::new(with_mode(cfg, OpuMode::Ideal))?,
        &kernel,
        &input,
        0,
    )?;
    let noisy = conv1d_via_opu(
        &Opu::new(with_mode(cfg, OpuMode::Noisy))?,
        &kernel,
        &input,
        ctx.seed(),
    )?;
    let oracle: Vec<f64> = (0..=input.len() - kernel.len())
        .map(|i| {
            kernel
                .weights()
                .iter()
                .enumerate()
                .map(|(d, w)| w * input[i + d])
                .sum()
        })
        .collect();
    write_trace_csv(out.file(ctx, "convolve_1d.csv")?, &ideal, &noisy)?;
    let stats = serde_json::json!({
        "outputs": ideal.len(),
        "ideal_vs_oracle_max_abs": max_abs_diff(&ideal, &oracle),
        "noisy_rmse": rmse(&noisy, &ideal),
        "noisy_max_abs": max_abs_diff(&noisy, &ideal),
        "baud_ghz": cfg.baud_ghz,
    });
    out.json(ctx, "convolve_1d_summary.json", &stats)?;
    out.note(format!(
        "{} outputs, noisy RMSE {:.5}",
        ideal.len(),
        rmse(&noisy, &ideal)
    ));
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct KernelRow {
    kernel: String,
    abs_sum: f64,
    ideal_max_abs_error: f64,
    noisy_rmse: f64,
    normalized_rmse: f64,
    bound: f64,
    within_bound: bool,
}

fn select_kernels(ctx: &RunContext, sec: &ConvolveSection) -> Result<Vec<NamedKernel>> {
    let all = match &sec.kernel_fixture {
        Some(p) => load_kernel_fixture(&ctx.loaded.resolve(p))?,
        None => standard_kernels(),
    };
    let names = sec.kernels.clone().unwrap_or_default();
    if names.is_empty() {
        return Err(invalid("convolve.kernels", "list is empty"));
    }
    if names.len() == 1 && names[0] == "all" {
        return Ok(all);
    }
    names
        .iter()
        .map(|n| {
            all.iter()
                .find(|k| &k.name == n)
                .cloned()
                .ok_or_else(|| invalid("convolve.kernels", format!("no kernel named {n:?}")))
        })
        .collect()
}

fn convolve_2d(
    ctx: &RunContext,
    sec: &ConvolveSection,
    cfg: &OpuConfig,
    out: &mut Output,
) -> Result<()> {
    let kernels = select_kernels(ctx, sec)?;
    let image = match sec.image.clone().unwrap_or(ImageSource::Mnist {
        dir: None,
        split: Split::Test,
        index: 0,
    }) {
        ImageSource::Mnist { dir, split, index } => {
            let d = load_split(ctx, &dir, split, None)?;
            d.images
                .get(index)
                .map(|i| i.as_map().clone())
                .ok_or_else(|| {
                    invalid("convolve.image.index", format!("only {} images", d.len()))
                })?
        }
        ImageSource::Csv { path } => read_map_csv(&ctx.loaded.resolve(&path))?,
    };
    let used = cfg.used_input_ports.len();
    let pool = ctx.loaded.opu().pool_size.max(1);
    let ideal_pool: Vec<Opu> = (0..pool)
        .map(|_| Opu::new(with_mode(cfg, OpuMode::Ideal)))
        .collect::<Result<_>>()?;
    let noisy_pool: Vec<Opu> = (0..pool)
        .map(|_| Opu::new(with_mode(cfg, OpuMode::Noisy)))
        .collect::<Result<_>>()?;
    let sigma = noise_sigma(&cfg.noise, cfg.baud_ghz);
    let (h, w) = (image.height, image.width);

    let mut rows = Vec::new();
    for (i, nk) in kernels.iter().enumerate() {
        let k = nk.weights.clone();
        if k.size() > used {
            return Err(invalid(
                "convolve.kernels",
                format!(
                    "{} rows of {} taps exceed the {used} used input ports",
                    nk.name,
                    k.size()
                ),
            ));
        }
        let oracle = correlate2d_valid(image.data(), h, w, &k)?;
        let ideal = conv2d_via_opus(&ideal_pool, image.data(), h, w, &k, 0)?;
        let noisy = conv2d_via_opus(
            &noisy_pool,
            image.data(),
            h,
            w,
            &k,
            seed::derive(ctx.seed(), &[i as u64]),
        )?;
        write_map_csv(
            out.file(ctx, &format!("feature_{}.csv", nk.name))?,
            &noisy,
            w - k.size() + 1,
        )?;
        let abs_sum = k.abs_sum();
        let e = rmse(&noisy, &oracle);
        let normalized = if abs_sum > 0.0 { e / abs_sum } else { e };
        rows.push(KernelRow {
            kernel: nk.name.clone(),
            abs_sum,
            ideal_max_abs_error: max_abs_diff(&ideal, &oracle),
            noisy_rmse: e,
            normalized_rmse: normalized,
            bound: 3.0 * sigma,
            within_bound: normalized <= 3.0 * sigma,
        });
    }
    let mut w = csv::Writer::from_writer(out.file(ctx, "kernels_summary.csv")?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let ok = rows.iter().filter(|r| r.within_bound).count();
    out.note(format!(
        "{ok}/{} kernels within 3 sigma at {} GBd",
        rows.len(),
        cfg.baud_ghz
    ));
    Ok(())
}

fn convolve_elementary(
    ctx: &RunContext,
    sec: &ConvolveSection,
    cfg: &OpuConfig,
    out: &mut Output,
) -> Result<()> {
    let el = sec.elementary.clone().expect("checked by caller");
    if el.trials < 2 {
        return Err(invalid("convolve.elementary.trials", "need at least two"));
    }
    let opu = Opu::new(with_mode(cfg, OpuMode::Noisy))?;
    let trials = op_trials(&opu, el.op, el.trials, ctx.seed())?;
    let ideal: Vec<f64> = trials.iter().map(|t| t.ideal * el.scale).collect();
    let noisy: Vec<f64> = trials.iter().map(|t| t.measured * el.scale).collect();
    write_trace_csv(
        out.file(ctx, &format!("elementary_{}.csv", el.op.name()))?,
        &ideal,
        &noisy,
    )?;

    let errs: Vec<f64> = noisy.iter().zip(&ideal).map(|(a, b)| a - b).collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    let std =
        (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errs.len() - 1) as f64).sqrt();
    let precision = op_precision(
        &with_mode(cfg, OpuMode::Noisy),
        el.op,
        el.trials,
        ctx.seed(),
    )?;
    let stats = serde_json::json!({
        "op": el.op.name(),
        "trials": el.trials,
        "scale": el.scale,
        "baud_ghz": cfg.baud_ghz,
        "error_mean": mean,
        "error_std": std,
        "enob": precision.enob,
    });
    out.json(
        ctx,
        &format!("elementary_{}_summary.json", el.op.name()),
        &stats,
    )?;
    out.note(format!(
        "{}: error std {:.4}, ENOB {:.2} bits",
        el.op.name(),
        std,
        precision.enob
    ));
    Ok(())
}

fn cmd_sweep(ctx: &RunContext, axis: Option<SweepAxis>, out: &mut Output) -> Result<()> {
    let sec = ctx
        .loaded
        .scenario
        .sweep
        .clone()
        .ok_or_else(|| invalid("sweep", "section is required"))?;
    if sec.values.is_empty() {
        return Err(invalid("sweep.values", "sweep range is empty"));
    }
    match axis.unwrap_or(sec.axis) {
        SweepAxis::Baud => {
            if sec.values.iter().any(|&b| !(b > 0.0)) {
                return Err(invalid("sweep.values", "baud must be positive"));
            }
            let cfg = with_mode(&ctx.loaded.opu_config()?, OpuMode::Noisy);
            let rows: Vec<Vec<f64>> = sec
                .values
                .par_iter()
                .map(|&baud| {
                    let c = OpuConfig {
                        baud_ghz: baud,
                        ..cfg.clone()
                    };
                    let mut row = vec![baud];
                    for (i, op) in ElementaryOp::ALL.into_iter().enumerate() {
                        row.push(
                            op_precision(
                                &c,
                                op,
                                sec.trials,
                                seed::derive(ctx.seed(), &[i as u64]),
                            )?
                            .enob,
                        );
                    }
                    Ok(row)
                })
                .collect::<Result<_>>()?;
            let mut w = csv::Writer::from_writer(out.file(ctx, "sweep_baud.csv")?);
            w.write_record(["baud_ghz", "multiply", "add", "subtract", "mac"])?;
            for r in &rows {
                w.write_record(r.iter().map(|v| v.to_string()))?;
                out.note(format!("{} GBd: add ENOB {:.2}", r[0], r[2]));
            }
            w.flush()?;
        }
        SweepAxis::Rop => {
            let link = ctx.loaded.scenario.link.clone().unwrap_or_default();
            let curve = link.curve.unwrap_or_default();
            let points: Vec<_> = sec
                .values
                .par_iter()
                .map(|&a| {
                    ber_sweep(
                        &link.model,
                        &link.pam,
                        &link.fec,
                        &curve,
                        &[a],
                        link.payload_bytes,
                        ctx.seed(),
                    )
                    .map(|mut v| v.remove(0))
                })
                .collect::<Result<_>>()?;
            write_sweep_csv(out.file(ctx, "sweep_rop.csv")?, &points)?;
            let budget = points
                .iter()
                .filter(|p| p.decoded)
                .map(|p| p.attenuation_db)
                .fold(f64::NAN, f64::max);
            out.note(format!("largest decoded attenuation {budget} dB"));
        }
        SweepAxis::Bits => {
            if sec.values.iter().any(|&b| b < 1.0 || b.fract() != 0.0) {
                return Err(invalid("sweep.values", "bits must be positive integers"));
            }
            let net = ctx.loaded.scenario.convnet.clone().unwrap_or_default();
            let model = obtain_model(ctx, &net)?;
            let test = load_split(ctx, &net.mnist_dir, Split::Test, net.test_images)?;
            let float = evaluate_classifier(&model, &test, ModelExecution::Float)?.accuracy;
            let seeds = sec.seeds.max(1);
            let rows: Vec<(u32, Vec<f64>)> = sec
                .values
                .par_iter()
                .map(|&b| {
                    let bits = b as u32;
                    let accs = (0..seeds)
                        .map(|s| {
                            let seed = seed::derive(ctx.seed(), &[s as u64]);
                            evaluate_classifier(&model, &test, ModelExecution::Bits { bits, seed })
                                .map(|e| e.accuracy)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok((bits, accs))
                })
                .collect::<Result<_>>()?;
            let mut w = csv::Writer::from_writer(out.file(ctx, "sweep_bits.csv")?);
            w.write_record([
                "bits",
                "mean_accuracy",
                "min_accuracy",
                "max_accuracy",
                "float_accuracy",
            ])?;
            for (bits, accs) in &rows {
                let mean = accs.iter().sum::<f64>() / accs.len() as f64;
                let lo = accs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                w.write_record([
                    bits.to_string(),
                    mean.to_string(),
                    lo.to_string(),
                    hi.to_string(),
                    float.to_string(),
                ])?;
                out.note(format!("{bits} bits: {:.2}%", 100.0 * mean));
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn cmd_report(ctx: &RunContext, kind: Option<ReportKind>, out: &mut Output) -> Result<()> {
    let s = &ctx.loaded.scenario;
    let kind = kind.unwrap_or(if s.energy.is_some() || s.throughput.is_none() {
        ReportKind::Power
    } else {
        ReportKind::Throughput
    });
    match kind {
        ReportKind::Power => {
            let sec = s.energy.clone().unwrap_or(super::scenario::EnergySection {
                fixture: None,
                tops: 3.6,
            });
            let fixture = match &sec.fixture {
                Some(p) => PowerFixture::load(&ctx.loaded.resolve(p))?,
                None => PowerFixture::default_fixture(),
            };
            let reports = Scope::ALL
                .iter()
                .filter(|sc| fixture.bom.counts(**sc).is_some())
                .map(|&sc| total_power(&fixture.table, &fixture.bom, sc)?.with_throughput(sec.tops))
                .collect::<Result<Vec<_>>>()?;
            out.json(ctx, "power_report.json", &reports)?;
            write_power_csv(
                out.file(ctx, "power_report.csv")?,
                &fixture.table,
                &fixture.bom,
                &reports,
            )?;
            for r in &reports {
                out.note(format!(
                    "{}: {:.2} mW, {:.2} mW/TOPS",
                    r.scope.name(),
                    r.total_mw,
                    r.efficiency_mw_per_tops.unwrap_or(f64::NAN)
                ));
            }
        }
        ReportKind::Throughput => {
            let sec = s.throughput.clone().unwrap_or_default();
            let points = if sec.points.is_empty() {
                vec![
                    ThroughputPoint {
                        ports: 8,
                        k: 3,
                        baud_ghz: 10.0,
                    },
                    ThroughputPoint {
                        ports: 8,
                        k: 3,
                        baud_ghz: 50.0,
                    },
                ]
            } else {
                sec.points.clone()
            };
            let mut w = csv::Writer::from_writer(out.file(ctx, "peak_tops.csv")?);
            w.write_record(["ports", "k", "baud_ghz", "peak_tops"])?;
            let mut table = Vec::new();
            for (i, p) in points.iter().enumerate() {
                let t = peak_tops(p.ports, p.k, p.baud_ghz)
                    .map_err(|e| invalid(&format!("throughput.points[{i}]"), e.to_string()))?;
                w.write_record([
                    p.ports.to_string(),
                    p.k.to_string(),
                    p.baud_ghz.to_string(),
                    t.to_string(),
                ])?;
                table.push(serde_json::json!({"ports": p.ports, "k": p.k, "baud_ghz": p.baud_ghz, "peak_tops": t}));
                out.note(format!(
                    "({}, {}, {} GHz): {} TOPS",
                    p.ports, p.k, p.baud_ghz, t
                ));
            }
            w.flush()?;
            let mut report = serde_json::json!({ "peak": table });
            if let Some(p) = &sec.cluster_report {
                let path = ctx.loaded.resolve(p);
                if path.exists() {
                    let run: ClusterRunFile = serde_json::from_reader(File::open(path)?)?;
                    report["cluster"] = serde_json::json!({
                        "opus": run.throughput.opus,
                        "achieved_tops": run.throughput.achieved_tops,
                        "peak_tops_bound": run.throughput.peak_tops_bound,
                    });
                    out.note(format!(
                        "cluster achieved {:.4} TOPS",
                        run.throughput.achieved_tops
                    ));
                }
            }
            out.json(ctx, "throughput_report.json", &report)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClusterRunFile {
    throughput: ThroughputReport,
    channels: Vec<crate::cluster::EdgeChannel>,
}

fn cmd_run_cluster(ctx: &RunContext, out: &mut Output) -> Result<()> {
    let sec = ctx
        .loaded
        .scenario
        .cluster
        .clone()
        .ok_or_else(|| invalid("cluster", "section is required"))?;
    if sec.opus == 0 {
        return Err(invalid("cluster.opus", "must be at least 1"));
    }
    let cfg = ctx.loaded.opu_config()?;
    let pool = OpuPool::uniform(cfg, sec.opus)?;
    let mut jobs = sec.jobs.clone();
    if let Some(g) = &sec.generate {
        if g.kernel_len == 0 || g.input_len < g.kernel_len {
            return Err(invalid(
                "cluster.generate",
                "need 1 <= kernel_len <= input_len",
            ));
        }
        let first = jobs.iter().map(|j| j.id + 1).max().unwrap_or(0);
        let mut rng = seed::rng(seed::derive(ctx.seed(), &[0x6a6f6273]));
        for i in 0..g.count {
            let kernel = Kernel::new(
                (0..g.kernel_len)
                    .map(|_| rng.random_range(-1.0..=1.0))
                    .collect(),
            )?;
            let input = (0..g.input_len)
                .map(|_| rng.random_range(0.0..=1.0))
                .collect();
            jobs.push(Job {
                origin_edge: i % g.edges.max(1),
                submit_time_ns: i as f64 * g.interval_ns,
                ..Job::new(first + i as u64, JobKind::Conv1d { kernel, input })
            });
        }
    }
    let assignment = schedule_with(&jobs, &pool, &sec.policy)?;
    let link = ctx.loaded.scenario.link.clone().unwrap_or_default();
    let options = RunOptions {
        run_seed: ctx.seed(),
        opu_power_mw: sec.opu_power_mw,
    };
    let (outcomes, report) = run_cluster(&assignment, &pool, &jobs, &link.model, &options)?;
    let edges = jobs.iter().map(|j| j.origin_edge + 1).max().unwrap_or(0);
    let channels = wavelength_allocate(&pool.plan(sec.plan_kernel_len)?, edges)?;

    let file = ClusterRunFile {
        throughput: report,
        channels,
    };
    out.json(ctx, "cluster_report.json", &file)?;
    write_report_csv(out.file(ctx, "cluster_jobs.csv")?, &file.throughput)?;
    out.json(ctx, "cluster_outputs.json", &outcomes)?;
    let mut w = csv::Writer::from_writer(out.file(ctx, "cluster_assignment.csv")?);
    w.write_record(["job", "task", "opu", "ready_slot", "start_slot", "end_slot"])?;
    for t in &assignment.tasks {
        w.write_record([
            t.task.job_id.to_string(),
            t.task.index.to_string(),
            t.opu.to_string(),
            t.ready_slot.to_string(),
            t.start_slot.to_string(),
            t.end_slot.to_string(),
        ])?;
    }
    w.flush()?;
    let failed = outcomes.iter().filter(|o| o.error.is_some()).count();
    out.note(format!(
        "{} jobs ({failed} failed), {} tasks, {:.4} TOPS of {:.4} peak",
        jobs.len(),
        file.throughput.tasks,
        file.throughput.achieved_tops,
        file.throughput.peak_tops_bound
    ));
    Ok(())
}

fn obtain_model(ctx: &RunContext, net: &super::scenario::ConvnetSection) -> Result<ToyCnn> {
    if let Some(p) = &net.model {
        let path = ctx.loaded.resolve(p);
        if path.exists() {
            return load_model(&path);
        }
    }
    let train = load_split(ctx, &net.mnist_dir, Split::Train, net.train_images)?;
    train_toy_cnn(&train, &net.train)
}

fn cmd_train_toy(ctx: &RunContext, out: &mut Output) -> Result<()> {
    let net = ctx.loaded.scenario.convnet.clone().unwrap_or_default();
    let train = load_split(ctx, &net.mnist_dir, Split::Train, net.train_images)?;
    let model = train_toy_cnn(&train, &net.train)?;
    let path = ctx.out_dir.join("toy_cnn.ocnn");
    save_model(&path, &model)?;
    out.artifacts.insert("toy_cnn.ocnn".into(), path);
    let test = load_split(ctx, &net.mnist_dir, Split::Test, net.test_images)?;
    let eval = evaluate_classifier(&model, &test, ModelExecution::Float)?;
    out.json(
        ctx,
        "train_summary.json",
        &serde_json::json!({
            "train_images": train.len(),
            "test_images": test.len(),
            "config": net.train,
            "float_accuracy": eval.accuracy,
        }),
    )?;
    out.note(format!(
        "trained on {} images, float accuracy {:.2}%",
        train.len(),
        100.0 * eval.accuracy
    ));
    Ok(())
}

fn cmd_eval(ctx: &RunContext, out: &mut Output) -> Result<()> {
    let net = ctx.loaded.scenario.convnet.clone().unwrap_or_default();
    let model = obtain_model(ctx, &net)?;
    let test = load_split(ctx, &net.mnist_dir, Split::Test, net.test_images)?;
    let float = evaluate_classifier(&model, &test, ModelExecution::Float)?;
    let mut report = serde_json::json!({
        "images": test.len(),
        "float_accuracy": float.accuracy,
        "confusion": float.confusion,
        "class_counts": test.class_counts(),
    });
    out.note(format!(
        "float accuracy {:.2}% on {} images",
        100.0 * float.accuracy,
        test.len()
    ));

    if net.opu_images > 0 || net.first_layer_images > 0 {
        let cfg = ctx.loaded.opu_config()?;
        let pool: Vec<Opu> = (0..ctx.loaded.opu().pool_size.max(1))
            .map(|_| Opu::new(cfg.clone()))
            .collect::<Result<_>>()?;
        if net.opu_images > 0 {
            let subset = test.take(net.opu_images);
            let e = evaluate_classifier(
                &model,
                &subset,
                ModelExecution::Opu {
                    opus: &pool,
                    seed: ctx.seed(),
                },
            )?;
            report["opu_images"] = subset.len().into();
            report["opu_accuracy"] = e.accuracy.into();
            out.note(format!(
                "OPU first layer: {:.2}% on {} images",
                100.0 * e.accuracy,
                subset.len()
            ));
        }
        if net.first_layer_images > 0 {
            let imgs: Vec<&FeatureMap> = test
                .images
                .iter()
                .take(net.first_layer_images)
                .map(|i| i.as_map())
                .collect();
            let trace = first_layer_trace(&model, &imgs, &pool, ctx.seed())?;
            let (a, b) = trace.normalized();
            write_trace_csv(out.file(ctx, "first_layer_trace.csv")?, &a, &b)?;
            let r = trace.normalized_rmse();
            report["first_layer_rmse"] = r.into();
            out.note(format!("first-layer normalized RMSE {r:.4}"));
        }
    }
    out.json(ctx, "eval.json", &report)?;
    Ok(())
}
