//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//!     cargo test --release --test acceptance

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use optocloud::cluster::{run_cluster, schedule, Assignment, Job, JobKind, OpuPool, RunOptions};
use optocloud::convnet::{
    conv2d_via_opus, correlate2d_valid, evaluate_classifier, first_layer_trace, load_mnist,
    standard_kernels, train_toy_cnn, FeatureMap, Kernel2d, ModelExecution, Split, ToyCnn,
};
use optocloud::energy::{efficiency, total_power, PowerFixture, Scope};
use optocloud::link::{
    ber_from_rop, transmit_payload, FecConfig, LinkModel, PamConfig, RopBerCurve,
};
use optocloud::opu::{
    measure_enob, noise_sigma, op_precision, op_trials, peak_tops, ElementaryOp, Kernel,
    NoiseModel, Opu, OpuConfig,
};
use optocloud::photonics::{awgr_output_port, AwgrSpec};
use optocloud::runner::{bundled_mnist_dir, LoadedScenario};
use optocloud::seed;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(t: Instant, limit_s: f64) -> Result<Duration, String> {
    let e = t.elapsed();
    ensure(
        e.as_secs_f64() < limit_s,
        format!("took {e:.1?}, limit {limit_s} s"),
    )?;
    Ok(e)
}

fn routing() -> Outcome {
    let t = Instant::now();
    let mut violations = 0usize;
    let mut checked = 0usize;
    for n in [2usize, 4, 8, 16] {
        let spec = AwgrSpec::new(n, 84.0, n).map_err(|e| e.to_string())?;
        let port = |p: usize, m: i64| awgr_output_port(&spec, p, m).unwrap();
        for p in 0..n {
            let mut row = vec![0; n];
            for m in 0..n as i64 {
                row[port(p, m)] += 1;
                for f in [-2i64, -1, 1, 2] {
                    violations += usize::from(port(p, m + f * n as i64) != port(p, m));
                }
                checked += 1;
            }
            violations += row.iter().filter(|&&c| c != 1).count();
        }
        for m in 0..n as i64 {
            let mut col = vec![0; n];
            (0..n).for_each(|p| col[port(p, m)] += 1);
            violations += col.iter().filter(|&&c| c != 1).count();
        }
    }
    ensure(violations == 0, format!("{violations} violations"))?;
    let e = within_time(t, 1.0)?;
    Ok(format!(
        "{checked} port/wavelength pairs, 0 violations, {e:.1?}"
    ))
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let mut rng = seed::rng(2);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in [4usize, 8, 16] {
        let opu = Opu::new(OpuConfig::new(n)).map_err(|e| e.to_string())?;
        for k in 1..=n {
            for _ in 0..200 {
                let w: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
                let y = opu
                    .convolve(&Kernel::new(w.clone()).unwrap(), &x, 0)
                    .map_err(|e| e.to_string())?;
                for (q, yq) in y.iter().enumerate() {
                    let cyclic: f64 = (0..k).map(|d| w[d] * x[(q + d) % n]).sum();
                    worst = worst.max((yq - cyclic).abs());
                }
                cases += 1;
            }
        }
    }
    ensure(worst < 1e-9, format!("max abs error {worst:e}"))?;
    let e = within_time(t, 10.0)?;
    Ok(format!("{cases} cases, max abs error {worst:.1e}, {e:.1?}"))
}

fn addition() -> Outcome {
    let t = Instant::now();
    let opu = Opu::new(OpuConfig::new(8).noisy(10.0)).map_err(|e| e.to_string())?;
    let trials = op_trials(&opu, ElementaryOp::Add, 4096, 6).map_err(|e| e.to_string())?;
    let errors: Vec<f64> = trials
        .iter()
        .map(|t| 7.0 * (t.measured - t.ideal))
        .collect();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let std =
        (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errors.len() - 1) as f64).sqrt();
    let enob = measure_enob(&errors, 14.0).map_err(|e| e.to_string())?;
    ensure((0.08..=0.12).contains(&std), format!("std {std:.4}"))?;
    ensure((7.0..=7.3).contains(&enob), format!("ENOB {enob:.3}"))?;
    let e = within_time(t, 10.0)?;
    Ok(format!("std {std:.4}, ENOB {enob:.3} bits, {e:.1?}"))
}

fn precision_anchors() -> Outcome {
    let t = Instant::now();
    let bauds = [10.0, 18.0, 26.0, 34.0, 42.0, 50.0];
    let mut parts = Vec::new();
    for op in ElementaryOp::ALL {
        let enobs = bauds
            .iter()
            .map(|&b| op_precision(&OpuConfig::new(8).noisy(b), op, 4096, 5).map(|p| p.enob))
            .collect::<optocloud::Result<Vec<f64>>>()
            .map_err(|e| e.to_string())?;
        let (lo, hi) = (enobs[0], enobs[5]);
        ensure(
            (7.0..=7.3).contains(&lo),
            format!("{} at 10 GBd: {lo:.3}", op.name()),
        )?;
        ensure(
            (5.3..=5.7).contains(&hi),
            format!("{} at 50 GBd: {hi:.3}", op.name()),
        )?;
        ensure(
            enobs.windows(2).all(|w| w[1] <= w[0]),
            format!("{} not monotone: {enobs:?}", op.name()),
        )?;
        parts.push(format!("{} {lo:.2}/{hi:.2}", op.name()));
    }
    let e = within_time(t, 30.0)?;
    Ok(format!("{}, {e:.1?}", parts.join(", ")))
}

fn throughput() -> Outcome {
    let a = peak_tops(8, 3, 10.0).map_err(|e| e.to_string())?;
    let b = peak_tops(8, 3, 50.0).map_err(|e| e.to_string())?;
    ensure(
        (a - 0.72).abs() < 1e-12 && (b - 3.6).abs() < 1e-12,
        format!("{a}, {b}"),
    )?;
    Ok(format!("{a} and {b} TOPS"))
}

fn power() -> Outcome {
    let f = PowerFixture::default_fixture();
    let mut parts = Vec::new();
    for (scope, want, eff) in [
        (Scope::ComputeOnly, 106.8, Some(29.67)),
        (Scope::ComputeControl, 426.92, Some(118.59)),
        (Scope::FullSystem, 614.36, None),
    ] {
        let total = total_power(&f.table, &f.bom, scope)
            .map_err(|e| e.to_string())?
            .total_mw;
        ensure(
            (total - want).abs() <= 0.01,
            format!("{}: {total}", scope.name()),
        )?;
        parts.push(format!("{total:.2} mW"));
        if let Some(eff) = eff {
            let got = efficiency(total, 3.6).map_err(|e| e.to_string())?;
            ensure(
                (got - eff).abs() <= 0.05,
                format!("{} efficiency {got}", scope.name()),
            )?;
            parts.push(format!("{got:.2} mW/TOPS"));
        }
    }
    Ok(parts.join(", "))
}

fn link_budget() -> Outcome {
    let t = Instant::now();
    let (link, pam, fec, curve) = (
        LinkModel::default(),
        PamConfig::default(),
        FecConfig::default(),
        RopBerCurve::default(),
    );
    let mut rng = seed::rng(4);
    let payload: Vec<u8> = (0..1 << 20).map(|_| rng.random()).collect();
    let mut budget = None;
    for a in 0..=8 {
        let (out, stats) = transmit_payload(
            &payload,
            &link.with_extra_attenuation(a as f64),
            &pam,
            &fec,
            &curve,
            a,
        )
        .map_err(|e| e.to_string())?;
        let exact = stats.decoded && out == payload;
        ensure(exact == (a <= 6), format!("{a} dB: decoded={exact}"))?;
        if exact {
            budget = Some(a);
        }
    }
    let bers: Vec<f64> = (0..20)
        .map(|i| ber_from_rop(&curve, -30.0 + 0.75 * i as f64, &pam))
        .collect();
    ensure(
        bers.windows(2).all(|w| w[1] < w[0]),
        "BER not strictly decreasing",
    )?;
    let e = within_time(t, 30.0)?;
    Ok(format!(
        "1 MiB decodes up to {} dB extra attenuation, {e:.1?}",
        budget.unwrap_or(0)
    ))
}

fn decomposition() -> Outcome {
    let mut rng = seed::rng(8);
    let ideal: Vec<Opu> = (0..3)
        .map(|_| Opu::new(OpuConfig::new(8)).unwrap())
        .collect();
    let mut worst = 0.0f64;
    for case in 0..50 {
        let k = Kernel2d::new(3, (0..9).map(|_| rng.random_range(-1.0..=1.0)).collect()).unwrap();
        let img: Vec<f64> = (0..256).map(|_| rng.random_range(0.0..=1.0)).collect();
        let got = conv2d_via_opus(&ideal, &img, 16, 16, &k, case).map_err(|e| e.to_string())?;
        for y in 0..14 {
            for x in 0..14 {
                let direct: f64 = (0..9)
                    .map(|i| k.weights()[i] * img[(y + i / 3) * 16 + x + i % 3])
                    .sum();
                worst = worst.max((got[y * 14 + x] - direct).abs());
            }
        }
    }
    ensure(worst < 1e-9, format!("recomposition error {worst:e}"))?;

    let sigma = noise_sigma(&NoiseModel::default(), 10.0);
    let noisy: Vec<Opu> = (0..3)
        .map(|_| Opu::new(OpuConfig::new(8).noisy(10.0)).unwrap())
        .collect();
    let test = load_mnist(&bundled_mnist_dir(), Split::Test).map_err(|e| e.to_string())?;
    let img = test.images[0].as_map();
    let mut max_norm = 0.0f64;
    for (i, nk) in standard_kernels().iter().enumerate() {
        let want = correlate2d_valid(img.data(), 28, 28, &nk.weights).map_err(|e| e.to_string())?;
        let got = conv2d_via_opus(&noisy, img.data(), 28, 28, &nk.weights, 7 + i as u64)
            .map_err(|e| e.to_string())?;
        let rmse = (got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / want.len() as f64)
            .sqrt();
        let norm = rmse / nk.weights.abs_sum();
        ensure(
            norm <= 3.0 * sigma,
            format!("{}: {norm:.4} > {:.4}", nk.name, 3.0 * sigma),
        )?;
        max_norm = max_norm.max(norm);
    }
    Ok(format!(
        "recomposition error {worst:.1e}; worst kernel RMSE {max_norm:.4} <= {:.4}",
        3.0 * sigma
    ))
}

fn train_model() -> Result<ToyCnn, String> {
    let cfg = LoadedScenario::load("fig5a_mnist")
        .map_err(|e| e.to_string())?
        .scenario
        .convnet
        .unwrap_or_default()
        .train;
    let train = load_mnist(&bundled_mnist_dir(), Split::Train).map_err(|e| e.to_string())?;
    train_toy_cnn(&train, &cfg).map_err(|e| e.to_string())
}

fn first_layer(model: &ToyCnn) -> Outcome {
    let test = load_mnist(&bundled_mnist_dir(), Split::Test).map_err(|e| e.to_string())?;
    let images: Vec<&FeatureMap> = test.images[..4].iter().map(|i| i.as_map()).collect();
    let opus: Vec<Opu> = (0..3)
        .map(|_| Opu::new(OpuConfig::new(8).noisy(10.0)).unwrap())
        .collect();
    let rmse = first_layer_trace(model, &images, &opus, 9)
        .map_err(|e| e.to_string())?
        .normalized_rmse();
    ensure(rmse <= 0.05, format!("normalized RMSE {rmse:.4}"))?;
    Ok(format!("normalized RMSE {rmse:.4} over 4 images"))
}

fn classification(model: &ToyCnn, started: Instant) -> Outcome {
    let test = load_mnist(&bundled_mnist_dir(), Split::Test)
        .map_err(|e| e.to_string())?
        .take(1000);
    let eval = |ex| evaluate_classifier(model, &test, ex).map_err(|e| e.to_string());
    let float = eval(ModelExecution::Float)?;
    ensure(
        float.accuracy >= 0.90,
        format!("float accuracy {:.4}", float.accuracy),
    )?;
    let rows: Vec<usize> = float.confusion.iter().map(|r| r.iter().sum()).collect();
    ensure(
        rows == test.class_counts(),
        "confusion rows differ from class counts",
    )?;
    let mut means = Vec::new();
    for bits in 2..=8u32 {
        let mut sum = 0.0;
        for seed in 0..5 {
            let e = eval(ModelExecution::Bits { bits, seed })?;
            if bits >= 7 {
                ensure(
                    (e.accuracy - float.accuracy).abs() <= 0.02,
                    format!(
                        "{bits} bits seed {seed}: {:.4} vs {:.4}",
                        e.accuracy, float.accuracy
                    ),
                )?;
            }
            sum += e.accuracy;
        }
        means.push(sum / 5.0);
    }
    ensure(
        means.windows(2).all(|w| w[1] >= w[0]),
        format!("means not nondecreasing: {means:?}"),
    )?;
    let e = within_time(started, 300.0)?;
    let shown: Vec<String> = means.iter().map(|m| format!("{:.1}", 100.0 * m)).collect();
    Ok(format!(
        "float {:.1}%, 2..8 bits [{}]%, {e:.1?} with training",
        100.0 * float.accuracy,
        shown.join(" ")
    ))
}

fn random_jobs(s: u64) -> Vec<Job> {
    let mut rng = seed::rng(s);
    (0..rng.random_range(1..40u64))
        .map(|id| {
            let kind = if rng.random_bool(0.5) {
                let k = rng.random_range(1..=4);
                JobKind::Conv1d {
                    kernel: Kernel::new((0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
                        .unwrap(),
                    input: (0..rng.random_range(k..=24))
                        .map(|_| rng.random_range(0.0..1.0))
                        .collect(),
                }
            } else {
                let (h, w) = (rng.random_range(3..=8), rng.random_range(3..=12));
                JobKind::Conv2d {
                    kernel: Kernel2d::new(3, (0..9).map(|_| rng.random_range(-1.0..1.0)).collect())
                        .unwrap(),
                    image: FeatureMap::new(
                        1,
                        h,
                        w,
                        (0..h * w).map(|_| rng.random_range(0.0..1.0)).collect(),
                    )
                    .unwrap(),
                }
            };
            let mut job = Job::new(id, kind);
            job.submit_time_ns = rng.random_range(0..6) as f64;
            job
        })
        .collect()
}

fn idle_while_ready(a: &Assignment) -> usize {
    let mut idle = 0;
    for (i, t) in a.tasks.iter().enumerate() {
        for opu in 0..a.opu_count {
            let mut spans: Vec<(u64, u64)> = a.tasks[..i]
                .iter()
                .filter(|o| o.opu == opu)
                .map(|o| (o.start_slot, o.end_slot))
                .collect();
            spans.sort();
            let mut covered = t.ready_slot;
            for (s, e) in spans {
                if s <= covered {
                    covered = covered.max(e);
                }
            }
            idle += usize::from(covered < t.start_slot);
        }
    }
    idle
}

fn cluster() -> Outcome {
    let link = LinkModel::default();
    let noisy = OpuPool::uniform(OpuConfig::new(8).noisy(10.0), 4).map_err(|e| e.to_string())?;
    let jobs = random_jobs(99);
    let opts = RunOptions {
        run_seed: 11,
        ..RunOptions::default()
    };
    let render = || -> Result<String, String> {
        let a = schedule(&jobs, &noisy).map_err(|e| e.to_string())?;
        let (outs, report) =
            run_cluster(&a, &noisy, &jobs, &link, &opts).map_err(|e| e.to_string())?;
        Ok(serde_json::to_string(&outs).unwrap() + &report.to_json().map_err(|e| e.to_string())?)
    };
    ensure(
        render()? == render()?,
        "reports differ between identical runs",
    )?;

    let mut idle = 0;
    for s in 0..100 {
        let pool = OpuPool::uniform(OpuConfig::new(8), 1 + s as usize % 5).unwrap();
        let a = schedule(&random_jobs(s), &pool).map_err(|e| e.to_string())?;
        a.check().map_err(|e| e.to_string())?;
        idle += idle_while_ready(&a);
    }
    ensure(
        idle == 0,
        format!("{idle} idle OPU intervals with ready tasks"),
    )?;

    let pool = OpuPool::uniform(OpuConfig::new(8), 5).unwrap();
    let mut rng = seed::rng(1);
    let mut last = 0.0;
    for count in [10u64, 50, 100] {
        let jobs: Vec<Job> = (0..count)
            .map(|id| {
                Job::new(
                    id,
                    JobKind::Conv1d {
                        kernel: Kernel::new((0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
                            .unwrap(),
                        input: (0..8).map(|_| rng.random_range(0.0..1.0)).collect(),
                    },
                )
            })
            .collect();
        let a = schedule(&jobs, &pool).map_err(|e| e.to_string())?;
        last = run_cluster(&a, &pool, &jobs, &link, &RunOptions::default())
            .map_err(|e| e.to_string())?
            .1
            .achieved_tops;
    }
    ensure(
        (last / 3.6 - 1.0).abs() <= 0.05,
        format!("100 jobs: {last:.3} TOPS"),
    )?;
    Ok(format!(
        "byte-identical reruns, 0 idle intervals over 100 job sets, {last:.3} TOPS at 100 jobs"
    ))
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default())
    });
    match r {
        Ok(detail) => {
            println!("PASS {id:>2} {name}: {detail}");
            true
        }
        Err(why) => {
            println!("FAIL {id:>2} {name}: {why}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= report(1, "routing law", routing);
    ok &= report(2, "convolution oracle", oracle_equivalence);
    ok &= report(3, "addition precision", addition);
    ok &= report(4, "precision anchors", precision_anchors);
    ok &= report(5, "peak throughput", throughput);
    ok &= report(6, "power totals", power);
    ok &= report(7, "link budget", link_budget);
    ok &= report(8, "2D decomposition", decomposition);
    let started = Instant::now();
    match train_model() {
        Ok(model) => {
            ok &= report(9, "first-layer fidelity", || first_layer(&model));
            ok &= report(10, "classification", || classification(&model, started));
        }
        Err(e) => {
            ok = false;
            println!("FAIL  9 first-layer fidelity: training failed: {e}");
            println!("FAIL 10 classification: training failed: {e}");
        }
    }
    ok &= report(11, "cluster", cluster);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
