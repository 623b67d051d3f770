use std::fs;
use std::process::{Command, Output};

fn optocloud(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optocloud"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn lists_bundled_scenarios() {
    let out = optocloud(&["scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["power_report", "cluster_pool", "fig5a_mnist"] {
        assert!(text.lines().any(|l| l == name), "{text}");
    }
}

#[test]
fn power_report_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("power");
    let out = optocloud(&[
        "report",
        "--kind",
        "power",
        "--scenario",
        "power_report",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["manifest.json", "power_report.json", "power_report.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn bad_config_exits_nonzero_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"name": "bad", "seed": 1, "opu": {"ports": 8, "baud": 10}}"#,
    )
    .unwrap();
    let out = optocloud(&["convolve", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && err.contains("baud"), "{err}");

    let out = optocloud(&["sweep", "--axis", "sideways", "--scenario", "power_report"]);
    assert!(!out.status.success());
    let out = optocloud(&["convolve", "--scenario", "no_such_scenario"]);
    assert_eq!(out.status.code(), Some(1));
}
