//! End-to-end smoke tests for the installed binary.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_expdpg"))
}

#[test]
fn riccati_convergence_exits_clean() {
    let out = bin()
        .args([
            "converge",
            "--problem",
            "riccati",
            "--method",
            "dpg3",
            "--T",
            "0.5",
            "--steps",
            "8,16,32,64",
            "--reference",
            "exact",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let slope: f64 = stdout
        .lines()
        .find(|l| l.starts_with("fitted slope:"))
        .and_then(|l| l.split_whitespace().nth(2))
        .unwrap()
        .parse()
        .unwrap();
    assert!((slope - 4.0).abs() <= 0.3, "slope {slope}");
}

#[test]
fn unknown_method_exits_one_and_lists_methods() {
    let out = bin()
        .args(["converge", "--problem", "riccati", "--method", "nosuch"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for name in ["euler-classic", "hybrid-euler", "dpg2", "dpg3", "linear-dpg-p0"] {
        assert!(stderr.contains(name), "missing {name} in: {stderr}");
    }
}

#[test]
fn unknown_problem_exits_one_and_lists_problems() {
    let out = bin()
        .args(["converge", "--problem", "nosuch", "--method", "dpg2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("riccati"), "{stderr}");
}

#[test]
fn order_condition_check_prints_table() {
    let out = bin().args(["check-order-conditions"]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("two-stage"), "{stdout}");
    assert!(stdout.contains("three-stage"), "{stdout}");
    assert!(stdout.contains("all residuals <= 1e-12"), "{stdout}");
}

#[test]
fn phi_self_check_passes() {
    let out = bin().args(["check-phi"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_emits_trajectory_csv() {
    let out = bin()
        .args([
            "solve", "--problem", "riccati", "--method", "dpg2", "--T", "0.5", "--steps", "100",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "t,u0");
    assert_eq!(lines.len(), 102); // header + 101 states
    let last: Vec<f64> = lines[101].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 0.5).abs() <= 1e-15);
    assert!((last[1] - 2.0).abs() <= 1e-6); // 1/(1 - 0.5)
}

#[test]
fn converge_outputs_are_byte_identical_across_runs() {
    let dir = std::env::temp_dir().join("expdpg-determinism");
    std::fs::create_dir_all(&dir).unwrap();
    let mut files = Vec::new();
    for run in 0..2 {
        let base = dir.join(format!("run{run}"));
        let out = bin()
            .args([
                "converge",
                "--problem",
                "riccati",
                "--method",
                "dpg2",
                "--T",
                "0.5",
                "--steps",
                "8,16,32",
                "--reference",
                "exact",
                "--out",
            ])
            .arg(&base)
            .output()
            .unwrap();
        assert!(out.status.success());
        files.push((
            std::fs::read(base.with_extension("csv")).unwrap(),
            std::fs::read(base.with_extension("plot.csv")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
    let csv = String::from_utf8(files[0].0.clone()).unwrap();
    assert!(csv.starts_with("N,h,error\n"), "{csv}");
}

#[test]
fn config_file_drives_a_run_and_flags_override() {
    let dir = std::env::temp_dir().join("expdpg-config");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("study.cfg");
    std::fs::write(
        &cfg,
        "problem = riccati\nmethod = dpg2\nT = 0.5\nsteps = 8,16,32\nreference = exact\n",
    )
    .unwrap();
    let out = bin()
        .args(["converge", "--config"])
        .arg(&cfg)
        .args(["--method", "dpg3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("method=dpg3"), "{stdout}");
    assert!(stdout.contains("problem=riccati"), "{stdout}");
}
