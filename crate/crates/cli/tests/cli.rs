use std::path::Path;
use std::process::{Command, Output};

fn qnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnet")).args(args).output().unwrap()
}

fn out_arg(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn out_of_range_rho_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qnet(&["null-sim", "--rho", "1.5", "--out", out_arg(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rho must lie in [0, 1], got 1.5"));
}

#[test]
fn unknown_flags_and_bad_values_exit_2() {
    assert_eq!(qnet(&["null-sim", "--rhoo", "0.2"]).status.code(), Some(2));
    assert_eq!(qnet(&["exp1", "--graph", "ws"]).status.code(), Some(2));
    assert_eq!(
        qnet(&["null-sim", "--policy", "binomial:p_min=2"]).status.code(),
        Some(2)
    );
    assert_eq!(qnet(&["theory-check", "--tolerance", "speed=1"]).status.code(), Some(2));
}

#[test]
fn null_sim_writes_expected_files_and_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qnet(&[
        "null-sim",
        "-T",
        "1050",
        "-r",
        "3",
        "--snapshot-every",
        "100",
        "--seed",
        "1",
        "--out",
        out_arg(tmp.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let read = |p: &str| std::fs::read_to_string(tmp.path().join(p)).unwrap();
    let mean = read("mean.csv");
    let lines: Vec<&str> = mean.lines().collect();
    assert_eq!(lines[0], "t,M,V,A_mean,S_mean,d_mean");
    assert_eq!(lines.len() - 1, 1050usize.div_ceil(100) + 1);
    assert!(lines[1].starts_with("0,1,2,0,"));
    let theory = read("theory.csv");
    let t_mean: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    let t_theory: Vec<&str> = theory.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(t_mean, t_theory);
    for i in 0..3 {
        assert_eq!(read(&format!("replicates/rep_{i:04}.csv")).lines().count(), lines.len());
    }
    assert!(read("degrees.csv").starts_with("k,count,ccdf\n"));
    let summary: serde_json::Value = serde_json::from_str(&read("summary.json")).unwrap();
    assert_eq!(summary["config"]["replicates"], 3);
}

#[test]
fn theory_check_exit_codes_follow_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_arg(tmp.path());
    let strict = qnet(&[
        "theory-check",
        "-T",
        "2000",
        "-r",
        "10",
        "--tolerance",
        "all=0",
        "--out",
        dir,
    ]);
    assert_eq!(strict.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    for check in report["checks"].as_array().unwrap() {
        assert_eq!(check["verdict"], "fail");
        assert!(check["delta"].as_f64().unwrap() > 0.0);
    }

    let frozen = qnet(&["theory-check", "-T", "500", "-r", "2", "--rho", "0", "--out", dir]);
    assert_eq!(frozen.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&frozen.stdout);
    assert!(stdout.contains("SKIP degree_tail_slope: eta = 0"), "{stdout}");
}

#[test]
fn flags_override_config_file_values() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("run.conf");
    std::fs::write(
        &conf,
        "# null run\nrho = 0.4\ngamma=0.5\nsteps = 300\nreplicates = 2\nsnapshot_every = 100\n",
    )
    .unwrap();
    let out = tmp.path().join("o");
    let run = qnet(&[
        "null-sim",
        "--config",
        conf.to_str().unwrap(),
        "--rho",
        "0.1",
        "--out",
        out_arg(&out),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["rho"], 0.1);
    assert_eq!(summary["config"]["steps"], 300);
    assert_eq!(summary["config"]["gamma"], 0.5);

    std::fs::write(&conf, "rho = 0.4\nstep = 300\n").unwrap();
    let bad = qnet(&["null-sim", "--config", conf.to_str().unwrap(), "--out", out_arg(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("run.conf:2: unknown field 'step'"));
}

#[test]
fn exp1_bundle_and_dataset_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let run = qnet(&[
        "exp1",
        "--graph",
        "er",
        "-n",
        "30",
        "-m",
        "60",
        "-T",
        "250",
        "-r",
        "2",
        "--out",
        out_arg(&a),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for label in ["random", "looping", "binomial", "thompson-phi", "thompson-phi-n"] {
        let series = std::fs::read_to_string(a.join(format!("{label}.csv"))).unwrap();
        assert_eq!(series.lines().next(), Some("t,f_nodes,f_edges,S_mean,d_mean,A_mean"));
        assert_eq!(series.lines().count() - 1, 3);
        let hist = std::fs::read_to_string(a.join(format!("{label}_hist.csv"))).unwrap();
        assert_eq!(hist.lines().next(), Some("n_answers,count"));
    }

    // Replaying the written dataset explicitly reproduces the synthetic run.
    let data = a.join("dataset.tsv");
    let b = tmp.path().join("b");
    let run = qnet(&[
        "exp1",
        "-n",
        "30",
        "-m",
        "60",
        "-T",
        "250",
        "-r",
        "2",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out_arg(&b),
    ]);
    assert!(run.status.success());
    assert_eq!(
        std::fs::read(a.join("thompson-phi-n.csv")).unwrap(),
        std::fs::read(b.join("thompson-phi-n.csv")).unwrap()
    );

    let mismatch = qnet(&[
        "exp1",
        "-n",
        "30",
        "-m",
        "59",
        "-T",
        "10",
        "-r",
        "1",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out_arg(&b),
    ]);
    assert_eq!(mismatch.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("60 questions"));

    std::fs::write(&data, "q1\t3\n").unwrap();
    let parse = qnet(&[
        "exp1",
        "-n",
        "2",
        "-m",
        "1",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out_arg(&b),
    ]);
    assert_eq!(parse.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("line 1"));
}
