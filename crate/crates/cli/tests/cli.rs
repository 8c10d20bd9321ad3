use std::fs;
use std::process::Command as Proc;

use elmfin_cli::commands::pde::Preset;
use elmfin_cli::{run, Command, ErrorKind};

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_elmfin"))
}

#[test]
fn unknown_key_is_a_config_error() {
    let err = run(Command::TrainElm, None, &["nodez=10".into()]).unwrap_err();
    assert_eq!(err.kind, ErrorKind::Config);
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("nodes"), "{err}");
}

#[test]
fn binary_exits_with_two_on_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["train-elm", &format!("out_dir={}", dir.path().display()), "bogus=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["train-elm", "nodes=many"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn list_keys_shows_defaults() {
    let out = bin().args(["train-eir", "--list-keys"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("n_max") && text.contains("0.00577"), "{text}");
}

#[test]
fn config_file_then_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("elm");
    fs::write(
        &cfg,
        format!("# small run\nout_dir = {}\nn = 300\nnodes = 50  \n\nseed = 4\n", out.display()),
    )
    .unwrap();
    let path = run(Command::TrainElm, Some(&cfg), &["nodes=80".into()]).unwrap();
    assert_eq!(path, out);
    let echo = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(echo.contains("nodes = 80") && echo.contains("seed = 4") && echo.contains("n = 300"), "{echo}");

    // the echo reloads to the same config
    let again = dir.path().join("again");
    run(Command::TrainElm, Some(&out.join("config.txt")), &[format!("out_dir={}", again.display())]).unwrap();
    assert_eq!(fs::read(out.join("metrics.csv")).unwrap(), fs::read(again.join("metrics.csv")).unwrap());
}

#[test]
fn gen_heston_feeds_train_elm() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run(Command::GenHeston, None, &[format!("out_dir={}", dir.path().join("gen").display()), "n=300".into()]).unwrap();
    let data = gen.join("heston.csv");
    let header = fs::read_to_string(&data).unwrap();
    assert_eq!(header.lines().count(), 301);
    let elm = run(
        Command::TrainElm,
        None,
        &[format!("out_dir={}", dir.path().join("elm").display()), format!("data={}", data.display()), "nodes=100".into()],
    )
    .unwrap();
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(elm.join("summary.json")).unwrap()).unwrap();
    assert!(summary["test"]["rmse"].as_f64().unwrap() < 0.1);
    assert_eq!(fs::read_to_string(elm.join("predictions.csv")).unwrap().lines().count(), 61);
}

#[test]
fn small_runs_of_every_command_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| format!("out_dir={}", dir.path().join(name).display());
    let cases: Vec<(Command, &str, Vec<String>, &[&str])> = vec![
        (Command::TrainEir, "eir", vec!["n=300".into(), "n_max=30".into()], &["trace.csv", "metrics.csv"]),
        (Command::TrainGpr, "gpr", vec!["n=200".into()], &["metrics.csv"]),
        (
            Command::Bench,
            "bench",
            vec!["n=300".into(), "elm_nodes=50".into(), "sweep_nodes=20,40".into(), "sweep_scales=0.5,1".into(), "sweep_scale_nodes=20".into(), "sweep_seeds=1".into()],
            &["table1.csv", "sweep_best.csv"],
        ),
        (
            Command::SolvePde(Preset::Barrier),
            "barrier",
            vec!["nodes=200".into(), "interior=500".into(), "boundary=80".into(), "terminal=80".into()],
            &["solution.csv"],
        ),
        (Command::IvsFit, "ivs", vec!["chain_n=300".into()], &["quotes_clean.csv", "surface.csv", "rejections.csv"]),
        (Command::IvsAudit, "audit", vec!["surface=flat".into()], &["violations.csv", "differences.csv"]),
        (Command::ClassifyRun, "classify", vec!["days=3".into(), "initial_days=2".into()], &["daily_metrics.csv", "daily_timing.csv"]),
    ];
    for (cmd, name, mut kv, files) in cases {
        kv.push(out(name));
        let path = run(cmd, None, &kv).unwrap_or_else(|e| panic!("{name}: {e}"));
        for f in files.iter().chain(&["config.txt", "summary.json", "run.log"]) {
            assert!(path.join(f).is_file(), "{name}: missing {f}");
        }
    }
}

#[test]
fn identical_configs_give_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str| {
        run(
            Command::TrainEir,
            None,
            &[format!("out_dir={}", dir.path().join(name).display()), "n=300".into(), "n_max=25".into(), "k=4".into()],
        )
        .unwrap()
    };
    let (a, b) = (go("a"), go("b"));
    for f in ["trace.csv", "metrics.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
