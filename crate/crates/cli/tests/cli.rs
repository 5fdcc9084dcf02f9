use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_debatefs"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(["--config", "run.toml"])
        .args(args)
        .output()
        .unwrap()
}

fn setup(dir: &Path) {
    let mut csv = String::from("a,b,c,d,label\n");
    for i in 0..90 {
        let c = i % 3;
        let x = (i * 37 % 101) as f64 / 101.0;
        let y = (i * 53 % 97) as f64 / 97.0;
        writeln!(csv, "{},{},{},{},k{c}", c as f64 + x, y, x - c as f64, (i % 7) as f64).unwrap();
    }
    std::fs::write(dir.join("data.csv"), csv).unwrap();
    let script = serde_json::json!({
        "role_defaults": {
            "Refiner": "{\"score\": 0.8, \"reasoning\": \"r\"}",
            "Challenger": "{\"score\": 0.4, \"reasoning\": \"c\"}"
        },
        "responses": [
            {"role": "Refiner", "feature": "b", "response": "{\"score\": 0.2, \"reasoning\": \"weak\"}"}
        ],
        "default_response": "{\"score\": 0.5, \"reasoning\": \"d\"}"
    });
    std::fs::write(dir.join("script.json"), script.to_string()).unwrap();
    std::fs::write(
        dir.join("run.toml"),
        r#"dataset = "data.csv"
task_description = "toy"

[backend]
kind = "scripted"
script = "script.json"

[selection]
subset_sizes = [1, 2]

[evaluation.timing]
repetitions = 1
warmup = false

[[evaluation.classifiers]]
kind = "lr"
hyperparams = { iterations = 50 }
"#,
    )
    .unwrap();
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status,
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn full_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    assert!(stdout(&run(d, &["preprocess"])).contains("train"));
    let out = stdout(&run(d, &["--weights", "0.75,0.25", "deliberate"]));
    assert!(out.contains("features debated"));
    // b is the only feature the Refiner dislikes
    let last = out.lines().last().unwrap();
    assert!(last.contains(" b "), "{out}");
    stdout(&run(d, &["select-baseline"]));
    assert!(stdout(&run(d, &["evaluate"])).contains("result rows"));
    assert!(d.join("out/results.csv").exists());
    stdout(&run(d, &["report"]));
    assert!(d.join("out/report/summary.txt").exists());
    let replay = stdout(&run(d, &["replay-audit"]));
    assert!(replay.contains("0 mismatches"), "{replay}");
    assert!(stdout(&run(d, &["health"])).contains("ok"));
}

#[test]
fn bad_weights_fail_before_work() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let o = run(dir.path(), &["--weights", "0.9,0.3", "preprocess"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("w_r"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_is_reported() {
    let o = bin().arg("preprocess").output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config"));
}
