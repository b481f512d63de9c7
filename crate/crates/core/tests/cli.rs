use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn reduction(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reduction")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = r#"
[model]
kind = "finite_time"
sigma = 1.5
T = 2.0
steps = 256

[ensemble]
paths = 300
seed = 3

[spectrum]
levels = [[-1.0, 1], [0.5, 2]]
psi0 = [[0.6, 0.0], [0.0, 0.6], [0.52915026221291811, 0.0]]

[output]
products = ["trajectories", "summary", "verify"]
"#;

#[test]
fn simulate_writes_identical_files_for_any_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "3", "1"].iter().enumerate() {
        let out = tmp.path().join(format!("run{k}"));
        let o = reduction(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
        let files: Vec<Vec<u8>> = ["trajectories.csv", "summary.json", "report.json"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn seed_override_changes_the_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let read = |seed: &str| {
        let out = tmp.path().join(seed);
        reduction(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed]);
        fs::read_to_string(out.join("summary.json")).unwrap()
    };
    let a = read("1");
    assert!(a.contains("\"seed\": 1"));
    assert_ne!(a, read("2"));
}

#[test]
fn single_level_system_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[model]
kind = "asymptotic"
sigma = 1.0
t_end = 1.0
steps = 64

[ensemble]
paths = 50
seed = 1

[spectrum]
levels = [[0.3, 1]]
psi0 = [[0.0, 1.0]]
"#;
    let cfg = write_config(tmp.path(), "one.toml", text);
    let out = tmp.path().join("out");
    let o = reduction(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("report.json").exists());
}

#[test]
fn bad_config_exits_2_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &SMALL.replace("sigma = 1.5", "sigma = \"fast\""));
    let o = reduction(&["simulate", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn missing_config_exits_2() {
    let o = reduction(&["verify", "--config", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn subcommands_reject_the_wrong_model() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("o");
    let o = reduction(&["convergence", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("asymptotic"));

    let asym = SMALL.replace("kind = \"finite_time\"", "kind = \"asymptotic\"").replace("T = 2.0", "t_end = 2.0");
    let cfg = write_config(tmp.path(), "asym.toml", &asym);
    let o = reduction(&["timechange", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
