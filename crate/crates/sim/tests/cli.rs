use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
[dataset]
kind = synth
classes = 3
train_per_class = 40
test_per_class = 20
dim = 4

[partition]
kind = dir
alpha = 1.0

[model]
hidden = 8

[federation]
strategy = sfedca
clients = 4
candidates = 3
selected = 2
rounds = 3
seed = 5

[training]
epochs = 1
batch_size = 16

[evaluation]
targets = 0.5, 0.99
";

fn sfedca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfedca")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_outputs(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read_to_string(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let res = sfedca(&["run", &cfg, "-o", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let files = read_outputs(&out);
    let names: Vec<_> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["credits.csv", "distribution.csv", "energy.csv", "history.csv", "summary.json"]);
    for (name, text) in &files {
        match name.as_str() {
            "history.csv" | "energy.csv" | "distribution.csv" => assert_eq!(text.lines().count(), 4, "{name}"),
            // S candidates per round
            "credits.csv" => assert_eq!(text.lines().count(), 1 + 3 * 3),
            _ => {}
        }
    }
    let summary: serde_json::Value = serde_json::from_str(&files[4].1).unwrap();
    assert_eq!(summary["rounds"], 3);
    assert_eq!(summary["strategy"], "sfedca");
    assert_eq!(summary["rounds_to_target"].as_array().unwrap().len(), 2);
    assert!(summary["total_pj"].as_f64().unwrap() > 0.0);
}

#[test]
fn reruns_are_byte_identical_and_seed_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let runs: Vec<_> = [("a", None), ("b", None), ("c", Some("6"))]
        .iter()
        .map(|(name, seed)| {
            let out = dir.path().join(name);
            let mut args = vec!["run", &cfg, "-o", out.to_str().unwrap()];
            if let Some(s) = seed {
                args.extend(["--seed", s]);
            }
            assert!(sfedca(&args).status.success());
            read_outputs(&out)
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_ne!(runs[0], runs[2]);
}

#[test]
fn dry_run_computes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let res = sfedca(&["run", &cfg, "-o", out.to_str().unwrap(), "--dry-run", "--seed", "9"]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("seed = 9"));
    assert!(text.contains("timesteps = 12"));
    assert!(!out.exists());
}

#[test]
fn config_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &TINY.replace("selected = 2", "selected = 20"));
    let res = sfedca(&["run", &cfg, "--dry-run"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("P ≤ S"));

    let res = sfedca(&["run", dir.path().join("absent.cfg").to_str().unwrap()]);
    assert!(!res.status.success());
}

#[test]
fn unwritable_output_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let res = sfedca(&["run", &cfg, "-o", blocker.join("out").to_str().unwrap()]);
    assert!(!res.status.success());
    assert_eq!(fs::read_to_string(&blocker).unwrap(), "");

    // a directory squatting on one output name
    let out = dir.path().join("out");
    fs::create_dir_all(out.join("summary.json")).unwrap();
    let res = sfedca(&["run", &cfg, "-o", out.to_str().unwrap()]);
    assert!(!res.status.success());
    assert_eq!(fs::read_dir(&out).unwrap().count(), 1);
}

#[test]
fn exported_csv_reproduces_the_synthetic_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let data = dir.path().join("data");
    assert!(sfedca(&["export", &cfg, "-o", data.to_str().unwrap()]).status.success());
    assert_eq!(fs::read_to_string(data.join("train.csv")).unwrap().lines().count(), 120);

    let csv_cfg = TINY.replace(
        "kind = synth\nclasses = 3\ntrain_per_class = 40\ntest_per_class = 20\ndim = 4",
        "kind = csv\ntrain_csv = data/train.csv\ntest_csv = data/test.csv",
    );
    let csv_path = dir.path().join("csv.cfg");
    fs::write(&csv_path, csv_cfg).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(sfedca(&["run", &cfg, "-o", a.to_str().unwrap()]).status.success());
    let res = sfedca(&["run", csv_path.to_str().unwrap(), "-o", b.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(fs::read(a.join("history.csv")).unwrap(), fs::read(b.join("history.csv")).unwrap());
}
