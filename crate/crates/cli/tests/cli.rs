//! End-to-end tests of the `localsde` binary: exit codes, artifact
//! determinism, and the documented output contracts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

const BIN: &str = env!("CARGO_BIN_EXE_localsde");

const TINY_CONFIG: &str = r#"
payoff = "piece all: 1/(1+(1*x)^2)"

[model]
x0 = 0.0
t = 1.0
phi = "piece all: 1"
pipeline = "legall"

[[model.measure.atoms]]
location = 0.0
weight = 0.5

[run]
n_list = [2, 4, 8]
m = 64
seed = 42
n_ref = 64
m_ref = 256
"#;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("LOCALSDE_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

#[test]
fn converge_bundle_is_byte_identical_across_reruns() {
    let tmp = tempdir().unwrap();
    let config = write_config(tmp.path(), "tiny.toml", TINY_CONFIG);
    for out_dir in ["run1", "run2"] {
        let out = run(&["converge", "--config", &config, "--out", out_dir], tmp.path());
        assert!(out.status.success(), "{}", stderr_of(&out));
    }
    let first = read_dir_sorted(&tmp.path().join("run1"));
    let second = read_dir_sorted(&tmp.path().join("run2"));
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "config.toml",
            "convergence.csv",
            "samples_n2.csv",
            "samples_n4.csv",
            "samples_n8.csv",
            "samples_ref_n64.csv",
            "summary.json",
            "transform.json",
        ]
    );
    assert_eq!(first, second);
}

#[test]
fn every_artifact_names_the_seed_and_config_hash() {
    let tmp = tempdir().unwrap();
    let config = write_config(tmp.path(), "tiny.toml", TINY_CONFIG);
    let out = run(&["converge", "--config", &config, "--out", "run"], tmp.path());
    assert!(out.status.success(), "{}", stderr_of(&out));
    for (name, bytes) in read_dir_sorted(&tmp.path().join("run")) {
        let text = String::from_utf8(bytes).unwrap();
        if name.ends_with(".json") {
            assert!(text.contains("\"seed\": 42"), "{name} lacks the seed");
            assert!(text.contains("\"config\": \"sha256:"), "{name} lacks the hash");
        } else {
            assert!(text.starts_with("# seed=42\n# config=sha256:"), "{name} header");
        }
    }
}

#[test]
fn validation_failures_are_listed_together_and_exit_2() {
    let tmp = tempdir().unwrap();
    let broken = TINY_CONFIG
        .replace("weight = 0.5", "weight = 1.0")
        .replace("m = 64", "m = 1");
    let config = write_config(tmp.path(), "broken.toml", &broken);
    let out = run(&["converge", "--config", &config], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = stderr_of(&out);
    assert!(stderr.contains("|weight| < 1"), "{stderr}");
    assert!(stderr.contains("run.m must be at least 2"), "{stderr}");
    assert!(stderr.contains("2 validation failure(s)"), "{stderr}");
    assert!(!tmp.path().join("out").exists(), "no artifacts on rejection");
}

#[test]
fn missing_config_and_unknown_example_exit_2() {
    let tmp = tempdir().unwrap();
    let out = run(&["converge", "--config", "absent.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["example", "nosuch"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("unknown example"), "names the failure");
}

#[test]
fn unwritable_output_directory_exits_1() {
    let tmp = tempdir().unwrap();
    let config = write_config(tmp.path(), "tiny.toml", TINY_CONFIG);
    fs::write(tmp.path().join("blocked"), b"a file, not a directory").unwrap();
    let out = run(
        &[
            "simulate", "--config", &config, "--n", "2", "--m", "4", "--out", "blocked",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_writes_one_terminal_value_per_line() {
    let tmp = tempdir().unwrap();
    let config = write_config(tmp.path(), "tiny.toml", TINY_CONFIG);
    let out = run(
        &[
            "simulate", "--config", &config, "--n", "8", "--m", "50", "--out", "sim",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = fs::read_to_string(tmp.path().join("sim/simulate_n8.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let meta: Vec<&str> = lines.iter().copied().filter(|l| l.starts_with('#')).collect();
    assert!(meta.contains(&"# n=8"), "{meta:?}");
    assert!(meta.contains(&"# m=50"), "{meta:?}");
    assert!(meta.contains(&"# side=right"), "{meta:?}");
    let data: Vec<&str> = lines
        .iter()
        .copied()
        .filter(|l| !l.starts_with('#') && *l != "terminal")
        .collect();
    assert_eq!(data.len(), 50);
    for value in data {
        value.parse::<f64>().unwrap();
    }
}

#[test]
fn left_limit_evaluation_changes_the_samples() {
    let tmp = tempdir().unwrap();
    let config = write_config(tmp.path(), "tiny.toml", TINY_CONFIG);
    let base = ["simulate", "--config", &config, "--n", "4", "--m", "20"];
    let right = run(&[&base[..], &["--out", "right"]].concat(), tmp.path());
    let left = run(
        &[&base[..], &["--left-limits", "--out", "left"]].concat(),
        tmp.path(),
    );
    assert!(right.status.success() && left.status.success());
    let right_csv = fs::read_to_string(tmp.path().join("right/simulate_n4.csv")).unwrap();
    let left_csv = fs::read_to_string(tmp.path().join("left/simulate_n4.csv")).unwrap();
    assert!(left_csv.contains("# side=left"));
    // The start point sits exactly on the coefficient's jump, so the two
    // one-sided readings drive every path apart from the first step on.
    assert_ne!(
        right_csv.lines().last().unwrap(),
        left_csv.lines().last().unwrap()
    );
}

#[test]
fn zero_measure_pipelines_coincide_exactly_on_shared_streams() {
    let tmp = tempdir().unwrap();
    let zero = TINY_CONFIG.replace(
        "[[model.measure.atoms]]\nlocation = 0.0\nweight = 0.5\n",
        "",
    );
    assert!(!zero.contains("atoms"), "measure section removed");
    let config = write_config(tmp.path(), "zero.toml", &zero);
    let out = run(
        &[
            "compare", "--config", &config, "--against", "drift-ac", "--n", "4", "--m", "200",
            "--out", "cmp",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("cmp/comparison.json")).unwrap())
            .unwrap();
    assert_eq!(doc["ks"]["statistic"], 0.0);
    assert_eq!(doc["payoff"]["diff"], 0.0);
    assert_eq!(doc["shared_streams"], true);
}

#[test]
fn atom_measure_refuses_the_drift_comparison() {
    let tmp = tempdir().unwrap();
    let config = write_config(tmp.path(), "tiny.toml", TINY_CONFIG);
    let out = run(
        &["compare", "--config", &config, "--against", "drift-ac"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("atomless"));
}

#[test]
fn zero_measure_constant_payoff_marks_every_point_error_free() {
    let tmp = tempdir().unwrap();
    let smoke = TINY_CONFIG
        .replace(
            "[[model.measure.atoms]]\nlocation = 0.0\nweight = 0.5\n",
            "",
        )
        .replace("piece all: 1/(1+(1*x)^2)", "piece all: 1");
    let config = write_config(tmp.path(), "smoke.toml", &smoke);
    let out = run(&["converge", "--config", &config, "--out", "run"], tmp.path());
    assert!(out.status.success(), "{}", stderr_of(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/summary.json")).unwrap())
            .unwrap();
    assert_eq!(doc["reference"]["method"], "closed-form");
    assert_eq!(doc["reference"]["value"], 1.0);
    let curve = doc["curve"].as_array().unwrap();
    assert_eq!(curve.len(), 3);
    for point in curve {
        assert_eq!(point["abs_error"], 0.0);
        assert_eq!(point["excluded"], true);
    }
    assert!(doc["fit"].is_null());
    assert!(doc["fit_note"].as_str().unwrap().contains("0 usable"));
    assert!(doc["diagnostics"]["psi_continuous"].as_bool().unwrap());
}

#[test]
fn emitted_example_config_reruns_to_the_same_bytes() {
    let tmp = tempdir().unwrap();
    let out = run(
        &[
            "example", "skewbm", "--alpha", "0.25", "--emit-config", "--out", "emitted",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let emitted = tmp.path().join("emitted/config.toml");
    let text = fs::read_to_string(&emitted).unwrap();
    assert!(text.starts_with("# seed=42\n# config=sha256:"));
    assert!(text.contains("weight = 0.25"));
    // Shrink the run so the round-trip check stays fast; the headers are
    // comments, so the reloaded config hashes to a new canonical form only
    // through the edited run section.
    let small = text
        .replace("m = 50000", "m = 40")
        .replace("m_ref = 200000", "m_ref = 80")
        .replace("n_ref = 1024", "n_ref = 256");
    let config = write_config(tmp.path(), "small.toml", &small);
    for dir in ["a", "b"] {
        let out = run(&["converge", "--config", &config, "--out", dir], tmp.path());
        assert!(out.status.success(), "{}", stderr_of(&out));
    }
    assert_eq!(
        read_dir_sorted(&tmp.path().join("a")),
        read_dir_sorted(&tmp.path().join("b"))
    );
    // The bundle's config.toml reloads to the identical canonical text.
    let rendered = fs::read_to_string(tmp.path().join("a/config.toml")).unwrap();
    let reloaded = write_config(tmp.path(), "reloaded.toml", &rendered);
    let out = run(
        &["converge", "--config", &reloaded, "--out", "c"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert_eq!(
        fs::read(tmp.path().join("a/config.toml")).unwrap(),
        fs::read(tmp.path().join("c/config.toml")).unwrap()
    );
}

#[test]
fn csv_only_format_selection_skips_json_artifacts() {
    let tmp = tempdir().unwrap();
    let with_formats = format!("{TINY_CONFIG}\n[output]\nformats = [\"csv\"]\n");
    let config = write_config(tmp.path(), "csvonly.toml", &with_formats);
    let out = run(&["converge", "--config", &config, "--out", "run"], tmp.path());
    assert!(out.status.success(), "{}", stderr_of(&out));
    let names: Vec<String> = read_dir_sorted(&tmp.path().join("run"))
        .into_iter()
        .map(|(n, _)| n)
        .collect();
    assert!(names.iter().all(|n| !n.ends_with(".json")), "{names:?}");
    assert!(names.contains(&"convergence.csv".to_string()));
}

#[test]
fn output_directory_comes_from_config_when_no_flag() {
    let tmp = tempdir().unwrap();
    let with_dir = format!("{TINY_CONFIG}\n[output]\ndirectory = \"from_config\"\n");
    let config = write_config(tmp.path(), "dir.toml", &with_dir);
    let out = run(
        &[
            "simulate", "--config", &config, "--n", "2", "--m", "4",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(tmp.path().join("from_config/simulate_n2.csv").exists());
}
