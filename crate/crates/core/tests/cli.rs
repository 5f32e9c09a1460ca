use std::path::Path;
use std::process::{Command, Output};

use monolab::cli::{canonical_json, OutputEnvelope};
use serde_json::Value;

fn monolab(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_monolab"));
    cmd.args(args).env_remove("MONOLAB_OUT_DIR");
    if let Some(d) = out_dir {
        cmd.env("MONOLAB_OUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const GHZ: &str = "# dims: 2 2 2\n0.7071067811865476 0\n0 0\n0 0\n0 0\n0 0\n0 0\n0 0\n0.7071067811865476 0\n";

#[test]
fn invariants_table_from_state_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ghz.txt");
    std::fs::write(&path, GHZ).unwrap();
    let o = monolab(
        &["invariants", "--state", path.to_str().unwrap(), "--format", "table"],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let t = stdout(&o);
    for key in [
        "I1", "I2", "I3", "I4", "I5", "tau_AB_C", "tau_AC_B", "tau_BC_A", "tau_ABC", "phi_ABC",
    ] {
        assert!(t.lines().any(|l| l.starts_with(key)), "{key} missing:\n{t}");
    }
    assert!(
        t.lines()
            .any(|l| l.starts_with("phi_ABC") && l.trim_end().ends_with("49.5")),
        "{t}"
    );
}

#[test]
fn phi_check_exits_clean() {
    let o = monolab(
        &[
            "check",
            "--monotone",
            "phi_ABC",
            "--states",
            "200",
            "--dirs",
            "20",
            "--seed",
            "7",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let env: OutputEnvelope = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(env.verify().unwrap());
    assert_eq!(env.payload["counts"]["violation"], 0);
    assert_eq!(env.config["check"]["seed"], 7);
}

#[test]
fn usage_errors_name_the_flag() {
    let o = monolab(&["walk", "--bogus"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--bogus"));
    let o = monolab(&["walk", "--named", "ghz"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    let o = monolab(&["check", "--monotone", "nope", "--seed", "1"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn violations_exit_1() {
    let o = monolab(
        &[
            "check",
            "--monotone",
            "purity@decreasing",
            "--states",
            "4",
            "--dirs",
            "3",
            "--seed",
            "1",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn campaign_csv_has_one_row_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"n_trials": 40, "monotones": ["norm"]}"#).unwrap();
    let o = monolab(
        &["campaign", "--config", cfg.to_str().unwrap(), "--format", "csv"],
        None,
    );
    assert_eq!(o.status.code(), Some(2), "seed is required");
    let o = monolab(
        &[
            "campaign",
            "--config",
            cfg.to_str().unwrap(),
            "--format",
            "csv",
            "--seed",
            "3",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert!(rdr.headers().unwrap().iter().any(|h| h == "verdict"));
    assert_eq!(rdr.records().count(), 40);
}

#[test]
fn out_dir_env_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = monolab(
        &[
            "walk",
            "--named",
            "bell",
            "--trials",
            "500",
            "--seed",
            "2",
            "--out",
            "sub/walk.json",
        ],
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("sub/walk.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(canonical_json(&v).unwrap(), text);
    let env: OutputEnvelope = serde_json::from_value(v).unwrap();
    assert_eq!(env.tool, "monolab");
    assert!(env.verify().unwrap());
}

#[test]
fn csv_and_json_forms_of_check() {
    let args = [
        "check",
        "--monotone",
        "entropy",
        "--states",
        "3",
        "--dirs",
        "2",
        "--seed",
        "9",
    ];
    let o = monolab(&[&args[..], &["--format", "csv"]].concat(), None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("state_id,direction_id,target,classification"));
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 3);
    let o = monolab(&[&args[..], &["--keep-samples"]].concat(), None);
    let env: OutputEnvelope = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(env.payload["samples"].as_array().unwrap().len(), 18);
}
