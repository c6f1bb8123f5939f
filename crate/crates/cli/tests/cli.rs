use std::collections::BTreeSet;
use std::process::{Command, Output};

use serde_json::Value;

fn entswap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entswap"))
        .args(args)
        .env_remove("ENTSWAP_SEED")
        .output()
        .expect("binary runs")
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!(
        "{}/tests/golden/{name}",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap()
}

/// Dotted key paths of a JSON document; array elements appear as `[]`.
fn field_paths(v: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let p = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                out.insert(p.clone());
                field_paths(x, &p, out);
            }
        }
        Value::Array(items) => {
            for x in items {
                field_paths(x, &format!("{prefix}[]"), out);
            }
        }
        _ => {}
    }
}

fn schema_of(stdout: &[u8]) -> String {
    let v: Value = serde_json::from_slice(stdout).unwrap();
    let mut paths = BTreeSet::new();
    field_paths(&v, "", &mut paths);
    paths.into_iter().map(|p| p + "\n").collect()
}

#[test]
fn run_report_field_names_are_stable() {
    let out = entswap(&[
        "run",
        "--groups",
        "4",
        "--seed",
        "1",
        "--adversary",
        "type3",
    ]);
    assert_eq!(schema_of(&out.stdout), golden("run_fields.txt"));
}

#[test]
fn attack_report_field_names_are_stable() {
    let out = entswap(&[
        "attack",
        "--groups",
        "4",
        "--adversary",
        "type2",
        "--trials",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(schema_of(&out.stdout), golden("attack_fields.txt"));
}

#[test]
fn sweep_writes_summary_and_points() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let out = entswap(&[
        "sweep",
        "--groups",
        "2",
        "--trials",
        "50",
        "--format",
        "both",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        golden("summary_header.csv").trim_end()
    );
    // Four strategies times k = 1, 2.
    assert_eq!(lines.count(), 8);
    for kind in ["none", "type1", "type2", "type3"] {
        for k in 1..=2 {
            let point = std::fs::read(out_dir.join(format!("{kind}_k{k}.json"))).unwrap();
            assert_eq!(schema_of(&point), golden("attack_fields.txt"));
        }
    }
}

#[test]
fn sweep_with_named_adversary_covers_one_strategy() {
    let out = entswap(&[
        "sweep",
        "--groups",
        "3",
        "--trials",
        "20",
        "--adversary",
        "type2",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().skip(1).all(|l| l.starts_with("type2,3,")));
}

#[test]
fn exit_codes() {
    assert_eq!(entswap(&[]).status.code(), Some(2));
    assert_eq!(entswap(&["run", "--groups", "0"]).status.code(), Some(2));
    assert_eq!(
        entswap(&["run", "--adversary", "mallory"]).status.code(),
        Some(2)
    );
    assert_eq!(entswap(&["bogus"]).status.code(), Some(2));
    assert_eq!(entswap(&["run", "--groups", "2"]).status.code(), Some(0));
    // Type II and III channels need phi+ declarations.
    let mixed = entswap(&[
        "run",
        "--groups",
        "1",
        "--adversary",
        "type2",
        "--pair-states",
        "phi+,psi-",
    ]);
    assert_eq!(mixed.status.code(), Some(2));
    // Every check of a type III run on 8 groups mismatches with probability
    // 3/4, so an abort is all but certain.
    assert_eq!(
        entswap(&[
            "run",
            "--groups",
            "8",
            "--adversary",
            "type3",
            "--seed",
            "4"
        ])
        .status
        .code(),
        Some(3)
    );
    let missing = entswap(&["run", "--config", "/nonexistent/entswap.toml"]);
    assert_eq!(missing.status.code(), Some(1));
    let unwritable = entswap(&["run", "--out", "/nonexistent/dir/report.json"]);
    assert_eq!(unwritable.status.code(), Some(1));
    assert_eq!(entswap(&["oracle-check"]).status.code(), Some(0));
}

#[test]
fn run_summary_and_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.json");
    let out = entswap(&[
        "run",
        "--groups",
        "4",
        "--seed",
        "7",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "verdict=accept key_bits=8 keys_equal=true\n"
    );
    let report: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(report["alice_key"], report["bob_key"]);
    assert_eq!(report["transcript"].as_array().unwrap().len(), 3);
}

#[test]
fn config_file_and_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "groups = 3\nseed = 12\nadversary = \"type1\"\n").unwrap();
    let from_file = entswap(&["run", "--config", cfg.to_str().unwrap()]);
    let from_flags = entswap(&[
        "run",
        "--groups",
        "3",
        "--seed",
        "12",
        "--adversary",
        "type1",
    ]);
    assert_eq!(from_file.stdout, from_flags.stdout);

    let with_env = Command::new(env!("CARGO_BIN_EXE_entswap"))
        .args(["run", "--groups", "3"])
        .env("ENTSWAP_SEED", "12")
        .output()
        .unwrap();
    let with_flag = entswap(&["run", "--groups", "3", "--seed", "12"]);
    assert_eq!(with_env.stdout, with_flag.stdout);
}

#[test]
fn oracle_check_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = entswap(&["oracle-check", "--out", dir.path().to_str().unwrap()]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.lines().all(|l| l.ends_with("pass")));
    assert!(table.contains("partner phi+ confirmed"));
    let json: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("oracle_check.json")).unwrap())
            .unwrap();
    assert_eq!(json["passed"], Value::Bool(true));
}
