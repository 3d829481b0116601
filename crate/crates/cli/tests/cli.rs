use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn aklt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aklt")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not a report ({e}): {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn certify_gap_reports_a_valid_certificate() {
    let out = aklt(&["certify-gap", "--model", "spin32_chain", "--n", "4", "--J", "1", "--expect"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["results"]["certificate"], "VALID");
    for key in ["expect_gamma", "expect_epsilon", "expect_bound"] {
        assert_eq!(r["results"][key]["pass"], true, "{key}");
        assert!(r["results"][key]["tolerance"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn spin2_gamma_only() {
    let out = aklt(&["certify-gap", "--model", "spin2_chain", "--gamma-only", "--expect"]);
    assert_eq!(code(&out), 0);
    let g = report(&out)["results"]["gamma"].as_f64().unwrap();
    assert!((g - 0.241).abs() < 5e-3);
}

#[test]
fn certify_gap_exit_codes() {
    assert_eq!(code(&aklt(&["certify-gap", "--n", "1"])), 2);
    assert_eq!(code(&aklt(&["certify-gap", "--model", "octagonal"])), 2);
    assert_eq!(code(&aklt(&["certify-gap", "--n", "3", "--dim-cap", "100"])), 2);
    let invalid = aklt(&["certify-gap", "--n", "2"]);
    assert_eq!(code(&invalid), 1);
    assert_eq!(report(&invalid)["results"]["certificate"], "INVALID");
}

#[test]
fn ground_state_chain_and_merged() {
    let out = aklt(&["ground-state", "--N", "3"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["results"]["kernel_dimension"], 1);
    assert_eq!(r["results"]["network_overlap"]["pass"], true);
    let out = aklt(&["ground-state", "--model", "octagonal", "--N", "1", "--chains", "2", "--compare-unmerged"]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["results"]["spectrum_vs_unmerged"]["pass"], true);
    assert_eq!(code(&aklt(&["ground-state", "--N", "12"])), 2);
    assert_eq!(code(&aklt(&["ground-state", "--model", "octagonal", "--chains", "3", "--pairing", "ladder"])), 2);
}

#[test]
fn simulate_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let euler = write(
        dir.path(),
        "euler.json",
        r#"{"program": [{"op":"init","q":0,"bit":1}, {"op":"rz","q":0,"theta":0.7},
            {"op":"rx","q":0,"theta":1.3}, {"op":"rz","q":0,"theta":-0.4}]}"#,
    );
    let out = aklt(&["simulate", &euler, "--oracle", "--N", "80", "--samples", "4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for run in report(&out)["results"]["runs"].as_array().unwrap() {
        assert_eq!(run["fidelity"]["pass"], true);
    }
    for (m, n) in [("X", "X"), ("X", "Y"), ("Y", "X"), ("Y", "Y")] {
        let prog = format!(
            r#"{{"program": [{{"op":"rx","q":1,"theta":0.4}}, {{"op":"entangle","q1":1,"q2":0,"m":"{m}","n":"{n}"}}]}}"#
        );
        let path = write(dir.path(), &format!("v{m}{n}.json"), &prog);
        let out = aklt(&["simulate", &path, "--oracle", "--seed", "9"]);
        assert_eq!(code(&out), 0, "V_{m}{n}: {}", String::from_utf8_lossy(&out.stderr));
        let run = &report(&out)["results"]["runs"][0];
        assert!(run["fidelity"]["value"].as_f64().unwrap() >= 1.0 - 1e-9);
    }
}

#[test]
fn malformed_program_names_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"program\": [\n{\"op\":\"rz\",\"q\":0}]}");
    let out = aklt(&["simulate", &bad]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("theta") && err.contains("line 2"), "{err}");
    let far = write(dir.path(), "far.json", r#"{"program": [{"op":"entangle","q1":0,"q2":2,"m":"X","n":"X"}]}"#);
    assert_eq!(code(&aklt(&["simulate", &far])), 2);
}

fn without_timings(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timings_ms");
    v
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write(
        dir.path(),
        "p.json",
        r#"{"program": [{"op":"init","q":0,"bit":0}, {"op":"init","q":1,"bit":0},
            {"op":"entangle","q1":0,"q2":1,"m":"Y","n":"Y"}, {"op":"readout","q":0}, {"op":"readout","q":1}]}"#,
    );
    let args = ["simulate", prog.as_str(), "--seed", "42", "--samples", "20", "--trajectory"];
    let a = without_timings(report(&aklt(&args)));
    let b = without_timings(report(&aklt(&args)));
    assert_eq!(a, b);
    let c = without_timings(report(&aklt(&["simulate", prog.as_str(), "--seed", "43", "--samples", "20"])));
    assert_ne!(a["results"]["runs"], c["results"]["runs"]);
}

#[test]
fn verify_tables_and_tamper_detection() {
    let out = aklt(&["verify-tables"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["results"]["tables"], "identical");
    assert_eq!(r["results"]["propagation_identities_held"], 64);

    let dir = tempfile::tempdir().unwrap();
    let fresh = dir.path().join("fresh.json");
    let out = aklt(&["verify-tables", "--write", fresh.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&fresh).unwrap();
    let tampered = write(dir.path(), "tampered.json", &text.replacen("\"bond_bit\": 1", "\"bond_bit\": 0", 1));
    let out = aklt(&["verify-tables", "--against", &tampered]);
    assert_eq!(code(&out), 1);
    let r = report(&out);
    assert_eq!(r["results"]["mismatch"]["entry"], "init[0].bond_bit");
}

#[test]
fn output_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = aklt(&["--output", path.to_str().unwrap(), "certify-gap", "--gamma-only"]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["command"], "certify-gap");
}
