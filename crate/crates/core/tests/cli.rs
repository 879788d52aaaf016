use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn lyap(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lyap"))
        .args(args)
        .env("LYAP_LOG", "quiet")
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|e| panic!("bad JSON ({e}): {s}"))
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn census_b4_row() {
    let (code, out, _) = lyap(&["census", "--b", "4"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines,
        [
            "b,all_pairs,degenerate,degenerate_pct,no_ghc,no_ghc_pct",
            "4,196,190,96.94,0,0.00"
        ]
    );
}

#[test]
fn census_detail_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("detail.txt");
    let (code, out, _) = lyap(&[
        "census",
        "--b",
        "5",
        "--threads",
        "2",
        "--detail",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("5,900,882,"));
    let detail = std::fs::read_to_string(path).unwrap();
    assert_eq!(detail.lines().count(), 900);
    assert!(detail.lines().any(|l| l == "0,1,3,4;0,1,3,4;OK"));
    assert_eq!(detail.lines().filter(|l| l.ends_with(";OK")).count(), 7);
}

#[test]
fn large_census_needs_flags() {
    let (code, _, err) = lyap(&["census", "--b", "9"]);
    assert_eq!(code, 1);
    assert!(err.contains("--slow"));
    let (code, _, err) = lyap(&["census", "--b", "12", "--slow"]);
    assert_eq!(code, 1);
    assert!(err.contains("--allow-huge"));
}

#[test]
fn cantor_dim_middle_fifth() {
    let (code, out, _) = lyap(&[
        "cantor-dim",
        "--b",
        "5",
        "--d1",
        "0,1,3,4",
        "--d2",
        "0,1,3,4",
        "--eps",
        "1e-10",
    ]);
    assert_eq!(code, 0);
    let r = json(&out);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["status"], "Conjugated");
    assert!((r["dimension"].as_f64().unwrap() - 0.720_349_599_304_383_9).abs() < 1e-9);
    assert!(r["truncation_bound"].as_f64().unwrap() < 1e-10);
    assert!(r["p"].is_array());
    for key in ["N", "M", "r", "timing_ms"] {
        assert!(r[key].is_number(), "{key} missing");
    }
}

#[test]
fn middle_third_exits_2_with_witness() {
    let (code, out, err) = lyap(&["cantor-dim", "--b", "3", "--d1", "0,2", "--d2", "0,2"]);
    assert_eq!(code, 2);
    let r = json(&out);
    assert_eq!(r["status"], "GhcDetected");
    assert_eq!(r["witness"]["kind"], "involution");
    assert!(r["estimate"].is_null());
    assert!(err.contains("mc"));
}

#[test]
fn degenerate_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "d.txt", "1 1 1 1\n2 1 1 2\n");
    let (code, out, _) = lyap(&["lyapunov", "--file", &f]);
    assert_eq!(code, 2);
    assert_eq!(json(&out)["status"], "Degenerate");
}

#[test]
fn positive_family_is_log3_and_replays_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "fam.json",
        r#"{"mode": "matrices", "matrices": [[[2, 1], [1, 2]]]}"#,
    );
    let (code, out, _) = lyap(&["lyapunov", "--file", &f, "--eps", "1e-6"]);
    assert_eq!(code, 0);
    let r = json(&out);
    assert_eq!(r["status"], "Positive");
    assert!((r["estimate"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-6);

    let mixed = write(
        dir.path(),
        "mixed.txt",
        "# two matrices, one needs conjugation\n4 0 2 1 0.3\n2 1 1 2 0.7\n",
    );
    let (code, out, _) = lyap(&["lyapunov", "--file", &mixed, "--eps", "1e-9"]);
    assert_eq!(code, 0);
    let first = json(&out);
    let report = write(dir.path(), "report.json", &out);
    let (code, out, _) = lyap(&["lyapunov", "--file", &mixed, "--replay", &report]);
    assert_eq!(code, 0);
    let again = json(&out);
    for key in ["estimate", "truncation_bound", "N", "M", "r"] {
        assert_eq!(first[key], again[key], "{key}");
    }
    let (a, b) = (
        first["estimate"].as_f64().unwrap(),
        again["estimate"].as_f64().unwrap(),
    );
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn malformed_input_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.txt", "1 2 3 4\n1 2 zz 4\n");
    let (code, out, err) = lyap(&["lyapunov", "--file", &f]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.contains("bad.txt:2:5:"), "{err}");

    let j = write(
        dir.path(),
        "bad.json",
        "{\"mode\": \"matrices\",\n  \"matrices\": [[[1, 2], [3, 4]]],\n  \"wieghts\": [1]}",
    );
    let (code, _, err) = lyap(&["lyapunov", "--file", &j]);
    assert_eq!(code, 1);
    assert!(err.contains("bad.json:3:"), "{err}");

    let (code, _, _) = lyap(&["lyapunov", "--file", "/nonexistent/fam.json"]);
    assert_eq!(code, 1);
    let (code, _, _) = lyap(&["cantor-dim", "--b", "5", "--d1", "0,x", "--d2", "1"]);
    assert_eq!(code, 1);
    let (code, _, _) = lyap(&["no-such-command"]);
    assert_eq!(code, 1);
}

#[test]
fn negative_entries_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "neg.txt", "1 -1 0 1\n");
    let (code, _, err) = lyap(&["lyapunov", "--file", &f]);
    assert_eq!(code, 1);
    assert!(err.contains("negative"), "{err}");
}

#[test]
fn check_positivize_lists_images() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "f.json",
        r#"{"mode": "cantor", "b": 5, "d1": [0, 1, 3, 4], "d2": [0, 1, 3, 4]}"#,
    );
    let (code, out, _) = lyap(&["check-positivize", "--file", &f]);
    assert_eq!(code, 0);
    let r = json(&out);
    assert_eq!(r["status"], "Conjugated");
    let images = r["images"].as_array().unwrap();
    assert_eq!(images.len(), 5);
    for m in images {
        for row in m.as_array().unwrap() {
            for x in row.as_array().unwrap() {
                assert!(x.as_f64().unwrap() > 0.0);
            }
        }
    }
}

#[test]
fn recurrence_golden_and_rejection() {
    let (code, out, _) = lyap(&["recurrence", "--pairs", "1,1", "--eps", "1e-10"]);
    assert_eq!(code, 0);
    let g = json(&out)["growth"].as_f64().unwrap();
    assert!((g - 1.618_033_988_749_895).abs() < 1e-9);

    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "rec.json",
        r#"{"mode": "recurrence", "pairs": [[2, 1]], "epsilon": 1e-10}"#,
    );
    let (code, out, _) = lyap(&["recurrence", "--file", &f, "--direct"]);
    assert_eq!(code, 0);
    assert!((json(&out)["growth"].as_f64().unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-9);

    let (code, _, err) = lyap(&["recurrence", "--pairs", "1,1;1,-1"]);
    assert_eq!(code, 1);
    assert!(err.contains("Monte Carlo"), "{err}");
}

#[test]
fn mc_random_fibonacci() {
    let (code, out, _) = lyap(&[
        "mc",
        "--pairs",
        "1,1;1,-1;-1,1;-1,-1",
        "--steps",
        "20000",
        "--trials",
        "16",
        "--seed",
        "3",
        "--threads",
        "2",
    ]);
    assert_eq!(code, 0);
    let r = json(&out);
    assert!((r["growth"].as_f64().unwrap() - 1.131_988_24).abs() < 1e-2);
    let (_, again, _) = lyap(&[
        "mc",
        "--pairs",
        "1,1;1,-1;-1,1;-1,-1",
        "--steps",
        "20000",
        "--trials",
        "16",
        "--seed",
        "3",
        "--threads",
        "1",
    ]);
    assert_eq!(r["estimate"], json(&again)["estimate"]);
}
