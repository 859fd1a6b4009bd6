use serde_json::Value;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmc-converse")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn csv_rows(args: &[&str]) -> (Vec<String>, Vec<Vec<String>>) {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn classify_asymmetric_singular() {
    let v = json(&["classify", "--builtin", "asym_example"]);
    assert_eq!(v["results"][0]["symmetric"], false);
    assert_eq!(v["results"][0]["singular"], true);
    assert_eq!(v["channel"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn converse_bec_constants() {
    let v = json(&["converse", "--builtin", "bec:0.5", "--eps", "0.5", "--n", "2000"]);
    let r = &v["results"][0];
    assert!((r["constants"]["K"].as_f64().unwrap() - 4.6057).abs() < 1e-3);
    assert_eq!(r["constants"]["n_o"], 1110);
    assert_eq!(r["valid_from"], 1110);
    assert_eq!(r["trivial"], false);
    assert_eq!(v["config"]["eps"], 0.5);
}

#[test]
fn approx_csv_has_half_log_column() {
    let (header, rows) = csv_rows(&["approx", "--builtin", "bsc:0.11", "--eps", "0.1", "--n", "100:1000:100", "--format", "csv"]);
    assert_eq!(rows.len(), 10);
    let n = header.iter().position(|h| h == "n").unwrap();
    let l = header.iter().position(|h| h == "log_term").unwrap();
    for row in rows {
        let nv: f64 = row[n].parse().unwrap();
        let lv: f64 = row[l].parse().unwrap();
        assert!((lv - 0.5 * nv.ln()).abs() < 1e-12);
    }
}

#[test]
fn csv_and_json_agree() {
    let base = ["minimax", "--builtin", "bec:0.5", "--eps", "0.2", "--n", "40:60:10", "--rate", "best"];
    let v = json(&base);
    let mut args = base.to_vec();
    args.extend(["--format", "csv"]);
    let (header, rows) = csv_rows(&args);
    for (i, row) in rows.iter().enumerate() {
        for (h, cell) in header.iter().zip(row) {
            assert_eq!(v["results"][i][h].to_string().trim_matches('"'), cell, "{h}");
        }
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = ["verify", "--builtin", "bec:0.5", "--n", "4:8:2", "--codebooks", "5", "--seed", "11"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["verify", "--builtin", "bec:0.5", "--n", "4:8:2", "--codebooks", "5", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 15);
    assert!(results.iter().all(|r| r["holds"] == true));
}

#[test]
fn exit_codes() {
    let cases: [(&[&str], i32); 7] = [
        (&["converse", "--builtin", "bec:1.5", "--eps", "0.1", "--n", "10"], 2),
        (&["converse", "--builtin", "bec:0.5", "--eps", "1.5", "--n", "10"], 2),
        (&["converse", "--builtin", "bec:0.5", "--eps", "0.1", "--n", "0"], 2),
        (&["classify"], 2),
        (&["converse", "--builtin", "bsc:0.11", "--eps", "0.1", "--n", "10"], 3),
        (&["minimax", "--builtin", "asym_example", "--eps", "0.1", "--n", "10"], 3),
        (&["minimax", "--builtin", "bec:0.5", "--eps", "0.1", "--n", "100000", "--enum-budget", "10"], 4),
    ];
    for (args, code) in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn channel_file_and_out_path() {
    let dir = std::env::temp_dir().join(format!("dmc-converse-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("bec.json");
    std::fs::write(&file, r#"{"W": [[0.5, 0.0, 0.5], [0.0, 0.5, 0.5]], "labels_y": ["0", "1", "e"]}"#).unwrap();
    let out = dir.join("report.json");
    let status = run(&["classify", "--channel", file.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(status.status.success() && status.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let builtin = json(&["classify", "--builtin", "bec:0.5"]);
    assert_eq!(v["channel"]["sha256"], builtin["channel"]["sha256"]);
    assert_eq!(v["results"], builtin["results"]);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn spexp_and_measures_run() {
    let v = json(&["spexp", "--builtin", "bsc:0.11", "--rates", "0:0.4:0.1"]);
    let vals: Vec<f64> = v["results"].as_array().unwrap().iter().map(|r| r["value"].as_f64().unwrap()).collect();
    assert_eq!(vals.len(), 5);
    assert!(vals.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*vals.last().unwrap(), 0.0);
    let m = json(&["measures", "--builtin", "asym_example"]);
    assert!((m["results"][0]["capacity"].as_f64().unwrap() - 0.592515631536434).abs() < 1e-9);
}
