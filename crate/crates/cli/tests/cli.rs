use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use apsi::freqset::FrequencySet;
use apsi::io::{load_json, load_record_csv, save_json, save_record_csv};
use apsi::pipeline::{identify_channel, IdentifyOptions};
use apsi::signal::{synthesize, ApSignal};
use apsi::{AnalysisConfig, OdeModel, SampledRecord};
use serde_json::Value;
use tempfile::TempDir;

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.json")
}

fn apsi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apsi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth_demo(dir: &Path) {
    let o = apsi(&["synth", "--config", path(&demo_config()), "--out", path(dir)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn synth_writes_records_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth_demo(&a);
    synth_demo(&b);
    for name in ["input_1.csv", "input_2.csv", "output_1.csv", "output_2.csv", "scenario.json"] {
        let first = fs::read(a.join(name)).unwrap();
        assert_eq!(first, fs::read(b.join(name)).unwrap(), "{name} differs between runs");
    }
    assert!(!a.join("input_3.csv").exists());
    let scenario = read_json(&a.join("scenario.json"));
    assert!(scenario["truth"]["link"]["frequencies"].is_array());
}

#[test]
fn synth_seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth_demo(&a);
    let o = apsi(&["synth", "--config", path(&demo_config()), "--seed", "8", "--out", path(&b)]);
    assert!(o.status.success());
    assert_ne!(fs::read(a.join("scenario.json")).unwrap(), fs::read(b.join("scenario.json")).unwrap());
}

#[test]
fn crowded_band_exits_2_naming_band() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("crowded.json");
    fs::write(
        &cfg,
        r#"{"scenario": {"band": [1.0, 2.0], "planned_duration": 100.0, "lines_per_input": 10}}"#,
    )
    .unwrap();
    let o = apsi(&["synth", "--config", path(&cfg), "--out", path(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(1, 2)"), "{}", stderr(&o));
}

#[test]
fn unknown_config_field_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"sede": 3}"#).unwrap();
    let o = apsi(&["paradox", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
}

fn write_two_tone(dir: &Path) -> PathBuf {
    let signal = ApSignal::from_triples(&[(2.0, 1.0, 0.3), (3.5, 0.6, -1.0)]).unwrap();
    let p = dir.join("two_tone.csv");
    save_record_csv(&p, &synthesize(&signal, 50.0, 0.01).unwrap()).unwrap();
    p
}

#[test]
fn spectrum_recovers_two_tones() {
    let tmp = TempDir::new().unwrap();
    let record = write_two_tone(tmp.path());
    let out = tmp.path().join("spec");
    let o = apsi(&["spectrum", path(&record), "--band-lo", "0.5", "--band-hi", "6", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let set: FrequencySet = load_json(out.join("freqset.json")).unwrap();
    let f = set.frequencies();
    assert_eq!(f.len(), 2);
    assert!((f[0] - 2.0).abs() < 1e-2 && (f[1] - 3.5).abs() < 1e-2, "{set}");
    assert!(stdout(&o).contains(&set.to_string()));
    let grid = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert!(grid.starts_with("omega,re,im,magnitude\n"));
    let step = 2.0 * std::f64::consts::PI / 50.0;
    assert_eq!(grid.lines().count() - 1, (5.5 / step).floor() as usize + 1);
}

#[test]
fn spectrum_of_zero_record_is_empty() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("zero.csv");
    save_record_csv(&p, &SampledRecord::new(vec![0.0; 1001], 0.01).unwrap()).unwrap();
    let o = apsi(&["spectrum", path(&p), "--out", path(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let set: FrequencySet = load_json(tmp.path().join("freqset.json")).unwrap();
    assert!(set.is_empty());
}

#[test]
fn spectrum_input_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "t,value\n0,1\n0.01,2\n0.02,oops\n").unwrap();
    let o = apsi(&["spectrum", path(&bad), "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let record = write_two_tone(tmp.path());
    let o = apsi(&["spectrum", path(&record), "--band-lo", "1", "--band-hi", "400", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Nyquist"), "{}", stderr(&o));

    let o = apsi(&["spectrum", path(&tmp.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

fn set_file(dir: &Path, name: &str, freqs: &[f64], delta: f64) -> PathBuf {
    let p = dir.join(name);
    save_json(&p, &FrequencySet::new(freqs.to_vec(), delta).unwrap()).unwrap();
    p
}

fn setop(op: &str, a: &Path, b: &Path, out: &Path) -> Vec<f64> {
    let o = apsi(&["setop", op, path(a), path(b), "--out", path(out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    load_json::<FrequencySet>(out.join("freqset.json")).unwrap().frequencies().to_vec()
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

#[test]
fn setop_mirrors_set_algebra() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let out = d.join("out");

    let a = set_file(d, "a.json", &[1.0, 3.0], 0.01);
    let b = set_file(d, "b.json", &[5.0], 0.01);
    assert!(close(&setop("union", &a, &b, &out), &[1.0, 3.0, 5.0]));
    let a = set_file(d, "a.json", &[2.0], 0.001);
    let b = set_file(d, "b.json", &[2.0005], 0.001);
    assert!(close(&setop("union", &a, &b, &out), &[2.00025]));
    let e = set_file(d, "e.json", &[], 0.001);
    assert!(close(&setop("union", &a, &e, &out), &[2.0]));

    let a = set_file(d, "a.json", &[1.0, 2.0, 3.0], 0.001);
    let b = set_file(d, "b.json", &[2.0005, 5.0], 0.001);
    assert!(close(&setop("intersect", &a, &b, &out), &[2.00025]));
    let a = set_file(d, "a.json", &[1.0, 3.0], 0.01);
    let b = set_file(d, "b.json", &[5.0, 7.0], 0.01);
    assert!(setop("intersect", &a, &b, &out).is_empty());
    assert!(close(&setop("intersect", &a, &a, &out), &[1.0, 3.0]));

    let a = set_file(d, "a.json", &[1.0, 3.0, 6.0], 0.001);
    let b = set_file(d, "b.json", &[3.0005], 0.001);
    assert!(close(&setop("diff", &a, &b, &out), &[1.0, 6.0]));
    assert!(close(&setop("diff", &a, &e, &out), &[1.0, 3.0, 6.0]));
    assert!(setop("diff", &a, &a, &out).is_empty());
}

#[test]
fn setop_rejects_non_set_files() {
    let tmp = TempDir::new().unwrap();
    let a = set_file(tmp.path(), "a.json", &[1.0], 0.01);
    let junk = tmp.path().join("junk.json");
    fs::write(&junk, r#"{"frequencies": "x"}"#).unwrap();
    let o = apsi(&["setop", "union", path(&a), path(&junk), "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identify_recovers_demo_channel() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("demo");
    synth_demo(&dir);
    let out = dir.join("id");
    let o = apsi(&["identify", path(&dir), "--input", "1", "--output", "1", "--config", path(&demo_config()), "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let model = read_json(&out.join("model.json"));
    assert_eq!(model["order"], 2);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["exact_set_matches_truth"], true);
    for e in report["coefficient_errors"].as_array().unwrap() {
        assert!(e.as_f64().unwrap() < 0.01, "{report}");
    }
    let frf = fs::read_to_string(out.join("frf.csv")).unwrap();
    assert!(frf.starts_with("omega,re,im,magnitude,phase\n"));
    assert!(out.join("exact_set.json").is_file());
}

#[test]
fn identify_matches_library_call() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("demo");
    synth_demo(&dir);
    let o = apsi(&["identify", path(&dir), "-p", "2", "-q", "1", "--config", path(&demo_config()), "--out", path(&dir)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let inputs: Vec<_> = (1..=2).map(|l| load_record_csv(dir.join(format!("input_{l}.csv"))).unwrap()).collect();
    let output = load_record_csv(dir.join("output_1.csv")).unwrap();
    let cfg = read_json(&demo_config());
    let band = cfg["band"].as_array().unwrap();
    let options = IdentifyOptions {
        analysis: AnalysisConfig::for_band(band[0].as_f64().unwrap(), band[1].as_f64().unwrap()),
        max_order: cfg["max_order"].as_u64().unwrap() as usize,
        residual_tol: cfg["residual_tol"].as_f64().unwrap(),
    };
    let direct = identify_channel(&inputs, &output, 1, &options).unwrap();
    let from_cli: OdeModel = load_json(dir.join("model.json")).unwrap();
    assert_eq!(from_cli, direct.model);
    let set: FrequencySet = load_json(dir.join("exact_set.json")).unwrap();
    assert_eq!(set, direct.exact_set);
}

#[test]
fn identify_null_channel_fails_at_frf_stage() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = read_json(&demo_config());
    cfg["scenario"]["channels"][0][0] = serde_json::json!({"kind": "gain", "re": 0.0, "im": 0.0});
    let cfg_path = tmp.path().join("null.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let dir = tmp.path().join("null");
    let o = apsi(&["synth", "--config", path(&cfg_path), "--out", path(&dir)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = apsi(&["identify", path(&dir), "--config", path(&cfg_path), "--out", path(&dir)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("frf"), "{}", stderr(&o));
}

#[test]
fn identify_missing_output_exits_2() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("demo");
    synth_demo(&dir);
    fs::remove_file(dir.join("output_2.csv")).unwrap();
    let o = apsi(&["identify", path(&dir), "-q", "2", "--config", path(&demo_config())]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = apsi(&["identify", path(&tmp.path().join("nowhere"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn paradox_table_shows_decay_and_is_deterministic() {
    let first = apsi(&["paradox"]);
    assert!(first.status.success());
    let text = stdout(&first);
    assert_eq!(text, stdout(&apsi(&["paradox"])));
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter_map(|l| {
            let cols: Vec<f64> = l.split_whitespace().filter_map(|c| c.parse().ok()).collect();
            (cols.len() == 3).then_some(cols)
        })
        .collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![25.0, 50.0, 100.0, 200.0]);
    let pulse = rows[3][1] / rows[2][1];
    let cosine = rows[3][2] / rows[2][2];
    assert!(pulse > 0.45 && pulse < 0.55, "{pulse}");
    assert!(cosine > 0.98 && cosine < 1.02, "{cosine}");
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(apsi(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(apsi(&["paradox", "--dt", "-1"]).status.code(), Some(2));
    assert_eq!(apsi(&["paradox", "--band-lo", "1"]).status.code(), Some(2));
}
