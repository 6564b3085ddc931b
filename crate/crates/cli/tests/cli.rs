use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

use ppp_b2b::pppmsg::{generate_schedule, CorrectionState, MessageSchema, SatId, TimedMessage};

const BDS: &str = "bds = [19, 21, 22, 29, 34, 35, 38, 39, 40, 44]\ngps = [2, 5, 6, 7, 9, 12, 13, 15, 18, 19, 25, 29, 30]\n";

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppp-b2b")).args(args).output().expect("spawn")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new() -> Self {
        let w = Work { dir: tempfile::tempdir().unwrap() };
        std::fs::write(w.path("cfg.toml"), "prns = [59, 60, 61]\n").unwrap();
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn scenario(&self, name: &str, body: &str) -> PathBuf {
        let path = self.path(name);
        std::fs::write(&path, format!("{body}\n[corrections]\n{BDS}")).unwrap();
        path
    }

    fn simulate(&self, scenario: &Path, seed: u64, out: &str) -> Output {
        let cfg = self.path("cfg.toml");
        bin(&["simulate", "--scenario", p(scenario), "--config", p(&cfg), "--seed", &seed.to_string(), "--out", p(&self.path(out))])
    }

    fn decode(&self, input: &str, out: &str, extra: &[&str]) -> Output {
        let cfg = self.path("cfg.toml");
        let (i, o) = (self.path(input), self.path(out));
        let mut args = vec!["decode", "--in", p(&i), "--config", p(&cfg), "--out", p(&o)];
        args.extend_from_slice(extra);
        bin(&args)
    }
}

const THREE_GEO: &str = r#"
duration_s = 3.5
sample_rate_hz = 20.46e6
start_epoch = 17998

[[channels]]
prn = 59
doppler_hz = -29.0
code_phase_chips = 1000.5
cn0_dbhz = 45.0

[[channels]]
prn = 60
doppler_hz = 410.0
code_phase_chips = 7000.0
cn0_dbhz = 45.0

[[channels]]
prn = 61
doppler_hz = -160.0
code_phase_chips = 4321.25
cn0_dbhz = 45.0
"#;

#[test]
fn three_satellite_closed_loop() {
    let w = Work::new();
    let sc = w.scenario("geo.toml", THREE_GEO);
    let out = w.simulate(&sc, 11, "run");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty(), "data products must not go to stdout");

    let truth = json_file(&w.path("run.truth.json"));
    let fs = 20.46e6;
    let samples = truth["samples"].as_u64().unwrap();
    assert_eq!(samples, (3.5 * fs) as u64);
    let iq_len = std::fs::metadata(w.path("run.iq")).unwrap().len();
    assert_eq!(iq_len, 2 * samples);
    let channels = truth["channels"].as_array().unwrap();
    assert_eq!(channels.iter().map(|c| c["prn"].as_u64().unwrap()).collect::<Vec<_>>(), [59, 60, 61]);
    for c in channels {
        assert_eq!(c["frames"].as_array().unwrap().len(), 4);
    }
    // Identical content on every GEO.
    let first: Vec<_> = channels[0]["frames"].as_array().unwrap().iter().map(|f| f["time"].clone()).collect();
    for c in channels {
        let times: Vec<_> = c["frames"].as_array().unwrap().iter().map(|f| f["time"].clone()).collect();
        assert_eq!(times, first);
    }

    let out = w.decode("run.iq", "dec", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_file(&w.path("dec.report.json"));
    assert_eq!(report["channels"].as_array().unwrap().len(), 3);
    for ch in report["channels"].as_array().unwrap() {
        assert!(ch["frames_crc_passed"].as_u64() <= ch["frames_found"].as_u64());
        assert_eq!(ch["ldpc_not_converged"], 0);
        let hist = ch["iteration_histogram"].as_object().unwrap();
        assert_eq!(hist.keys().collect::<Vec<_>>(), ["1"], "{hist:?}");
    }
    for a in report["acquisition"].as_array().unwrap() {
        let prn = a["prn"].as_u64().unwrap();
        let t = channels.iter().find(|c| c["prn"].as_u64() == Some(prn)).unwrap();
        assert_eq!(a["detected"], true);
        assert!((a["doppler_hz"].as_f64().unwrap() - t["doppler_hz"].as_f64().unwrap()).abs() <= 250.0);
        let dc = (a["code_phase_chips"].as_f64().unwrap() - t["code_phase_chips"].as_f64().unwrap()).abs();
        assert!(dc <= 0.5, "PRN {prn}: code phase off by {dc}");
    }

    let messages = jsonl(&w.path("dec.messages.jsonl"));
    let mut expected = 0;
    let mut recovered = 0;
    for c in channels {
        let prn = c["prn"].as_u64().unwrap();
        for f in c["frames"].as_array().unwrap().iter().filter(|f| f["complete_in_recording"] == true) {
            expected += 1;
            let at = f["start_sample"].as_i64().unwrap();
            let Some(m) = messages
                .iter()
                .find(|m| m["source_prn"].as_u64() == Some(prn) && (m["start_sample"].as_i64().unwrap() - at).abs() <= 4)
            else {
                continue;
            };
            assert_eq!(m["crc_ok"], true);
            assert_eq!(m["bits"], f["bits"], "PRN {prn} frame {}", f["index"]);
            recovered += 1;
        }
    }
    assert!(expected >= 9);
    assert!(recovered * 100 >= expected * 98, "{recovered}/{expected}");

    // Wrong channel list: nothing acquired.
    let out = w.decode("run.iq", "none", &["--prn", "57"]);
    assert_eq!(out.status.code(), Some(2));
    let report = json_file(&w.path("none.report.json"));
    assert!(report["channels"].as_array().unwrap().is_empty());
}

#[test]
fn byte_identical_reruns() {
    let w = Work::new();
    let sc = w.scenario(
        "s.toml",
        "duration_s = 1.5\nsample_rate_hz = 20.46e6\n[[channels]]\nprn = 59\ndoppler_hz = 120.0\ncode_phase_chips = 17.0\ncn0_dbhz = 45.0\n",
    );
    for out in ["a", "b"] {
        assert!(w.simulate(&sc, 5, out).status.success());
    }
    assert!(w.simulate(&sc, 6, "c").status.success());
    let read = |n: &str| std::fs::read(w.path(n)).unwrap();
    assert_eq!(read("a.iq"), read("b.iq"));
    assert_eq!(read("a.truth.json"), read("b.truth.json"));
    assert_ne!(read("a.iq"), read("c.iq"));

    for (input, out) in [("a.iq", "da"), ("b.iq", "db")] {
        assert!(w.decode(input, out, &["--prn", "59"]).status.success());
    }
    for suffix in [".report.json", ".messages.jsonl", ".corrections.jsonl"] {
        assert_eq!(read(&format!("da{suffix}")), read(&format!("db{suffix}")), "{suffix}");
    }
}

#[test]
fn noise_only_input_exits_nonzero() {
    let w = Work::new();
    let sc = w.scenario(
        "n.toml",
        "duration_s = 0.4\nsample_rate_hz = 20.46e6\n[[channels]]\nprn = 59\ndoppler_hz = 0.0\ncode_phase_chips = 0.0\ncn0_dbhz = 0.0\n",
    );
    assert!(w.simulate(&sc, 1, "n").status.success());
    let out = w.decode("n.iq", "nd", &[]);
    assert_eq!(out.status.code(), Some(2));
    let report = json_file(&w.path("nd.report.json"));
    assert!(report["channels"].as_array().unwrap().is_empty());
    assert_eq!(report["acquisition"].as_array().unwrap().len(), 3);
}

#[test]
fn invalid_scenario_lists_every_error() {
    let w = Work::new();
    let sc = w.scenario(
        "bad.toml",
        "duration_s = 0.0\n[[channels]]\nprn = 3\ndoppler_hz = 0.0\ncode_phase_chips = 0.0\ncn0_dbhz = 45.0\n",
    );
    let out = w.simulate(&sc, 1, "bad");
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("duration_s"), "{err}");
    assert!(err.contains("PRN 3"), "{err}");
    assert!(!w.path("bad.iq").exists());
}

#[test]
fn missing_config_file_fails_fast() {
    let w = Work::new();
    std::fs::write(w.path("cfg2.toml"), "h_matrix = \"nowhere.txt\"\n").unwrap();
    let sc = w.scenario("s.toml", THREE_GEO);
    let out = bin(&["simulate", "--scenario", p(&sc), "--config", p(&w.path("cfg2.toml")), "--seed", "1", "--out", p(&w.path("x"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.txt"));
    assert!(!w.path("x.iq").exists());
}

fn record(time: f64, sat: SatId, kind: &str, epoch: u32, available: bool) -> Value {
    let (mestype, key) = if kind == "clock" { (4, "c0") } else { (2, "radial") };
    json!({
        "time": time, "source_prn": 59, "system": sat.system, "prn": sat.prn, "epoch": epoch,
        "type": mestype, "kind": kind, "iod": 1, "available": available, "values": { key: 0.125 },
    })
}

fn write_lines(path: &Path, lines: &[Value]) {
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(path, text).unwrap();
}

fn analyze(w: &Work, input: &str, out: &str) -> Output {
    bin(&["analyze", "--in", p(&w.path(input)), "--out", p(&w.path(out))])
}

#[test]
fn analyze_reproduces_integrity_row() {
    let w = Work::new();
    let sat = SatId::bds(19);
    let mut lines = Vec::new();
    for e in (0..=3834).step_by(6).filter(|e| !(6..=24).contains(e)) {
        lines.push(record(e as f64, sat, "clock", e, true));
    }
    for e in (0..3839).step_by(48).chain([3839]) {
        lines.push(record(e as f64, sat, "orbit", e, true));
    }
    write_lines(&w.path("c.jsonl"), &lines);
    let before = std::fs::read(w.path("c.jsonl")).unwrap();
    let out = analyze(&w, "c.jsonl", "a");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(w.path("c.jsonl")).unwrap(), before);
    let csv = std::fs::read_to_string(w.path("a.integrity.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("BDS,19,0,3839,3839,0,100.00%,30,99.22%"), "{csv}");
    let schedule = json_file(&w.path("a.schedule.json"));
    assert!(schedule["channels"].as_object().unwrap().is_empty());
}

#[test]
fn analyze_attributes_stale_clock() {
    let w = Work::new();
    let (victim, other) = (SatId::gps(5), SatId::bds(22));
    let mut lines = Vec::new();
    for sat in [victim, other] {
        for e in (600..=1200).step_by(6) {
            // The update due at 900 repeats 894.
            let epoch = if sat == victim && e == 900 { 894 } else { e };
            lines.push(record(e as f64, sat, "clock", epoch, true));
        }
        for e in (600..=1200).step_by(48) {
            lines.push(record(e as f64, sat, "orbit", e, true));
        }
    }
    write_lines(&w.path("c.jsonl"), &lines);
    assert!(analyze(&w, "c.jsonl", "a").status.success());
    let rows = json_file(&w.path("a.integrity.json"))["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let sat: SatId = serde_json::from_value(r["sat"].clone()).unwrap();
        let want = if sat == victim { 12 } else { 0 };
        assert_eq!(r["clock_abnormal_s"], want, "{sat:?}");
        assert_eq!(r["orbit_abnormal_s"], 0);
    }
}

#[test]
fn analyze_synthetic_cycle_has_no_deviations() {
    let w = Work::new();
    let state = CorrectionState::synthetic(&[19, 21, 22, 29, 34, 35, 38, 39, 40, 44], &[2, 5, 6, 7, 9, 12, 13, 15, 18, 19, 25, 29, 30], 3);
    let frames = generate_schedule(&state, 40_000, &MessageSchema::default()).unwrap();
    let mut lines = Vec::new();
    for cycle in 0..2u32 {
        for f in &frames {
            let m = TimedMessage::from_content(f.time + 48 * cycle, &f.content);
            let epoch = m.epoch.map(|e| e + 48 * cycle);
            lines.push(json!({
                "source_prn": 60, "rx_time_s": (f.slot + 48 * cycle) as f64, "time": m.time,
                "start_symbol": 0, "start_sample": 0, "inverted": false, "iterations": 1,
                "converged": true, "crc_ok": true, "mestype": m.mestype, "epoch": epoch, "class": null,
                "sats": m.sats, "records": [], "bits": "00",
            }));
        }
    }
    write_lines(&w.path("m.jsonl"), &lines);
    let out = analyze(&w, "m.jsonl", "a");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = &json_file(&w.path("a.schedule.json"))["channels"]["60"];
    assert_eq!(report["complete_cycles"], 2, "{report}");
    assert!(report["deviations"].as_array().unwrap().is_empty(), "{report}");
}

#[test]
fn analyze_empty_input_warns() {
    let w = Work::new();
    std::fs::write(w.path("e.jsonl"), "").unwrap();
    let out = analyze(&w, "e.jsonl", "a");
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("warn"));
    assert!(json_file(&w.path("a.integrity.json"))["rows"].as_array().unwrap().is_empty());
    assert_eq!(std::fs::read_to_string(w.path("a.integrity.csv")).unwrap().lines().count(), 1);
}

#[test]
fn analyze_refuses_to_overwrite_input() {
    let w = Work::new();
    std::fs::write(w.path("x.integrity.csv"), "").unwrap();
    let out = bin(&["analyze", "--in", p(&w.path("x.integrity.csv")), "--out", p(&w.path("x"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bin(&["simulate"]).status.code(), Some(1));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}
