mod common;

use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use telltale::data::save_sample;
use telltale::model::load_model;
use telltale::numerics::Tensor;
use telltale::oracle::RemoteOracle;

const ORACLES: [&str; 4] = ["0:sequential", "1:reversed", "2:pairwise", "3:kahan"];

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(common::binary()).args(args).current_dir(dir).output().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn train(dir: &Path) {
    let o = run(&["train", "--out", "m.bfmd"], dir);
    assert!(o.status.success(), "{}", text(&o));
}

fn oracle_args() -> Vec<&'static str> {
    ORACLES.iter().flat_map(|o| ["--oracles", o]).collect()
}

fn forge(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["forge", "--model", "m.bfmd", "--out", out];
    args.extend(oracle_args());
    args.extend_from_slice(extra);
    run(&args, dir)
}

#[test]
fn train_writes_a_loadable_reproducible_model() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path());
    let model = load_model(dir.path().join("m.bfmd")).unwrap();
    assert_eq!(model.input_len(), 256);
    assert_eq!(model.num_classes(), 4);
    let o = run(&["train", "--out", "again.bfmd"], dir.path());
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(dir.path().join("m.bfmd")).unwrap(),
        std::fs::read(dir.path().join("again.bfmd")).unwrap()
    );
}

#[test]
fn zero_learning_rate_stays_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--out", "z.bfmd", "--lr", "0"], dir.path());
    assert!(o.status.success());
    let out = text(&o);
    let acc: f64 = out
        .split("accuracy ")
        .nth(1)
        .and_then(|s| s.split('%').next())
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| panic!("no accuracy in {out}"));
    assert!(acc < 50.0, "{out}");
}

#[test]
fn serve_rejects_unknown_strategy() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path());
    let o = run(&["serve", "--model", "m.bfmd", "--strategy", "fancy"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("sequential, reversed, pairwise, kahan"), "{}", text(&o));
}

#[test]
fn serve_reports_an_occupied_port() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path());
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let o = run(&["serve", "--model", "m.bfmd", "--bind", &addr], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("cannot bind"), "{}", text(&o));
}

struct Killed(Child);

impl Drop for Killed {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn free_port() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap().to_string()
}

fn start_server(dir: &Path, strategy: &str) -> (Killed, String) {
    let addr = free_port();
    let child = Command::new(common::binary())
        .args(["serve", "--model", "m.bfmd", "--strategy", strategy, "--bind", &addr])
        .current_dir(dir)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let start = Instant::now();
    while TcpStream::connect(&addr).is_err() {
        assert!(start.elapsed() < Duration::from_secs(20), "server did not come up");
        thread::sleep(Duration::from_millis(20));
    }
    (Killed(child), addr)
}

#[test]
fn served_model_answers_info_and_forge_uses_it() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path());
    let (_server, addr) = start_server(dir.path(), "kahan");
    let remote = RemoteOracle::connect(&addr, 3, 0).unwrap();
    assert_eq!(remote.info().strategy, "kahan");
    assert_eq!(remote.info().input_len, 256);

    let remote_spec = format!("3:{addr}");
    let base = ["forge", "--model", "m.bfmd", "--count", "4", "--seed", "0", "--jobs", "2"];
    let mut mixed: Vec<&str> = base.to_vec();
    mixed.extend(["--out", "mixed", "--oracles", "0:sequential", "--oracles", "1:reversed"]);
    mixed.extend(["--oracles", "2:pairwise", "--oracles", &remote_spec]);
    let o = run(&mixed, dir.path());
    assert_ne!(o.status.code(), Some(1), "{}", text(&o));
    let mut local: Vec<&str> = base.to_vec();
    local.extend(["--out", "local"]);
    local.extend(oracle_args());
    run(&local, dir.path());
    assert_eq!(
        std::fs::read(dir.path().join("mixed/results.csv")).unwrap(),
        std::fs::read(dir.path().join("local/results.csv")).unwrap()
    );
}

#[test]
fn forge_with_unreachable_oracles() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path());
    let dead = format!("1:{}", free_port());
    let args = ["forge", "--model", "m.bfmd", "--count", "2", "--out", "o", "--oracles", "0:sequential", "--oracles", &dead];
    let o = run(&args, dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    let results = telltale::metrics::read_results_json(dir.path().join("o/results.json")).unwrap();
    assert!(results.runs.iter().all(|r| r.error.is_some()));

    let dead2 = format!("0:{}", free_port());
    let args = ["forge", "--model", "m.bfmd", "--count", "2", "--out", "p", "--oracles", &dead2, "--oracles", &dead];
    let o = run(&args, dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains("no oracle reachable"));
}

#[test]
fn forge_with_nothing_to_do() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path());
    let o = forge(dir.path(), "empty", &["--count", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    let results = telltale::metrics::read_results_json(dir.path().join("empty/results.json")).unwrap();
    assert_eq!(results.report.total_runs, 0);
    assert!(results.report.confusion.is_empty());

    let o = run(&["forge", "--model", "m.bfmd", "--oracles", "0:sequential", "--oracles", "0:kahan"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("need >= 2 MAs"));
}

#[test]
fn forge_probe_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path());
    let o = forge(dir.path(), "out", &["--count", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let results = telltale::metrics::read_results_json(dir.path().join("out/results.json")).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    assert_eq!(csv.lines().count() - 1, results.runs.len());

    let success = results.runs.iter().find(|r| r.summary.success).unwrap();
    let sample = format!("out/{}", success.sample_file.as_ref().unwrap());
    let mut args = vec!["probe", sample.as_str(), "--model", "m.bfmd"];
    args.extend(oracle_args());
    let o = run(&args, dir.path());
    assert!(o.status.success());
    let expected = format!("verdict: identifies MA {}", success.summary.identified_ma.unwrap());
    assert!(text(&o).contains(&expected), "{}", text(&o));

    let original = format!("out/{}", success.original_file.as_ref().unwrap());
    args[1] = original.as_str();
    let o = run(&args, dir.path());
    assert!(text(&o).contains("verdict: not identifying"), "{}", text(&o));

    let o = run(&["report", "out/results.json", "--viz"], dir.path());
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains(&format!("runs: {}", results.runs.len())));
    let viz = dir.path().join("out/viz");
    let name = format!("run_{:06}", success.seed);
    assert!(viz.join(format!("{name}_original.pgm")).exists());
    assert!(viz.join(format!("{name}_amplified.pgm")).exists());
    let images = std::fs::read_dir(&viz).unwrap().count();
    assert_eq!(images, 2 * results.report.successes);
}

#[test]
fn bad_inputs_are_operational_errors() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path());
    std::fs::write(dir.path().join("junk.bsf"), b"BSF1\x02\x01").unwrap();
    let mut args = vec!["probe", "junk.bsf", "--model", "m.bfmd"];
    args.extend(oracle_args());
    let o = run(&args, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("truncated"), "{}", text(&o));

    let o = run(&["report", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));

    save_sample(&Tensor::vector(vec![0.5; 3]), dir.path().join("small.bsf")).unwrap();
    let o = forge(dir.path(), "x", &["--sample", "small.bsf"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("does not fit"), "{}", text(&o));
}
