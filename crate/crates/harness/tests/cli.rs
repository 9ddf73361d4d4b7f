use std::path::Path;

use xrsim::cli::{run_cli, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
use xrsim::report::{Aggregate, AggregateRow};

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_cli(
        std::iter::once("xrsim").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

const SMALL: &str = "
[network]
downlink = 30@5000, 60@5000

[rl]
hidden = 16
steps = 200
sync_period = 50
minibatch = 16

[run]
seed = 3
duration_s = 12
";

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.ini");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn calc_rate_single_eye() {
    let (code, out, _) = cli(&[
        "calc", "rate", "--width", "2160", "--height", "1200", "--fps", "90", "--codec", "h264",
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("54.9 Mb/s"), "{out}");
}

#[test]
fn calc_latency_at_120_hz() {
    let (code, out, _) = cli(&["calc", "latency", "--fps", "120"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("8.3 ms"), "{out}");
}

#[test]
fn calc_rejects_zero_fps() {
    let (code, _, err) = cli(&["calc", "latency", "--fps", "0"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("fps"), "{err}");
    let (code, _, _) = cli(&[
        "calc", "rate", "--width", "10", "--height", "10", "--fps", "0",
    ]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn calc_verify_paper_lists_every_check() {
    let (code, out, _) = cli(&["calc", "--verify-paper"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.lines().count() >= 8, "{out}");
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(cli(&[]).0, EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]).0, EXIT_USAGE);
    let (code, _, err) = cli(&["simulate", "--config", "/nonexistent/x.ini"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("cannot read"), "{err}");
}

#[test]
fn help_and_version_exit_0() {
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("simulate"));
    assert_eq!(cli(&["--version"]).0, EXIT_OK);
}

#[test]
fn invalid_config_reports_every_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[media]\neyes = 3\n[run]\nduration_s = -2\n");
    let (code, _, err) = cli(&["simulate", "--config", &cfg]);
    assert_eq!(code, EXIT_USAGE);
    assert!(
        err.contains("media.eyes") && err.contains("run.duration_s"),
        "{err}"
    );
}

#[test]
fn bad_policy_and_level_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(
        cli(&[
            "simulate",
            "--config",
            &cfg,
            "--out-dir",
            out,
            "--policy",
            "best"
        ])
        .0,
        EXIT_USAGE
    );
    assert_eq!(
        cli(&[
            "simulate",
            "--config",
            &cfg,
            "--out-dir",
            out,
            "--policy",
            "fixed 9"
        ])
        .0,
        EXIT_USAGE
    );
}

#[test]
fn trained_policy_without_checkpoint_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    let (code, _, err) = cli(&[
        "simulate",
        "--config",
        &cfg,
        "--out-dir",
        out.to_str().unwrap(),
        "--policy",
        "trained",
    ]);
    assert_eq!(code, EXIT_RUNTIME);
    assert!(err.contains("checkpoint"), "{err}");
}

fn summary_value(summary: &str, key: &str) -> f64 {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {summary}"))
        .parse()
        .unwrap()
}

#[test]
fn simulate_csvs_reproduce_the_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("sim");
    let (code, out, err) = cli(&[
        "simulate",
        "--config",
        &cfg,
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(
        out,
        std::fs::read_to_string(dir.join("summary.txt")).unwrap()
    );
    assert!(!dir.join("trace.csv").exists());

    let mut intervals = csv::Reader::from_path(dir.join("intervals.csv")).unwrap();
    let headers = intervals.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (total, dec, loss, lat) = (
        col("frames_total"),
        col("frames_decodable"),
        col("loss_rate"),
        col("latency_ms"),
    );
    let mut qoe = csv::Reader::from_path(dir.join("qoe.csv")).unwrap();
    let rows: Vec<AggregateRow> = intervals
        .records()
        .zip(qoe.records())
        .map(|(i, q)| {
            let (i, q) = (i.unwrap(), q.unwrap());
            AggregateRow {
                qoe: q[4].parse().unwrap(),
                reward: q[5].parse().unwrap(),
                frames_total: i[total].parse().unwrap(),
                frames_decodable: i[dec].parse().unwrap(),
                loss_rate: i[loss].parse().unwrap(),
                latency_ms: i[lat].parse().unwrap(),
            }
        })
        .collect();
    assert_eq!(rows.len(), 12);
    let a = Aggregate::from_rows(&rows);
    assert_eq!(a.mean_qoe, summary_value(&out, "mean_qoe"));
    assert_eq!(a.mean_reward, summary_value(&out, "mean_reward"));
    assert_eq!(a.decodable_ratio, summary_value(&out, "decodable_ratio"));
    assert_eq!(a.loss_rate, summary_value(&out, "loss_rate"));
    assert_eq!(a.p95_latency_ms, summary_value(&out, "p95_latency_ms"));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("sim");
    let (code, out, _) = cli(&[
        "simulate",
        "--config",
        &cfg,
        "--out-dir",
        dir.to_str().unwrap(),
        "--seed",
        "77",
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("seed: 77"), "{out}");
}

#[test]
fn train_then_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SMALL.replace("duration_s = 12", "duration_s = 12\neval_seeds = 2"),
    );
    let dir = tmp.path().join("t");
    let d = dir.to_str().unwrap();
    let (code, out, err) = cli(&["train", "--config", &cfg, "--out-dir", d]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("trained 200 steps"), "{out}");
    let log = std::fs::read_to_string(dir.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 201);

    let ckpt = dir.join("checkpoint.bin");
    let (code, out, err) = cli(&[
        "compare",
        "--config",
        &cfg,
        "--out-dir",
        d,
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("oracle") && out.contains("trained"), "{out}");
    let table = std::fs::read_to_string(dir.join("compare.csv")).unwrap();
    // header, trained, five fixed levels, oracle
    assert_eq!(table.lines().count(), 8);
    let runs = std::fs::read_to_string(dir.join("compare_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 7 * 2);
}
