use std::path::Path;

use xrsim::config::{parse_config, parse_config_file, PolicySpec};
use xrsim_core::netsim::Discipline;

const BASE: &str = "
[media]
fps = 90
eyes = 2

[network]
downlink = 20@10000, 60@10000
discipline = frameaware

[rl]
hidden = 32, 32
steps = 1000

[run]
seed = 4
output_dir = out/a
";

#[test]
fn empty_file_gives_defaults() {
    let cfg = parse_config("").unwrap();
    assert_eq!(cfg.media.eyes, 2);
    assert_eq!(cfg.run.seed, 1);
    assert_eq!(cfg.run.policy, PolicySpec::Oracle);
    assert_eq!(cfg.rl.hidden, vec![64, 64]);
    assert_eq!(cfg.session.ladder.len(), 5);
    assert_eq!(
        cfg.session.sim.network.queue.discipline,
        Discipline::DropTail
    );
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "ini") {
            parse_config_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 2);
}

#[test]
fn bad_eyes_names_key_and_allowed_values() {
    let err = parse_config("[media]\neyes = 3\n").unwrap_err();
    assert_eq!(err.0.len(), 1);
    let msg = err.to_string();
    assert!(msg.contains("media.eyes"), "{msg}");
    assert!(msg.contains("{1, 2}"), "{msg}");
    assert_eq!(err.0[0].line, Some(2));
}

#[test]
fn all_problems_reported_together() {
    let text = "[media]\neyes = 3\nfps = -1\n[network]\nqueue_bytes = lots\nbogus = 1\n[nowhere]\n";
    let err = parse_config(text).unwrap_err();
    let msg = err.to_string();
    for needle in [
        "media.eyes",
        "media.fps",
        "network.queue_bytes",
        "network.bogus",
        "nowhere",
    ] {
        assert!(msg.contains(needle), "missing {needle} in:\n{msg}");
    }
}

#[test]
fn duplicate_key_is_an_error() {
    let err = parse_config("[run]\nseed = 1\nseed = 2\n").unwrap_err();
    assert!(err.to_string().contains("run.seed"), "{err}");
}

#[test]
fn hash_ignores_layout_comments_and_order() {
    let a = parse_config(BASE).unwrap();
    let reordered = "
# same experiment, different layout
[run]
output_dir = out/a
seed=4

[rl]
steps = 1000
hidden = 32,32
[network]
discipline = frameaware
downlink = 20@10000,60@10000
[media]
eyes = 2
fps = 90.0
";
    let b = parse_config(reordered).unwrap();
    assert_eq!(a.canonical(), b.canonical());
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn hash_tracks_semantic_changes_only() {
    let a = parse_config(BASE).unwrap();
    let seed = parse_config(&BASE.replace("seed = 4", "seed = 5")).unwrap();
    let fps = parse_config(&BASE.replace("fps = 90", "fps = 60")).unwrap();
    let out = parse_config(&BASE.replace("out/a", "elsewhere")).unwrap();
    assert_ne!(a.hash(), seed.hash());
    assert_ne!(a.hash(), fps.hash());
    assert_eq!(a.hash(), out.hash());
    // explicit defaults are the same experiment
    let explicit = parse_config(&BASE.replace("[rl]", "[rl]\nagents = 1")).unwrap();
    assert_eq!(a.hash(), explicit.hash());
}

#[test]
fn policy_spec_round_trips() {
    for s in ["oracle", "trained", "fixed 3"] {
        let p: PolicySpec = s.parse().unwrap();
        assert_eq!(p.to_string(), s);
    }
    assert!("fixed".parse::<PolicySpec>().is_err());
    assert!("fixed x".parse::<PolicySpec>().is_err());
}

#[test]
fn frame_aware_threshold_defaults_to_80_percent() {
    let cfg = parse_config("[network]\ndiscipline = frameaware\nqueue_bytes = 100000\n").unwrap();
    let q = &cfg.session.sim.network.queue;
    assert_eq!(q.capacity_bytes, 100_000);
    assert_eq!(q.threshold_bytes, 80_000);
    assert!(q.unmarked_droppable);
}
