//! Experiment configuration: a sectioned `key = value` file, validated as a
//! whole, with a canonical form for hashing.
//!
//! The grammar and every key are documented in `docs/config-format.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use xrsim_core::media_calc::{Codec, MediaSpec};
use xrsim_core::netsim::measure::Vantage;
use xrsim_core::netsim::{
    CapacitySchedule, Discipline, JitterModel, Link, Microburst, NetworkConfig, QueueConfig,
    SimConfig, SourceConfig,
};
use xrsim_core::qoe::{FactorNode, FactorTree, IndexWeights, KpiField, RewardParams};
use xrsim_core::rl::{EpsilonSchedule, LearnerConfig, NormBounds, TrainConfig};
use xrsim_core::session::{Session, SessionConfig};
use xrsim_core::traffic::{FrameType, FrameWeights, GopPattern, UplinkSize};
use xrsim_core::SimTime;

/// One problem found in a config file.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    /// 1-based line, when the problem is tied to one.
    pub line: Option<usize>,
    /// `section.key`, a section name, or the file path.
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

/// Every problem found in a config file, in file order where possible.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Which controller `simulate` runs.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicySpec {
    Fixed(usize),
    Oracle,
    Trained,
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Fixed(l) => write!(f, "fixed {l}"),
            PolicySpec::Oracle => f.write_str("oracle"),
            PolicySpec::Trained => f.write_str("trained"),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let words: Vec<&str> = s.split_whitespace().collect();
        match words.as_slice() {
            ["oracle"] => Ok(PolicySpec::Oracle),
            ["trained"] => Ok(PolicySpec::Trained),
            ["fixed", level] => level
                .parse()
                .map(PolicySpec::Fixed)
                .map_err(|_| format!("bad level '{level}'")),
            _ => Err(format!(
                "expected 'oracle', 'trained' or 'fixed <level>', got '{s}'"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RlConfig {
    pub history_k: usize,
    pub hidden: Vec<usize>,
    pub learner: LearnerConfig,
    pub agents: usize,
    pub steps: u64,
    pub sync_period: usize,
    pub minibatch: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of `steps` over which epsilon is annealed.
    pub epsilon_anneal: f64,
    pub episode_steps: usize,
    pub randomize_phase: bool,
    /// Seed of the network initialization.
    pub init_seed: u64,
}

impl RlConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            agents: self.agents,
            sync_period: self.sync_period,
            minibatch: self.minibatch,
            total_steps: self.steps,
            epsilon: EpsilonSchedule {
                start: self.epsilon_start,
                end: self.epsilon_end,
                anneal_steps: (self.epsilon_anneal * self.steps as f64).round() as u64,
            },
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub duration_s: f64,
    pub policy: PolicySpec,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub trace: bool,
    pub eval_seeds: usize,
    pub seed: u64,
}

impl RunConfig {
    /// Whole measurement intervals in one run.
    pub fn intervals(&self, interval_ms: f64) -> u64 {
        (self.duration_s * 1_000.0 / interval_ms).floor() as u64
    }
}

/// A fully validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub media: MediaSpec,
    /// Session template; the seed is set per run.
    pub session: SessionConfig,
    pub rl: RlConfig,
    pub run: RunConfig,
    canonical: String,
}

impl ExperimentConfig {
    /// Every key with its effective value, one `section.key = value` per
    /// line in sorted order. `run.output_dir` is left out: it says where
    /// results go, not what they are.
    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical.as_bytes()))
    }

    /// Session configuration for a run with `seed`.
    pub fn session_for(&self, seed: u64) -> SessionConfig {
        let mut c = self.session.clone();
        c.sim.seed = seed;
        c
    }
}

pub fn parse_config_file(path: &Path) -> Result<ExperimentConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ConfigErrors(vec![ConfigError {
            line: None,
            key: path.display().to_string(),
            message: format!("cannot read: {e}"),
        }])
    })?;
    parse_config(&text)
}

const SECTIONS: [&str; 6] = ["media", "traffic", "network", "qoe", "rl", "run"];

struct Entry {
    value: String,
    line: usize,
}

struct Reader {
    entries: BTreeMap<(String, String), Entry>,
    sections: BTreeMap<String, usize>,
    used: BTreeSet<(String, String)>,
    canon: BTreeMap<String, String>,
    errors: Vec<ConfigError>,
}

impl Reader {
    fn lex(text: &str) -> Reader {
        let mut r = Reader {
            entries: BTreeMap::new(),
            sections: BTreeMap::new(),
            used: BTreeSet::new(),
            canon: BTreeMap::new(),
            errors: Vec::new(),
        };
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    r.error(line, content, "section header is missing ']'");
                    section = None;
                    continue;
                };
                let name = name.trim().to_string();
                if !SECTIONS.contains(&name.as_str()) {
                    r.error(
                        line,
                        &name,
                        format!("unknown section (expected one of {})", SECTIONS.join(", ")),
                    );
                    section = None;
                    continue;
                }
                if let Some(prev) = r.sections.get(&name) {
                    let msg = format!("section repeated (first on line {prev})");
                    r.error(line, &name, msg);
                } else {
                    r.sections.insert(name.clone(), line);
                }
                section = Some(name);
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                r.error(line, content, "expected 'key = value'");
                continue;
            };
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                r.error(line, key, "keys are letters, digits and '_'");
                continue;
            }
            let Some(sec) = section.clone() else {
                r.error(line, key, "key outside any section");
                continue;
            };
            let id = (sec, key.to_string());
            if let Some(prev) = r.entries.get(&id) {
                let msg = format!("duplicate key (first on line {})", prev.line);
                r.error(line, &format!("{}.{}", id.0, id.1), msg);
                continue;
            }
            r.entries.insert(
                id,
                Entry {
                    value: value.trim().to_string(),
                    line,
                },
            );
        }
        r
    }

    fn error(&mut self, line: usize, key: &str, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line: Some(line),
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|e| e.line)
    }

    /// Error tied to `section.key`, with its line when the key was given.
    fn key_error(&mut self, section: &str, key: &str, message: impl Into<String>) {
        let (line, key) = if key.is_empty() {
            (self.sections.get(section).copied(), section.to_string())
        } else {
            (self.line_of(section, key), format!("{section}.{key}"))
        };
        self.errors.push(ConfigError {
            line,
            key,
            message: message.into(),
        });
    }

    /// Raw text of a key, marking it as known.
    fn raw(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let id = (section.to_string(), key.to_string());
        self.used.insert(id.clone());
        self.entries.get(&id).map(|e| (e.value.clone(), e.line))
    }

    fn record(&mut self, section: &str, key: &str, canonical: String) {
        self.canon.insert(format!("{section}.{key}"), canonical);
    }

    /// Parses a key, falling back to `default` (and recording the error)
    /// when it is absent or invalid.
    fn get<T>(
        &mut self,
        section: &str,
        key: &str,
        default: T,
        parse: impl Fn(&str) -> Result<T, String>,
        show: impl Fn(&T) -> String,
    ) -> T {
        let value = match self.raw(section, key) {
            None => default,
            Some((text, line)) => match parse(&text) {
                Ok(v) => v,
                Err(msg) => {
                    self.error(line, &format!("{section}.{key}"), msg);
                    default
                }
            },
        };
        self.record(section, key, show(&value));
        value
    }

    fn f64_in(&mut self, section: &str, key: &str, default: f64, range: Range) -> f64 {
        self.get(
            section,
            key,
            default,
            |s| range.check(parse_f64(s)?),
            fmt_f64,
        )
    }

    fn u64_in(&mut self, section: &str, key: &str, default: u64, lo: u64, hi: u64) -> u64 {
        self.get(
            section,
            key,
            default,
            |s| {
                let v: u64 = s
                    .parse()
                    .map_err(|_| format!("expected a non-negative integer, got '{s}'"))?;
                if v < lo || v > hi {
                    return Err(if hi == u64::MAX {
                        format!("must be >= {lo}, got {v}")
                    } else {
                        format!("must be in [{lo}, {hi}], got {v}")
                    });
                }
                Ok(v)
            },
            |v| v.to_string(),
        )
    }

    fn bool(&mut self, section: &str, key: &str, default: bool) -> bool {
        self.get(
            section,
            key,
            default,
            |s| match s {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(format!("expected true or false, got '{s}'")),
            },
            |v| v.to_string(),
        )
    }

    fn parsed<T: FromStr + fmt::Display>(&mut self, section: &str, key: &str, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        self.get(
            section,
            key,
            default,
            |s| s.parse::<T>().map_err(|e| e.to_string()),
            |v| v.to_string(),
        )
    }

    fn unknown_keys(&mut self) {
        let unknown: Vec<(String, usize)> = self
            .entries
            .iter()
            .filter(|(id, _)| !self.used.contains(*id))
            .map(|((s, k), e)| (format!("{s}.{k}"), e.line))
            .collect();
        for (key, line) in unknown {
            self.error(line, &key, "unknown key");
        }
    }
}

#[derive(Clone, Copy)]
enum Range {
    /// `x > 0`
    Positive,
    /// `x >= 0`
    NonNegative,
    /// `lo <= x <= hi`
    Closed(f64, f64),
    /// `lo < x <= hi`
    LeftOpen(f64, f64),
}

impl Range {
    fn check(self, v: f64) -> Result<f64, String> {
        let ok = match self {
            Range::Positive => v > 0.0,
            Range::NonNegative => v >= 0.0,
            Range::Closed(lo, hi) => (lo..=hi).contains(&v),
            Range::LeftOpen(lo, hi) => v > lo && v <= hi,
        };
        if ok {
            return Ok(v);
        }
        Err(match self {
            Range::Positive => format!("must be > 0, got {v}"),
            Range::NonNegative => format!("must be >= 0, got {v}"),
            Range::Closed(lo, hi) => format!("must be in [{lo}, {hi}], got {v}"),
            Range::LeftOpen(lo, hi) => format!("must be in ({lo}, {hi}], got {v}"),
        })
    }
}

/// A finite number, optionally written as a ratio `a/b`.
fn parse_f64(s: &str) -> Result<f64, String> {
    let bad = || format!("expected a number, got '{s}'");
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => s.parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Shortest text that parses back to the same value.
pub fn fmt_f64(v: &f64) -> String {
    format!("{v:?}")
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split([',', ' ', '\t'])
        .filter(|w| !w.is_empty())
        .map(item)
        .collect()
}

fn show_list<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

fn parse_capacity(s: &str) -> Result<Vec<(f64, f64)>, String> {
    let segs: Vec<(f64, f64)> = s
        .split(',')
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(|seg| match seg.split_once('@') {
            Some((mbps, ms)) => Ok((
                Range::Positive.check(parse_f64(mbps.trim())?)?,
                Range::Positive.check(parse_f64(ms.trim())?)?,
            )),
            None => Ok((Range::Positive.check(parse_f64(seg)?)?, 0.0)),
        })
        .collect::<Result<_, String>>()?;
    match segs.as_slice() {
        [] => Err("expected '<Mb/s>' or '<Mb/s>@<ms>, ...'".into()),
        [(_, 0.0)] => Ok(segs),
        many if many.iter().all(|(_, d)| *d > 0.0) => Ok(segs),
        _ => Err("every segment of a schedule needs a duration '<Mb/s>@<ms>'".into()),
    }
}

fn show_capacity(segs: &[(f64, f64)]) -> String {
    show_list(segs, |(mbps, ms)| {
        if *ms == 0.0 {
            fmt_f64(mbps)
        } else {
            format!("{}@{}", fmt_f64(mbps), fmt_f64(ms))
        }
    })
}

fn parse_jitter(s: &str) -> Result<JitterModel, String> {
    let words: Vec<&str> = s.split_whitespace().collect();
    let num = |w: &str| Range::NonNegative.check(parse_f64(w)?);
    match words.as_slice() {
        ["none"] => Ok(JitterModel::None),
        ["uniform", ms] => Ok(JitterModel::Uniform { ms: num(ms)? }),
        ["walk", step, bound] => Ok(JitterModel::RandomWalk {
            step_ms: num(step)?,
            bound_ms: num(bound)?,
        }),
        _ => Err(format!(
            "expected 'none', 'uniform <ms>' or 'walk <step_ms> <bound_ms>', got '{s}'"
        )),
    }
}

fn show_jitter(j: &JitterModel) -> String {
    match j {
        JitterModel::None => "none".into(),
        JitterModel::Uniform { ms } => format!("uniform {}", fmt_f64(ms)),
        JitterModel::RandomWalk { step_ms, bound_ms } => {
            format!("walk {} {}", fmt_f64(step_ms), fmt_f64(bound_ms))
        }
    }
}

fn parse_bursts(s: &str) -> Result<Vec<Microburst>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(|b| {
            let parts: Vec<&str> = b.split(':').map(str::trim).collect();
            let [start, dur, rate] = parts.as_slice() else {
                return Err(format!(
                    "expected '<start_ms>:<duration_ms>:<Mb/s>', got '{b}'"
                ));
            };
            let start = Range::NonNegative.check(parse_f64(start)?)?;
            Ok(Microburst {
                start: SimTime::from_ms_f64(start),
                duration_ms: Range::Positive.check(parse_f64(dur)?)?,
                rate_bps: Range::Positive.check(parse_f64(rate)?)? * 1e6,
            })
        })
        .collect()
}

fn show_bursts(bursts: &[Microburst]) -> String {
    show_list(bursts, |b| {
        format!(
            "{}:{}:{}",
            fmt_f64(&(b.start.as_us() as f64 / 1_000.0)),
            fmt_f64(&b.duration_ms),
            fmt_f64(&(b.rate_bps / 1e6))
        )
    })
}

fn parse_priority(s: &str) -> Result<[FrameType; 3], String> {
    let types = parse_list(s, |w| w.parse::<FrameType>().map_err(|e| e.to_string()))?;
    let mut sorted: Vec<&str> = types.iter().map(|t| t.as_str()).collect();
    sorted.sort_unstable();
    if sorted != ["B", "I", "P"] {
        return Err(format!("must list each of I, P, B once, got '{s}'"));
    }
    Ok([types[0], types[1], types[2]])
}

/// `weight kpi worst best; ...` for one index sub-tree.
fn parse_tree(name: &'static str) -> impl Fn(&str) -> Result<FactorNode, String> {
    move |s: &str| {
        let children = s
            .split(';')
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(|leaf| {
                let words: Vec<&str> = leaf.split_whitespace().collect();
                let [w, kpi, worst, best] = words.as_slice() else {
                    return Err(format!(
                        "expected '<weight> <kpi> <worst> <best>', got '{leaf}'"
                    ));
                };
                let kpi: KpiField = kpi.parse().map_err(|e: xrsim_core::Error| e.to_string())?;
                Ok((
                    parse_f64(w)?,
                    FactorNode::leaf(kpi, parse_f64(worst)?, parse_f64(best)?),
                ))
            })
            .collect::<Result<Vec<_>, String>>()?;
        if children.is_empty() {
            return Err("needs at least one leaf".into());
        }
        let node = FactorNode::node(name, children);
        node.validate(&format!("qoe.{name}"))
            .map_err(|e| e.to_string())?;
        Ok(node)
    }
}

fn show_tree(node: &FactorNode) -> String {
    match node {
        FactorNode::Leaf(l) => format!("1.0 {} {} {}", l.kpi, fmt_f64(&l.worst), fmt_f64(&l.best)),
        FactorNode::Node { children, .. } => children
            .iter()
            .map(|(w, c)| match c {
                FactorNode::Leaf(l) => format!(
                    "{} {} {} {}",
                    fmt_f64(w),
                    l.kpi,
                    fmt_f64(&l.worst),
                    fmt_f64(&l.best)
                ),
                nested => format!("{} ({})", fmt_f64(w), show_tree(nested)),
            })
            .collect::<Vec<_>>()
            .join("; "),
    }
}

/// Parses and validates a whole config; all problems are reported together.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut r = Reader::lex(text);

    // [media]
    let width = r.u64_in("media", "width", 2160, 1, u64::MAX);
    let height = r.u64_in("media", "height", 1200, 1, u64::MAX);
    let bits = r.u64_in("media", "bits", 8, 1, 16) as u32;
    let fps = r.f64_in("media", "fps", 90.0, Range::LeftOpen(0.0, 1_000.0));
    let eyes = r.get(
        "media",
        "eyes",
        2u32,
        |s| match s.parse::<u32>() {
            Ok(v @ (1 | 2)) => Ok(v),
            _ => Err(format!("must be one of {{1, 2}}, got '{s}'")),
        },
        |v| v.to_string(),
    );
    let codec: Codec = r.parsed("media", "codec", Codec::H264);
    let media = MediaSpec::explicit(width, height, bits, fps, eyes).with_codec(codec);
    for e in media.violations() {
        r.key_error("media", "", e.to_string());
    }

    // [traffic]
    let default_gop: GopPattern = "IPPPPPPPPPPPPPPPPPPPPPPPPPPPPP".parse().expect("valid GOP");
    let gop = r.get(
        "traffic",
        "gop",
        default_gop,
        |s| s.parse::<GopPattern>().map_err(|e| e.to_string()),
        |g| g.to_string(),
    );
    let mut source = SourceConfig::new(gop, fps, eyes);
    source.weights = r.get(
        "traffic",
        "frame_weights",
        FrameWeights::default(),
        |s| {
            let w = parse_list(s, parse_f64)?;
            let [i, p, b] = w.as_slice() else {
                return Err(format!("expected three weights 'I P B', got '{s}'"));
            };
            let w = FrameWeights {
                i: *i,
                p: *p,
                b: *b,
            };
            w.validate().map_err(|e| e.to_string())?;
            Ok(w)
        },
        |w| show_list(&[w.i, w.p, w.b], fmt_f64),
    );
    source.mtu_payload = r.u64_in(
        "traffic",
        "mtu_payload",
        source.mtu_payload as u64,
        1,
        65_535,
    ) as u32;
    source.header_bytes = r.u64_in(
        "traffic",
        "header_bytes",
        source.header_bytes as u64,
        0,
        1_000,
    ) as u32;
    source.size_noise = r.f64_in("traffic", "size_noise", 0.0, Range::Closed(0.0, 0.9));
    source.pose_rate_hz = r.f64_in(
        "traffic",
        "pose_rate_hz",
        source.pose_rate_hz,
        Range::LeftOpen(0.0, 10_000.0),
    );
    let up_min = r.u64_in("traffic", "uplink_min_bytes", 16, 16, 400) as u32;
    let up_max = r.u64_in("traffic", "uplink_max_bytes", 400, 16, 400) as u32;
    if up_min > up_max {
        r.key_error(
            "traffic",
            "uplink_min_bytes",
            format!("exceeds uplink_max_bytes ({up_min} > {up_max})"),
        );
    }
    source.uplink_size = if up_min == up_max {
        UplinkSize::Constant(up_min)
    } else {
        UplinkSize::Uniform {
            min: up_min.min(up_max),
            max: up_max,
        }
    };
    source.sync_bytes =
        r.u64_in("traffic", "sync_bytes", source.sync_bytes as u64, 1, 1_460) as u32;
    source.sync_downlink = r.bool("traffic", "sync_downlink", true);
    source.sync_uplink = r.bool("traffic", "sync_uplink", true);

    // [network]
    let segments = r.get(
        "network",
        "downlink",
        vec![(60.0, 0.0)],
        parse_capacity,
        |s| show_capacity(s),
    );
    let cyclic = r.bool("network", "downlink_cyclic", true);
    let uplink_mbps = r.f64_in("network", "uplink_mbps", 100.0, Range::Positive);
    let propagation_ms = r.f64_in("network", "propagation_ms", 5.0, Range::NonNegative);
    let jitter = r.get(
        "network",
        "jitter",
        JitterModel::None,
        parse_jitter,
        show_jitter,
    );
    let discipline: Discipline = r.parsed("network", "discipline", Discipline::DropTail);
    let queue_bytes = r.u64_in("network", "queue_bytes", 250_000, 1, u64::MAX);
    let default_threshold = match discipline {
        Discipline::DropTail => queue_bytes,
        Discipline::FrameAware => queue_bytes * 4 / 5,
    };
    let threshold = r.u64_in(
        "network",
        "queue_threshold_bytes",
        default_threshold,
        0,
        u64::MAX,
    );
    let drop_priority = r.get(
        "network",
        "drop_priority",
        QueueConfig::DEFAULT_PRIORITY,
        parse_priority,
        |p| show_list(p, |t| t.as_str().to_string()),
    );
    let evict_queued = r.bool("network", "evict_queued", true);
    let unmarked_droppable = r.bool("network", "unmarked_droppable", true);
    let uplink_queue_bytes = r.u64_in("network", "uplink_queue_bytes", 1 << 20, 1, u64::MAX);
    let microbursts = r.get("network", "microbursts", Vec::new(), parse_bursts, |b| {
        show_bursts(b)
    });
    let cross_packet_bytes = r.u64_in(
        "network",
        "cross_packet_bytes",
        xrsim_core::netsim::CROSS_PACKET_BYTES as u64,
        1,
        65_535,
    ) as u32;

    let capacity = if segments.len() == 1 {
        CapacitySchedule::constant(segments[0].0 * 1e6)
    } else {
        CapacitySchedule::new(
            segments
                .iter()
                .map(|(mbps, ms)| (SimTime::from_ms_f64(*ms), mbps * 1e6))
                .collect(),
            cyclic,
        )
        .unwrap_or_else(|e| {
            r.key_error("network", "downlink", e.to_string());
            CapacitySchedule::constant(60e6)
        })
    };
    let network = NetworkConfig {
        downlink: Link {
            capacity,
            propagation_ms,
            jitter,
        },
        uplink: Link::constant(uplink_mbps * 1e6, propagation_ms),
        queue: QueueConfig {
            capacity_bytes: queue_bytes,
            discipline,
            drop_priority,
            threshold_bytes: threshold,
            evict_queued,
            unmarked_droppable,
        },
        uplink_queue_bytes,
        microbursts,
        cross_packet_bytes,
    };
    if let Err(e) = network.validate() {
        r.key_error("network", "", e.to_string());
    }

    // [rl] ladder first: the QoE defaults depend on it.
    let ladder = r.get(
        "rl",
        "ladder_mbps",
        vec![4.0, 8.0, 12.0, 20.0, 28.0],
        |s| {
            let l = parse_list(s, |w| Range::Positive.check(parse_f64(w)?))?;
            if l.is_empty() || l.windows(2).any(|w| w[1] <= w[0]) {
                return Err("needs at least one level, strictly ascending".into());
            }
            Ok(l)
        },
        |l| show_list(l, fmt_f64),
    );
    let ladder_bps: Vec<f64> = ladder.iter().map(|m| m * 1e6).collect();
    let levels = ladder.len();

    // [qoe]
    let alpha = r.f64_in("qoe", "alpha", 1.0, Range::NonNegative);
    let beta = r.f64_in("qoe", "beta", 1.0, Range::NonNegative);
    let gamma = r.f64_in("qoe", "gamma", 1.0, Range::NonNegative);
    let deadline_ms = r.f64_in("qoe", "deadline_ms", 50.0, Range::Positive);
    let quality_map = r.get(
        "qoe",
        "quality_map",
        RewardParams::linear_quality(&ladder_bps),
        |s| {
            if s == "linear" {
                return Ok(RewardParams::linear_quality(&ladder_bps));
            }
            let q = parse_list(s, parse_f64)?;
            if q.len() != levels {
                return Err(format!(
                    "has {} entries, the ladder has {levels} levels",
                    q.len()
                ));
            }
            Ok(q)
        },
        |q| show_list(q, fmt_f64),
    );
    let reward = RewardParams {
        alpha,
        beta,
        gamma,
        deadline_ms,
        quality_map,
    };
    if let Err(e) = reward.validate() {
        r.key_error("qoe", "quality_map", e.to_string());
    }
    let index_weights = r.get(
        "qoe",
        "index_weights",
        IndexWeights::default(),
        |s| {
            let w = parse_list(s, parse_f64)?;
            let [mqi, iqi, pqi] = w.as_slice() else {
                return Err(format!("expected three weights 'MQI IQI PQI', got '{s}'"));
            };
            let w = IndexWeights {
                mqi: *mqi,
                iqi: *iqi,
                pqi: *pqi,
            };
            w.validate().map_err(|e| e.to_string())?;
            Ok(w)
        },
        |w| show_list(&[w.mqi, w.iqi, w.pqi], fmt_f64),
    );
    let worst_latency_ms = r.f64_in("qoe", "worst_latency_ms", 200.0, Range::Positive);
    let default_tree = FactorTree::default_for(levels, fps, worst_latency_ms);
    let tree = FactorTree {
        mqi: r.get("qoe", "mqi", default_tree.mqi, parse_tree("mqi"), show_tree),
        iqi: r.get("qoe", "iqi", default_tree.iqi, parse_tree("iqi"), show_tree),
        pqi: r.get("qoe", "pqi", default_tree.pqi, parse_tree("pqi"), show_tree),
    };

    // [rl] remainder
    let history_k = r.u64_in("rl", "history", 8, 1, 1_000) as usize;
    let hidden = r.get(
        "rl",
        "hidden",
        vec![64, 64],
        |s| {
            parse_list(s, |w| match w.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(format!("layer sizes are positive integers, got '{w}'")),
            })
        },
        |h| show_list(h, |n| n.to_string()),
    );
    let learner = LearnerConfig {
        discount: r.f64_in("rl", "discount", 0.95, Range::Closed(0.0, 1.0)),
        actor_lr: r.f64_in("rl", "actor_lr", 1e-4, Range::Positive),
        critic_lr: r.f64_in("rl", "critic_lr", 1e-3, Range::Positive),
        entropy_coef: r.f64_in("rl", "entropy", 0.0, Range::NonNegative),
        max_grad_norm: r.f64_in("rl", "max_grad_norm", 5.0, Range::NonNegative),
        importance_clip: r.f64_in("rl", "importance_clip", 1.0, Range::NonNegative),
    };
    let rl = RlConfig {
        history_k,
        hidden,
        learner,
        agents: r.u64_in("rl", "agents", 1, 1, 1_024) as usize,
        steps: r.u64_in("rl", "steps", 50_000, 0, u64::MAX),
        sync_period: r.u64_in("rl", "sync_period", 1_000, 1, u64::MAX) as usize,
        minibatch: r.u64_in("rl", "minibatch", 32, 1, u64::MAX) as usize,
        epsilon_start: r.f64_in("rl", "epsilon_start", 1.0, Range::Closed(0.0, 1.0)),
        epsilon_end: r.f64_in("rl", "epsilon_end", 0.05, Range::Closed(0.0, 1.0)),
        epsilon_anneal: r.f64_in("rl", "epsilon_anneal", 0.2, Range::Closed(0.0, 1.0)),
        episode_steps: r.u64_in("rl", "episode_steps", 120, 1, u64::MAX) as usize,
        randomize_phase: r.bool("rl", "randomize_phase", true),
        init_seed: r.u64_in("rl", "init_seed", 7, 0, u64::MAX),
    };
    let auto_norm = SessionConfig::default_norm(&ladder_bps, eyes, deadline_ms);
    let norm_key = |r: &mut Reader, key: &str, auto: f64, scale: f64| {
        r.get(
            "rl",
            key,
            auto,
            |s| {
                if s == "auto" {
                    Ok(auto)
                } else {
                    Ok(Range::Positive.check(parse_f64(s)?)? * scale)
                }
            },
            |v| fmt_f64(&(v / scale)),
        )
    };
    let norm = NormBounds {
        throughput_bps: norm_key(
            &mut r,
            "norm_throughput_mbps",
            auto_norm.throughput_bps,
            1e6,
        ),
        latency_ms: norm_key(&mut r, "norm_latency_ms", auto_norm.latency_ms, 1.0),
        jitter_ms: norm_key(&mut r, "norm_jitter_ms", auto_norm.jitter_ms, 1.0),
    };
    let initial_level = r.u64_in("rl", "initial_level", 0, 0, u64::MAX) as usize;

    // [run]
    let interval_ms = r.f64_in("run", "interval_ms", 1_000.0, Range::Closed(1.0, 3.6e6));
    let playout_deadline_ms = r.f64_in("run", "playout_deadline_ms", 50.0, Range::Positive);
    let vantage: Vantage = r.parsed("run", "vantage", Vantage::EndHost);
    let path_key = |r: &mut Reader, key: &str| -> Option<PathBuf> {
        r.get(
            "run",
            key,
            None,
            |s| Ok(Some(PathBuf::from(s))),
            |p| {
                p.as_ref()
                    .map_or(String::new(), |p| p.display().to_string())
            },
        )
    };
    let run = RunConfig {
        duration_s: r.f64_in("run", "duration_s", 60.0, Range::Positive),
        policy: r.get(
            "run",
            "policy",
            PolicySpec::Oracle,
            |s| s.parse(),
            |p| p.to_string(),
        ),
        checkpoint: path_key(&mut r, "checkpoint"),
        output_dir: path_key(&mut r, "output_dir"),
        trace: r.bool("run", "trace", false),
        eval_seeds: r.u64_in("run", "eval_seeds", 10, 1, 100_000) as usize,
        seed: r.u64_in("run", "seed", 1, 0, u64::MAX),
    };
    r.canon.remove("run.output_dir");
    if let PolicySpec::Fixed(l) = run.policy {
        if l >= levels {
            r.key_error(
                "run",
                "policy",
                format!("level {l} outside a ladder of {levels} levels"),
            );
        }
    }
    if initial_level >= levels {
        r.key_error(
            "rl",
            "initial_level",
            format!("{initial_level} outside a ladder of {levels} levels"),
        );
    }
    if playout_deadline_ms >= interval_ms {
        r.key_error(
            "run",
            "playout_deadline_ms",
            format!("must be below interval_ms ({interval_ms})"),
        );
    }
    if (run.duration_s * 1_000.0 / interval_ms) < 1.0 {
        r.key_error("run", "duration_s", "shorter than one measurement interval");
    }

    r.unknown_keys();

    let session = SessionConfig {
        sim: SimConfig {
            source: Some(source),
            network,
            seed: run.seed,
            initial_bitrate: ladder_bps[initial_level.min(levels - 1)],
            source_horizon: None,
            record_trace: run.trace,
        },
        ladder: ladder_bps,
        interval_ms,
        playout_deadline_ms,
        vantage,
        tree,
        index_weights,
        reward,
        initial_level: initial_level.min(levels - 1),
        norm,
    };

    if r.errors.is_empty() {
        if let Err(e) = session
            .validate()
            .and_then(|_| Session::new(session.clone()))
        {
            r.errors.push(ConfigError {
                line: None,
                key: "config".into(),
                message: e.to_string(),
            });
        }
        if let Err(e) = rl
            .learner
            .validate()
            .and_then(|_| rl.train_config(run.seed).validate())
        {
            r.errors.push(ConfigError {
                line: None,
                key: "rl".into(),
                message: e.to_string(),
            });
        }
    }
    if !r.errors.is_empty() {
        let mut errors = r.errors;
        errors.sort_by_key(|e| e.line.unwrap_or(usize::MAX));
        return Err(ConfigErrors(errors));
    }

    let canonical = r
        .canon
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect();
    Ok(ExperimentConfig {
        media,
        session,
        rl,
        run,
        canonical,
    })
}
