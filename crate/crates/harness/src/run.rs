//! Scenario runs, training and baseline comparison.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context};
use xrsim_core::rl::{state_dim, ActorCritic, Checkpoint, PolicyNet, StepLog, Trainer};
use xrsim_core::session::{run_session, Policy, Session, XrEnv};

use crate::config::{ExperimentConfig, PolicySpec};
use crate::report::{
    mean_std, write_file, write_train_log_csv, Aggregate, AggregateRow, RunReport, TRAIN_LOG_HEADER,
};

/// Offset between a training seed and its held-out evaluation seeds.
pub const EVAL_SEED_OFFSET: u64 = 1_000_000;

/// Worker threads: `XRSIM_THREADS` if set, else the available parallelism.
pub fn thread_budget() -> usize {
    std::env::var("XRSIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn read_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    let f = fs::File::open(path)
        .with_context(|| format!("cannot open checkpoint {}", path.display()))?;
    Checkpoint::read_from(io::BufReader::new(f))
        .with_context(|| format!("cannot read checkpoint {}", path.display()))
}

/// Checks that `ckpt` was trained for this config's ladder, history and
/// network shape, naming every mismatched field.
pub fn check_compatible(cfg: &ExperimentConfig, ckpt: &Checkpoint) -> anyhow::Result<()> {
    let mut bad = Vec::new();
    if ckpt.ladder != cfg.session.ladder {
        bad.push(format!(
            "ladder (checkpoint {:?} b/s, config {:?} b/s)",
            ckpt.ladder, cfg.session.ladder
        ));
    }
    if ckpt.history_k != cfg.rl.history_k {
        bad.push(format!(
            "history (checkpoint {}, config {})",
            ckpt.history_k, cfg.rl.history_k
        ));
    }
    if ckpt.net.hidden() != cfg.rl.hidden.as_slice() {
        bad.push(format!(
            "hidden (checkpoint {:?}, config {:?})",
            ckpt.net.hidden(),
            cfg.rl.hidden
        ));
    }
    if bad.is_empty() {
        Ok(())
    } else {
        bail!("incompatible checkpoint: {}", bad.join("; "))
    }
}

pub fn trained_policy(cfg: &ExperimentConfig, ckpt: &Checkpoint) -> anyhow::Result<Policy> {
    check_compatible(cfg, ckpt)?;
    Ok(Policy::Trained {
        net: ckpt.net.clone(),
        history_k: ckpt.history_k,
    })
}

/// Resolves the configured policy; `Trained` needs a checkpoint.
pub fn resolve_policy(
    cfg: &ExperimentConfig,
    spec: &PolicySpec,
    checkpoint: Option<&Path>,
) -> anyhow::Result<Policy> {
    Ok(match spec {
        PolicySpec::Fixed(l) => Policy::Fixed(*l),
        PolicySpec::Oracle => Policy::Oracle,
        PolicySpec::Trained => {
            let path = checkpoint
                .or(cfg.run.checkpoint.as_deref())
                .context("policy 'trained' needs a checkpoint (run.checkpoint or --checkpoint)")?;
            trained_policy(cfg, &read_checkpoint(path)?)?
        }
    })
}

/// Streams one session of `run.duration_s` under `policy`.
pub fn run_scenario(
    cfg: &ExperimentConfig,
    policy: &Policy,
    seed: u64,
) -> anyhow::Result<RunReport> {
    run_session_config(cfg, cfg.session_for(seed), policy, seed)
}

fn run_session_config(
    cfg: &ExperimentConfig,
    session_cfg: xrsim_core::session::SessionConfig,
    policy: &Policy,
    seed: u64,
) -> anyhow::Result<RunReport> {
    let intervals = cfg.run.intervals(session_cfg.interval_ms);
    let mut session = Session::new(session_cfg)?;
    let records = run_session(&mut session, policy, intervals)?;
    let trace = session.simulation().trace().to_vec();
    Ok(RunReport::new(
        policy.name(),
        seed,
        cfg.hash(),
        records,
        trace,
    ))
}

/// Network initialization for a config.
pub fn initial_net(cfg: &ExperimentConfig) -> anyhow::Result<PolicyNet> {
    Ok(PolicyNet::new(
        state_dim(cfg.rl.history_k),
        &cfg.rl.hidden,
        cfg.session.ladder.len(),
        cfg.rl.init_seed,
    )?)
}

/// Seed of agent `agent_id`'s environment.
pub fn env_seed(seed: u64, agent_id: usize) -> u64 {
    seed.wrapping_add(agent_id as u64)
}

/// Trains `rl.agents` agents for `rl.steps` steps each, starting from
/// `resume` when given. `on_round` sees every round's logs as they arrive.
pub fn train(
    cfg: &ExperimentConfig,
    seed: u64,
    resume: Option<Checkpoint>,
    threads: usize,
    mut on_round: impl FnMut(&[StepLog]) -> io::Result<()>,
) -> anyhow::Result<Checkpoint> {
    let (net, done) = match resume {
        Some(ckpt) => {
            check_compatible(cfg, &ckpt)?;
            (ckpt.net, ckpt.steps_done)
        }
        None => (initial_net(cfg)?, 0),
    };
    let learner = ActorCritic::new(net, cfg.rl.learner.clone())?;
    let envs = (0..cfg.rl.agents)
        .map(|i| {
            XrEnv::new(
                cfg.session_for(seed),
                cfg.rl.history_k,
                cfg.rl.episode_steps,
                cfg.rl.randomize_phase,
                env_seed(seed, i),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut trainer = Trainer::new(learner, cfg.rl.train_config(seed), envs)?;
    trainer.set_steps_done(done.min(cfg.rl.steps));
    while !trainer.is_done() {
        let logs = trainer.round(threads)?;
        if trainer.skipped_updates() > 0 {
            let step = logs.last().map_or(trainer.steps_done(), |l| l.step);
            bail!(
                "non-finite loss or gradient at step {step} (td_error_mean {}, critic_loss {}); training aborted",
                logs.last().map_or(f64::NAN, |l| l.td_error_mean),
                logs.last().map_or(f64::NAN, |l| l.critic_loss),
            );
        }
        on_round(&logs)?;
    }
    Ok(Checkpoint {
        history_k: cfg.rl.history_k,
        ladder: cfg.session.ladder.clone(),
        steps_done: trainer.steps_done(),
        net: trainer.learner.net.clone(),
    })
}

/// `train` writing `train_log.csv` and `checkpoint.bin` into `dir`.
pub fn train_to_dir(
    cfg: &ExperimentConfig,
    seed: u64,
    resume: Option<Checkpoint>,
    threads: usize,
    dir: &Path,
) -> anyhow::Result<Checkpoint> {
    fs::create_dir_all(dir)?;
    let log_path = dir.join("train_log.csv");
    let mut log = io::BufWriter::new(fs::File::create(&log_path)?);
    writeln!(log, "{TRAIN_LOG_HEADER}")?;
    let ckpt = train(cfg, seed, resume, threads, |logs| {
        write_train_log_csv(&mut log, logs)
    })?;
    log.flush()?;
    write_file(&dir.join("checkpoint.bin"), |w| {
        ckpt.write_to(w).map_err(io::Error::other)
    })?;
    Ok(ckpt)
}

/// One policy's results over the held-out seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyResult {
    pub policy: String,
    /// Aggregate per evaluation seed, in seed order.
    pub runs: Vec<(u64, Aggregate)>,
}

impl PolicyResult {
    pub fn qoe(&self) -> (f64, f64) {
        mean_std(
            &self
                .runs
                .iter()
                .map(|(_, a)| a.mean_qoe)
                .collect::<Vec<_>>(),
        )
    }

    pub fn reward(&self) -> (f64, f64) {
        mean_std(
            &self
                .runs
                .iter()
                .map(|(_, a)| a.mean_reward)
                .collect::<Vec<_>>(),
        )
    }
}

/// Held-out evaluation seeds of training seed `seed`.
pub fn eval_seeds(seed: u64, count: usize) -> Vec<u64> {
    (0..count as u64)
        .map(|j| seed.wrapping_add(EVAL_SEED_OFFSET + j))
        .collect()
}

/// Evaluates `policy` on every held-out seed, in parallel.
pub fn evaluate(
    cfg: &ExperimentConfig,
    policy: &Policy,
    seed: u64,
    threads: usize,
) -> anyhow::Result<PolicyResult> {
    let seeds = eval_seeds(seed, cfg.run.eval_seeds);
    let one = |s: u64| -> anyhow::Result<(u64, Aggregate)> {
        let sc = XrEnv::episode_config(&cfg.session, s, 0, cfg.rl.randomize_phase);
        let mut sc = sc;
        sc.sim.record_trace = false;
        let report = run_session_config(cfg, sc, policy, s)?;
        let rows: Vec<AggregateRow> = report.records.iter().map(AggregateRow::from).collect();
        Ok((s, Aggregate::from_rows(&rows)))
    };
    let per = seeds.len().div_ceil(threads.max(1)).max(1);
    let runs: Vec<anyhow::Result<(u64, Aggregate)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(per)
            .map(|chunk| scope.spawn(move || chunk.iter().map(|s| one(*s)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation thread panicked"))
            .collect()
    });
    Ok(PolicyResult {
        policy: policy.name(),
        runs: runs.into_iter().collect::<anyhow::Result<_>>()?,
    })
}

/// Trained (when given), every fixed level, and Oracle on the same seeds.
pub fn compare_baselines(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Checkpoint>,
    seed: u64,
    threads: usize,
) -> anyhow::Result<Vec<PolicyResult>> {
    let mut policies = Vec::new();
    if let Some(c) = checkpoint {
        policies.push(trained_policy(cfg, c)?);
    }
    policies.extend((0..cfg.session.ladder.len()).map(Policy::Fixed));
    policies.push(Policy::Oracle);
    policies
        .iter()
        .map(|p| evaluate(cfg, p, seed, threads))
        .collect()
}

pub fn comparison_table(results: &[PolicyResult]) -> String {
    let mut s = String::from("policy,mean_qoe,std_qoe,mean_reward,std_reward,seeds\n");
    for r in results {
        let (q, qs) = r.qoe();
        let (w, ws) = r.reward();
        let _ = writeln!(s, "{},{q},{qs},{w},{ws},{}", r.policy, r.runs.len());
    }
    s
}

pub fn comparison_runs_csv(results: &[PolicyResult]) -> String {
    let mut s = String::from(
        "policy,eval_seed,mean_qoe,mean_reward,decodable_ratio,loss_rate,p95_latency_ms\n",
    );
    for r in results {
        for (seed, a) in &r.runs {
            let _ = writeln!(
                s,
                "{},{seed},{},{},{},{},{}",
                r.policy,
                a.mean_qoe,
                a.mean_reward,
                a.decodable_ratio,
                a.loss_rate,
                a.p95_latency_ms
            );
        }
    }
    s
}

/// Human-readable table with mean ± std over seeds.
pub fn format_comparison(results: &[PolicyResult]) -> String {
    let mut s = format!("{:<10} {:>22} {:>22}\n", "policy", "QoE", "reward");
    for r in results {
        let (q, qs) = r.qoe();
        let (w, ws) = r.reward();
        let _ = writeln!(
            s,
            "{:<10} {:>22} {:>22}",
            r.policy,
            format!("{q:.4} ± {qs:.4}"),
            format!("{w:.4} ± {ws:.4}")
        );
    }
    s
}
