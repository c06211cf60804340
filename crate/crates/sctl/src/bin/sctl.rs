//! Command-line front end for the vibration-control testbed.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use sctl::dynamics::PlantParams;
use sctl::error::{Result, SctlError};
use sctl::excitation::{generate_record, record_to_csv};
use sctl::harness::{
    derive_seed, load_actor, metrics_csv, rollout_episode, save_agent, summarize, train,
    trajectory_csv, Policy, RunConfig, RunMetrics, TrainResult, STREAM_EVAL_EXCITATION,
};
use sctl::lqr;

#[derive(Parser)]
#[command(
    name = "sctl",
    about = "Safe RL vibration control: LQR-guided Lyapunov actor-critic testbed",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Design the LQR gain from the assumed model and print its provenance.
    DesignLqr {
        #[command(flatten)]
        common: Common,
        /// Redraw the assumed model: m in [0.5, 2.5], c in [-1, 1], k in [50, 250].
        #[arg(long)]
        randomize: bool,
    },
    /// Generate a seeded Kanai-Tajimi ground-acceleration record as CSV.
    GenExcitation {
        #[command(flatten)]
        common: Common,
    },
    /// Roll an uncontrolled or LQR policy over one seeded record.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = SimPolicy::Uncontrolled)]
        policy: SimPolicy,
    },
    /// Run guided (or naive) training and write checkpoints, metrics, trajectories.
    Train {
        #[command(flatten)]
        common: Common,
        /// LQR-guided training (the default).
        #[arg(long, conflicts_with = "naive")]
        guided: bool,
        /// Naive RL: identical pipeline with the guidance weight forced to 0.
        #[arg(long)]
        naive: bool,
        #[arg(long)]
        episodes: Option<usize>,
        /// Guidance weight override.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Evaluate a policy over the held-out excitation seeds.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        policy: EvalPolicy,
        /// Run directory holding actor.bin (required for learned policies).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Full experiment suite: train guided and naive, evaluate all four
    /// policies on held-out seeds, emit a comparison table.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SimPolicy {
    Uncontrolled,
    Lqr,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalPolicy {
    Uncontrolled,
    Lqr,
    Rl,
    LqrGuidedRl,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig, leaf: &str) -> Result<PathBuf> {
    let dir = Path::new(&cfg.out_dir).join(leaf);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn design_from(cfg: &RunConfig, plant: &PlantParams) -> Result<sctl::lqr::LqrPolicy> {
    lqr::design(
        plant,
        nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&cfg.lqr_q)),
        cfg.lqr_r,
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::DesignLqr { common, randomize } => {
            let cfg = load_config(&common)?;
            let plant = if randomize {
                let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
                PlantParams {
                    m: rng.random_range(0.5..2.5),
                    c: rng.random_range(-1.0..1.0),
                    k: rng.random_range(50.0..250.0),
                    k3: 0.0,
                }
            } else {
                cfg.assumed_plant
            };
            let policy = design_from(&cfg, &plant)?;
            let record = policy.provenance(&plant);
            print!("{record}");
            if common.out.is_some() {
                let dir = out_dir(&cfg, "design")?;
                fs::write(dir.join("lqr.txt"), &record)?;
                eprintln!("wrote {}", dir.join("lqr.txt").display());
            }
            Ok(())
        }
        Cmd::GenExcitation { common } => {
            let cfg = load_config(&common)?;
            let record = generate_record(cfg.seed, &cfg.excitation)?;
            let csv = record_to_csv(&record, cfg.excitation.dt);
            match common.out {
                Some(_) => {
                    let dir = out_dir(&cfg, "excitation")?;
                    let path = dir.join(format!("record_{}.csv", cfg.seed));
                    fs::write(&path, csv)?;
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Cmd::Simulate { common, policy } => {
            let cfg = load_config(&common)?;
            let record = generate_record(cfg.seed, &cfg.excitation)?;
            let lqr_policy;
            let pol = match policy {
                SimPolicy::Uncontrolled => Policy::Uncontrolled,
                SimPolicy::Lqr => {
                    lqr_policy = design_from(&cfg, &cfg.assumed_plant)?;
                    Policy::Lqr(&lqr_policy)
                }
            };
            let (traj, metrics) = rollout_episode(&pol, &cfg, &record)?;
            report_divergence(&[metrics])?;
            let dir = out_dir(&cfg, "simulate")?;
            fs::write(dir.join("trajectory.csv"), trajectory_csv(&traj))?;
            fs::write(dir.join("metrics.csv"), metrics_csv(&[metrics]))?;
            println!(
                "rms_x {:.6e}  rms_xddot {:.6e}  peak_xddot {:.6e}  rms_u {:.6e}",
                metrics.rms_x, metrics.rms_xddot, metrics.peak_xddot, metrics.rms_u
            );
            eprintln!("wrote {}", dir.display());
            Ok(())
        }
        Cmd::Train { common, guided: _, naive, episodes, alpha } => {
            let mut cfg = load_config(&common)?;
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            cfg.validate()?;
            let guided = !naive;
            let leaf = if guided { "train-guided" } else { "train-naive" };
            let dir = out_dir(&cfg, leaf)?;
            let res = train_with_progress(&cfg, guided)?;
            write_train_artifacts(&dir, &cfg, &res)?;
            println!("trained {} episodes -> {}", cfg.episodes, dir.display());
            report_divergence(&res.metrics)?;
            Ok(())
        }
        Cmd::Evaluate { common, policy, checkpoint, alpha } => {
            let mut cfg = load_config(&common)?;
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            cfg.validate()?;
            let lqr_policy = design_from(&cfg, &cfg.assumed_plant)?;
            let actor = match policy {
                EvalPolicy::Rl | EvalPolicy::LqrGuidedRl => {
                    let dir = checkpoint.ok_or_else(|| {
                        SctlError::Usage("learned policies need --checkpoint <dir>".into())
                    })?;
                    Some(load_actor(&dir)?)
                }
                _ => None,
            };
            let name = match policy {
                EvalPolicy::Uncontrolled => "uncontrolled",
                EvalPolicy::Lqr => "lqr",
                EvalPolicy::Rl => "rl",
                EvalPolicy::LqrGuidedRl => "lqr-guided-rl",
            };
            let pol = match policy {
                EvalPolicy::Uncontrolled => Policy::Uncontrolled,
                EvalPolicy::Lqr => Policy::Lqr(&lqr_policy),
                EvalPolicy::Rl => Policy::Guided {
                    actor: actor.as_ref().unwrap(),
                    lqr: &lqr_policy,
                    alpha: 0.0,
                    u_max: cfg.u_max,
                },
                EvalPolicy::LqrGuidedRl => Policy::Guided {
                    actor: actor.as_ref().unwrap(),
                    lqr: &lqr_policy,
                    alpha: cfg.alpha,
                    u_max: cfg.u_max,
                },
            };
            let dir = out_dir(&cfg, &format!("evaluate-{name}"))?;
            let metrics = evaluate_policy(&pol, &cfg, Some(&dir))?;
            fs::write(dir.join("metrics.csv"), metrics_csv(&metrics))?;
            let summary = summarize(&[(name.to_string(), metrics.clone())])?;
            print!("{}", summary.text());
            fs::write(dir.join("summary.txt"), summary.text())?;
            report_divergence(&metrics)?;
            Ok(())
        }
        Cmd::Compare { common, episodes, alpha } => {
            let mut cfg = load_config(&common)?;
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            cfg.validate()?;
            let dir = out_dir(&cfg, "compare")?;
            let lqr_policy = design_from(&cfg, &cfg.assumed_plant)?;

            eprintln!("training guided agent ({} episodes)...", cfg.episodes);
            let guided = train_with_progress(&cfg, true)?;
            write_train_artifacts(&dir.join("train-guided"), &cfg, &guided)?;
            eprintln!("training naive agent ({} episodes)...", cfg.episodes);
            let naive = train_with_progress(&cfg, false)?;
            write_train_artifacts(&dir.join("train-naive"), &cfg, &naive)?;

            let eval = |pol: &Policy| evaluate_policy(pol, &cfg, None);
            let runs = vec![
                ("uncontrolled".to_string(), eval(&Policy::Uncontrolled)?),
                ("lqr".to_string(), eval(&Policy::Lqr(&lqr_policy))?),
                (
                    "rl".to_string(),
                    eval(&Policy::Guided {
                        actor: &naive.agent.actor,
                        lqr: &lqr_policy,
                        alpha: 0.0,
                        u_max: cfg.u_max,
                    })?,
                ),
                (
                    "lqr-guided-rl".to_string(),
                    eval(&Policy::Guided {
                        actor: &guided.agent.actor,
                        lqr: &lqr_policy,
                        alpha: cfg.alpha,
                        u_max: cfg.u_max,
                    })?,
                ),
            ];
            let summary = summarize(&runs)?;
            print!("{}", summary.text());
            fs::write(dir.join("summary.txt"), summary.text())?;
            fs::write(dir.join("summary.csv"), summary.csv())?;
            for (name, ms) in &runs {
                fs::write(dir.join(format!("metrics-{name}.csv")), metrics_csv(ms))?;
            }
            eprintln!("wrote {}", dir.display());
            Ok(())
        }
    }
}

fn train_with_progress(cfg: &RunConfig, guided: bool) -> Result<TrainResult> {
    // train() is a single call; progress is reported afterwards per episode
    let res = train(cfg, guided)?;
    for (i, m) in res.metrics.iter().enumerate() {
        if (i + 1) % 10 == 0 || m.diverged {
            eprintln!(
                "episode {:>3}: reward {:.3e}  peak_xddot {:.3e}{}",
                i + 1,
                m.total_reward,
                m.peak_xddot,
                if m.diverged { "  [diverged]" } else { "" }
            );
        }
    }
    Ok(res)
}

fn write_train_artifacts(dir: &Path, cfg: &RunConfig, res: &TrainResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    fs::write(dir.join("lqr.txt"), res.lqr.provenance(&cfg.assumed_plant))?;
    fs::write(dir.join("metrics.csv"), metrics_csv(&res.metrics))?;
    save_agent(dir, &res.agent, cfg.content_hash())?;
    let traj_dir = dir.join("trajectories");
    fs::create_dir_all(&traj_dir)?;
    for (i, traj) in res.trajectories.iter().enumerate() {
        fs::write(traj_dir.join(format!("ep_{i:03}.csv")), trajectory_csv(traj))?;
    }
    Ok(())
}

/// Roll a policy over every held-out evaluation seed; optionally write the
/// per-seed trajectories.
fn evaluate_policy(
    policy: &Policy,
    cfg: &RunConfig,
    traj_dir: Option<&Path>,
) -> Result<Vec<RunMetrics>> {
    let mut metrics = Vec::with_capacity(cfg.eval_seeds);
    for i in 0..cfg.eval_seeds {
        let seed = derive_seed(cfg.seed, STREAM_EVAL_EXCITATION + i as u64);
        let record = generate_record(seed, &cfg.excitation)?;
        let (traj, m) = rollout_episode(policy, cfg, &record)?;
        if let Some(dir) = traj_dir {
            fs::write(dir.join(format!("trajectory_{i:02}.csv")), trajectory_csv(&traj))?;
        }
        metrics.push(m);
    }
    Ok(metrics)
}

/// Numeric-failure exit when every rollout diverged.
fn report_divergence(metrics: &[RunMetrics]) -> Result<()> {
    if !metrics.is_empty() && metrics.iter().all(|m| m.diverged) {
        return Err(SctlError::Divergence {
            step: 0,
            detail: "all rollouts diverged".into(),
        });
    }
    Ok(())
}
