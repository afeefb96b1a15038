//! `eqa` — dataset generation, training, calibration, evaluation, sweeps, and
//! trajectory rendering for the gridworld embodied QA lab.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 runtime error.

mod config;
mod render;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use config::RunConfig;
use eqa_core::calib::CalibrationConfig;
use eqa_core::ckpt;
use eqa_core::eval::{self, EvalConfig};
use eqa_core::gen::{self, Split};
use eqa_core::oracle;
use eqa_core::parallel::ordered_map;
use eqa_core::persist;
use eqa_core::rng::DetRng;
use eqa_core::train;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "eqa", version, about = "Gridworld embodied question answering lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainMode {
    Nav,
    Qa,
    E2e,
    Blindfold,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Distill,
    Finetune,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    Markers,
    Lambda,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset directory (environments + manifest)
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Parallel workers for environment generation
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the config's master seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model on a dataset directory
    Train {
        #[arg(long, value_enum)]
        mode: TrainMode,
        #[arg(long)]
        data: PathBuf,
        /// Output directory (checkpoints + curves)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Adapt a trained navigation model per test environment via markers
    Calibrate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        markers: Option<usize>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate navigation progress and QA accuracy over spawn tiers
    Eval {
        #[arg(long)]
        nav: PathBuf,
        #[arg(long)]
        qa: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated spawn tiers, e.g. 10,20,30
        #[arg(long, value_delimiter = ',')]
        tiers: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        seed: Option<u64>,
        /// Compare standard vs calibration settings instead of one model
        #[arg(long, default_value_t = false)]
        compare: bool,
    },
    /// Sweep marker count or lambda and emit curves
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        #[arg(long)]
        nav: PathBuf,
        #[arg(long)]
        qa: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated sweep values (marker counts or lambdas)
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Render one evaluation episode as ASCII and SVG maps
    Render {
        #[arg(long)]
        nav: PathBuf,
        #[arg(long)]
        qa: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Question id, e.g. test-003:q2
        #[arg(long)]
        qid: String,
        #[arg(long, default_value_t = 20)]
        tier: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() {
    // usage errors exit 1 per the documented convention
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.downcast_ref::<ConfigError>().is_some() { 1 } else { 2 };
            std::process::exit(code);
        }
    }
}

/// Marker type for errors that should exit with the usage/config code.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    RunConfig::load(path).map_err(|e| config_err(format!("{e:#}")))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { config, out, jobs, seed } => cmd_gen_data(config.as_deref(), &out, jobs, seed),
        Command::Train { mode, data, out, config, seed, epochs, lr } => {
            cmd_train(mode, &data, &out, config.as_deref(), seed, epochs, lr)
        }
        Command::Calibrate { ckpt, data, method, out, config, lambda, markers, split, seed } => {
            cmd_calibrate(&ckpt, &data, method, &out, config.as_deref(), lambda, markers, split.into(), seed)
        }
        Command::Eval { nav, qa, data, out, config, tiers, split, seed, compare } => {
            cmd_eval(&nav, &qa, &data, &out, config.as_deref(), tiers, split.into(), seed, compare)
        }
        Command::Sweep { kind, nav, qa, data, out, config, values, split, seeds } => {
            cmd_sweep(kind, &nav, &qa, &data, &out, config.as_deref(), values, split.map(Into::into), seeds)
        }
        Command::Render { nav, qa, data, out, qid, tier, seed } => {
            cmd_render(&nav, &qa, &data, &out, &qid, tier, seed)
        }
    }
}

fn cmd_gen_data(config: Option<&Path>, out: &Path, jobs: usize, seed: Option<u64>) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let dcfg = cfg.dataset_config();
    let vocab = gen::Vocabulary::default_tokens();
    // per-environment generation is seed-derived and order-independent, so it
    // can fan out; assembly stays in index order
    let dataset = if jobs > 1 {
        build_dataset_parallel(&dcfg, &vocab, jobs).map_err(|e| config_err(e.to_string()))?
    } else {
        gen::build_dataset_with_vocab(&dcfg, vocab).map_err(|e| config_err(e.to_string()))?
    };
    persist::save_dataset(&dataset, out)?;
    cfg.write_snapshot(out)?;
    println!(
        "wrote dataset to {}: {} train / {} val / {} test environments, {} questions",
        out.display(),
        dataset.train.len(),
        dataset.val.len(),
        dataset.test.len(),
        dataset.n_questions(Split::Train) + dataset.n_questions(Split::Val) + dataset.n_questions(Split::Test)
    );
    Ok(())
}

/// Parallel twin of `gen::build_dataset_with_vocab`: same seeds, same output.
fn build_dataset_parallel(
    cfg: &gen::DatasetConfig,
    vocab: &gen::Vocabulary,
    jobs: usize,
) -> Result<gen::Dataset, gen::GenError> {
    let root = DetRng::new(cfg.master_seed);
    let mut splits: Vec<Vec<gen::EnvEntry>> = Vec::new();
    for (split, count) in [
        (Split::Train, cfg.n_train_envs),
        (Split::Val, cfg.n_val_envs),
        (Split::Test, cfg.n_test_envs),
    ] {
        let items: Vec<usize> = (0..count).collect();
        let results = ordered_map(jobs, items, |_, i| {
            let env_seed = root.derive_idx(split.name(), i as u64).next_u64();
            let env_id = format!("{}-{:03}", split.name(), i);
            let env = gen::generate_environment_labeled(env_seed, &cfg.env, vocab, &env_id)?;
            let questions = gen::generate_questions(&env, vocab);
            for q in &questions {
                oracle::goal_set(&env, q.target_object_id)
                    .map_err(|e| gen::GenError::Dataset(format!("{}: {e}", q.qid)))?;
            }
            Ok::<gen::EnvEntry, gen::GenError>(gen::EnvEntry { env, questions })
        });
        splits.push(results.into_iter().collect::<Result<Vec<_>, _>>()?);
    }
    let test = splits.pop().unwrap();
    let val = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    Ok(gen::Dataset { vocab: vocab.clone(), train, val, test, config: cfg.clone() })
}

fn load_data(path: &Path) -> Result<gen::Dataset> {
    persist::load_dataset(path).with_context(|| format!("loading dataset from {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_train(
    mode: TrainMode,
    data: &Path,
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    epochs: Option<usize>,
    lr: Option<f64>,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(e) = epochs {
        cfg.train.nav.epochs = e;
        cfg.train.qa.epochs = e;
        cfg.train.e2e.joint_epochs = e.saturating_sub(cfg.train.e2e.warmstart_epochs).max(1);
    }
    if let Some(l) = lr {
        cfg.train.nav.lr = l;
        cfg.train.qa.lr = l;
        cfg.train.e2e.lr = l;
    }
    let dataset = load_data(data)?;
    fs::create_dir_all(out)?;
    match mode {
        TrainMode::Nav => {
            let (nav, curve) = train::train_navigation(&dataset, &cfg.nav_train_config());
            ckpt::save_nav(&out.join("nav.ckpt"), &nav)?;
            let mut csv = String::from("epoch,loss,teacher_forced_accuracy\n");
            for c in &curve {
                let _ = writeln!(csv, "{},{},{}", c.epoch, c.loss, c.teacher_forced_accuracy);
            }
            write_file(&out.join("nav_curve.csv"), &csv)?;
            println!("wrote {}", out.join("nav.ckpt").display());
        }
        TrainMode::Qa => {
            let (qa, curve) = train::train_qa(&dataset, &cfg.qa_train_config());
            ckpt::save_qa(&out.join("qa.ckpt"), &qa)?;
            let mut csv = String::from("epoch,loss,accuracy\n");
            for c in &curve {
                let _ = writeln!(csv, "{},{},{}", c.epoch, c.loss, c.accuracy);
            }
            write_file(&out.join("qa_curve.csv"), &csv)?;
            println!("wrote {}", out.join("qa.ckpt").display());
        }
        TrainMode::E2e => {
            let (nav, qa, curve) = train::joint_train(&dataset, &cfg.joint_config());
            ckpt::save_nav(&out.join("nav.ckpt"), &nav)?;
            ckpt::save_qa(&out.join("qa.ckpt"), &qa)?;
            let mut csv = String::from("epoch,nav_loss,qa_loss,rollout_mix,val_progress,val_qa_accuracy\n");
            for c in &curve {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    c.epoch,
                    c.nav_loss,
                    c.qa_loss.map(|v| v.to_string()).unwrap_or_default(),
                    c.rollout_mix,
                    c.val_progress.map(|v| v.to_string()).unwrap_or_default(),
                    c.val_qa_accuracy.map(|v| v.to_string()).unwrap_or_default()
                );
            }
            write_file(&out.join("e2e_curve.csv"), &csv)?;
            println!("wrote {} and {}", out.join("nav.ckpt").display(), out.join("qa.ckpt").display());
        }
        TrainMode::Blindfold => {
            let (bf, curve) = train::train_blindfold(&dataset, &cfg.qa_train_config());
            ckpt::save_blindfold(&out.join("blindfold.ckpt"), &bf)?;
            let mut csv = String::from("epoch,loss,accuracy\n");
            for c in &curve {
                let _ = writeln!(csv, "{},{},{}", c.epoch, c.loss, c.accuracy);
            }
            write_file(&out.join("blindfold_curve.csv"), &csv)?;
            println!("wrote {}", out.join("blindfold.ckpt").display());
        }
    }
    cfg.write_snapshot(out)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_calibrate(
    ckpt_path: &Path,
    data: &Path,
    method: Method,
    out: &Path,
    config: Option<&Path>,
    lambda: Option<f64>,
    markers: Option<usize>,
    split: Split,
    seed: Option<u64>,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(l) = lambda {
        if !(0.0..=1.0).contains(&l) {
            return Err(config_err(format!("--lambda must be in [0, 1], got {l}")));
        }
        cfg.calibrate.lambda = l;
    }
    if let Some(m) = markers {
        if m == 0 || m > gen::MARKER_TYPES.len() {
            return Err(config_err(format!(
                "--markers must be in 1..={}, got {m}",
                gen::MARKER_TYPES.len()
            )));
        }
        cfg.calibrate.markers = m;
    }
    let dataset = load_data(data)?;
    let pretrained = ckpt::load_nav(ckpt_path)?;
    let calib_cfg = cfg.calibration_config();
    fs::create_dir_all(out)?;
    let distill = method == Method::Distill;
    let mut placed = 0usize;
    let mut failed = 0usize;
    for entry in dataset.split(split) {
        let mut rng = DetRng::new(cfg.master_seed).derive(&format!("markers:{}", entry.env.env_id));
        let marked = match eqa_core::calib::place_markers(&entry.env, &dataset.vocab, &calib_cfg, &mut rng) {
            Ok(m) => m,
            Err(e) => {
                // a placement failure skips the environment but the run goes on
                eprintln!("warning: {e}");
                failed += 1;
                continue;
            }
        };
        let data = eqa_core::calib::marker_questions(&marked, &mut rng)?;
        let per_env_cfg = CalibrationConfig {
            seed: DetRng::new(cfg.master_seed).derive(&entry.env.env_id).next_u64(),
            ..calib_cfg.clone()
        };
        let (adapted, curve) = if distill {
            eqa_core::calib::calibrate_distill(&pretrained, &marked, &data, &per_env_cfg)
        } else {
            eqa_core::calib::calibrate_finetune(&pretrained, &marked, &data, &per_env_cfg)
        };
        let name = format!(
            "{}_lambda{}_markers{}_seed{}.ckpt",
            entry.env.env_id,
            if distill { calib_cfg.lambda } else { 0.0 },
            calib_cfg.n_markers,
            cfg.master_seed
        );
        ckpt::save_nav(&out.join(&name), &adapted)?;
        let mut csv = String::from("epoch,policy_loss,distill_loss,accuracy\n");
        for c in &curve {
            let _ = writeln!(csv, "{},{},{},{}", c.epoch, c.policy_loss, c.distill_loss, c.accuracy);
        }
        write_file(&out.join(format!("{}_curve.csv", entry.env.env_id)), &csv)?;
        placed += 1;
    }
    cfg.write_snapshot(out)?;
    println!("adapted {placed} environments ({failed} placement failures) into {}", out.display());
    Ok(())
}

fn report_files(out: &Path, name: &str, report: &eval::EvalReport) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_file(&out.join(format!("{name}.json")), &json)?;
    let mut csv = String::from(
        "tier,episodes,skipped,mean_progress_cells,mean_progress_m,qa_accuracy,stop_rate,mean_episode_len\n",
    );
    for s in &report.summaries {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            s.tier, s.episodes, s.skipped, s.mean_progress_cells, s.mean_progress_m, s.qa_accuracy, s.stop_rate, s.mean_episode_len
        );
    }
    write_file(&out.join(format!("{name}_aggregates.csv")), &csv)?;
    // per-question predictions as JSON lines
    let mut jsonl = String::new();
    for r in &report.records {
        let _ = writeln!(
            jsonl,
            "{}",
            serde_json::json!({
                "qid": r.qid,
                "tier": r.tier,
                "predicted": r.predicted,
                "gold": r.gold,
                "correct": r.correct,
                "progress_cells": r.progress_cells,
            })
        );
    }
    write_file(&out.join(format!("{name}_predictions.jsonl")), &jsonl)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    nav_path: &Path,
    qa_path: &Path,
    data: &Path,
    out: &Path,
    config: Option<&Path>,
    tiers: Option<Vec<usize>>,
    split: Split,
    seed: Option<u64>,
    compare: bool,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(t) = tiers {
        if t.is_empty() {
            return Err(config_err("--tiers must name at least one tier"));
        }
        cfg.eval.tiers = t;
    }
    let dataset = load_data(data)?;
    let nav = ckpt::load_nav(nav_path)?;
    let qa = ckpt::load_qa(qa_path)?;
    let eval_cfg = cfg.eval_config();
    fs::create_dir_all(out)?;
    if compare {
        let seeds: Vec<u64> = (1..=cfg.eval.seeds as u64).collect();
        let cmp = eval::compare_settings(&nav, &qa, &dataset, split, &cfg.calibration_config(), &eval_cfg, &seeds)?;
        let mut json = serde_json::to_string_pretty(&cmp)?;
        json.push('\n');
        write_file(&out.join("comparison.json"), &json)?;
        let table = cmp.render_text();
        write_file(&out.join("comparison.txt"), &table)?;
        print!("{table}");
    } else {
        let report = eval::evaluate(&nav, &qa, &dataset, split, &eval_cfg, cfg.master_seed);
        report_files(out, "report", &report)?;
        for s in &report.summaries {
            println!(
                "tier {:>3}: progress {:.3} cells ({:.3} m), QA {:.1}%, stop rate {:.2}, mean len {:.1}, skipped {}",
                s.tier,
                s.mean_progress_cells,
                s.mean_progress_m,
                s.qa_accuracy * 100.0,
                s.stop_rate,
                s.mean_episode_len,
                s.skipped
            );
        }
    }
    cfg.write_snapshot(out)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    kind: SweepKind,
    nav_path: &Path,
    qa_path: &Path,
    data: &Path,
    out: &Path,
    config: Option<&Path>,
    values: Option<Vec<f64>>,
    split: Option<Split>,
    seeds: Option<usize>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let dataset = load_data(data)?;
    let nav = ckpt::load_nav(nav_path)?;
    let qa = ckpt::load_qa(qa_path)?;
    let eval_cfg = cfg.eval_config();
    let calib_cfg = cfg.calibration_config();
    let n_seeds = seeds.unwrap_or(cfg.eval.seeds);
    let seed_list: Vec<u64> = (1..=n_seeds as u64).collect();
    fs::create_dir_all(out)?;
    let curve = match kind {
        SweepKind::Markers => {
            // marker sweeps run on the held-out test environments
            let split = split.unwrap_or(Split::Test);
            let counts: Vec<usize> = match values {
                Some(v) => v
                    .into_iter()
                    .map(|x| {
                        let n = x as usize;
                        if x.fract() != 0.0 || n == 0 || n > gen::MARKER_TYPES.len() {
                            Err(config_err(format!("bad marker count {x}")))
                        } else {
                            Ok(n)
                        }
                    })
                    .collect::<Result<_>>()?,
                None => (1..=gen::MARKER_TYPES.len()).collect(),
            };
            eval::sweep_markers(&nav, &qa, &dataset, split, &counts, &calib_cfg, &eval_cfg, &seed_list)?
        }
        SweepKind::Lambda => {
            // the lambda knob is tuned on validation environments
            let split = split.unwrap_or(Split::Val);
            let lambdas = values.unwrap_or_else(|| vec![0.0, 0.1, 0.2, 0.5, 0.8, 1.0]);
            for &l in &lambdas {
                if !(0.0..=1.0).contains(&l) {
                    return Err(config_err(format!("lambda {l} outside [0, 1]")));
                }
            }
            eval::sweep_lambda(&nav, &qa, &dataset, split, &lambdas, &calib_cfg, &eval_cfg, &seed_list)?
        }
    };
    write_file(&out.join(format!("sweep_{}.csv", curve.kind)), &curve.render_csv())?;
    let mut json = serde_json::to_string_pretty(&curve)?;
    json.push('\n');
    write_file(&out.join(format!("sweep_{}.json", curve.kind)), &json)?;
    cfg.write_snapshot(out)?;
    println!("wrote sweep over {} points to {}", curve.points.len(), out.display());
    Ok(())
}

fn cmd_render(
    nav_path: &Path,
    qa_path: &Path,
    data: &Path,
    out: &Path,
    qid: &str,
    tier: usize,
    seed: Option<u64>,
) -> Result<()> {
    let dataset = load_data(data)?;
    let nav = ckpt::load_nav(nav_path)?;
    let qa = ckpt::load_qa(qa_path)?;
    let seed = seed.unwrap_or(1);
    let (entry, question) = dataset
        .train
        .iter()
        .chain(&dataset.val)
        .chain(&dataset.test)
        .flat_map(|e| e.questions.iter().map(move |q| (e, q)))
        .find(|(_, q)| q.qid == qid)
        .ok_or_else(|| config_err(format!("question {qid} not found in dataset")))?;
    let env = &entry.env;
    let goal = oracle::goal_set(env, question.target_object_id).map_err(|e| anyhow!(e.to_string()))?;
    let mut rng = DetRng::new(seed).derive(&format!("spawn:{qid}:{tier}"));
    let spawn = oracle::spawn_at_goal(env, &goal, tier, &mut rng)
        .map_err(|e| anyhow!("cannot spawn {tier} actions away: {e}"))?;
    let eval_cfg = EvalConfig { tiers: vec![tier], step_cap: 120 };
    let traj = nav
        .rollout(env, &question.tokens, spawn, eval_cfg.max_steps(tier))
        .map_err(|e| anyhow!(e.to_string()))?;
    let frames: Vec<Vec<f64>> = traj
        .last_frames(eqa_core::qa::N_FRAMES)
        .into_iter()
        .map(|o| o.features(env.space.types.len(), env.space.colors.len()))
        .collect();
    let dist = qa.answer(&frames, &question.tokens).map_err(|e| anyhow!(e.to_string()))?;
    let answer = qa.answer_token(eqa_core::nav::argmax(&dist));
    fs::create_dir_all(out)?;
    let stem = format!("{}_t{}", qid.replace(':', "_"), tier);
    let ascii = render::ascii_map(env, question.target_object_id, &traj);
    write_file(&out.join(format!("{stem}.txt")), &ascii)?;
    write_file(&out.join(format!("{stem}.svg")), &render::svg_map(env, question.target_object_id, &traj))?;
    let progress = eval::distance_progress(env, question.target_object_id, spawn.pos(), traj.end_state().pos())?;
    println!("{ascii}");
    println!(
        "question: {} | answered {:?} (gold {:?}) | progress {progress} cells over {} steps",
        question.tokens.join(" "),
        answer,
        question.answer_token,
        traj.len()
    );
    if traj.len() == 0 {
        println!("agent stopped at its spawn cell");
    }
    bail_if_missing(&out.join(format!("{stem}.svg")))?;
    Ok(())
}

fn bail_if_missing(p: &Path) -> Result<()> {
    if !p.exists() {
        bail!("expected output {} was not written", p.display());
    }
    Ok(())
}
