//! Metrics and experiment protocols: navigation progress and QA accuracy at
//! spawn tiers, the standard-versus-calibration comparison, and the marker
//! and lambda sweeps.
//!
//! Progress is the reduction in geodesic distance to the target between the
//! spawn position and the stop position, in cells (0.5 m per cell when
//! reported in meters). A tier `k` spawns the agent exactly `k` actions from
//! the target's goal set along a shortest action path.

use crate::calib::{self, CalibrationConfig};
use crate::gen::{Dataset, EnvEntry, Split};
use crate::grid::{GridEnvironment, ObjectId};
use crate::nav::{NavModel, Termination};
use crate::oracle::{self, GoalSet};
use crate::qa::{BlindfoldModel, QaModel, N_FRAMES};
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const METERS_PER_CELL: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Spawn tiers (action distances from the goal set).
    pub tiers: Vec<usize>,
    /// Episode step budget: `min(2k + 20, step_cap)` at tier `k`.
    pub step_cap: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { tiers: vec![10, 20, 30], step_cap: 120 }
    }
}

impl EvalConfig {
    pub fn max_steps(&self, tier: usize) -> usize {
        (2 * tier + 20).min(self.step_cap)
    }
}

/// Change in geodesic distance to the target from spawn to stop; positive
/// means the agent ended closer.
pub fn distance_progress(
    env: &GridEnvironment,
    target: ObjectId,
    spawn_pos: (usize, usize),
    stop_pos: (usize, usize),
) -> Result<i64, crate::grid::GridError> {
    let target_pos = env.object(target).expect("unknown target object").pos;
    let from_spawn = env.geodesic_distance(spawn_pos, target_pos)? as i64;
    let from_stop = env.geodesic_distance(stop_pos, target_pos)? as i64;
    Ok(from_spawn - from_stop)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub qid: String,
    pub env_id: String,
    pub tier: usize,
    pub spawn: (usize, usize),
    pub stop: (usize, usize),
    pub initial_distance: usize,
    pub progress_cells: i64,
    pub episode_len: usize,
    pub stopped: bool,
    pub predicted: String,
    pub gold: String,
    pub correct: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TierSummary {
    pub tier: usize,
    pub episodes: usize,
    pub skipped: usize,
    pub mean_progress_cells: f64,
    pub mean_progress_m: f64,
    pub qa_accuracy: f64,
    pub stop_rate: f64,
    pub mean_episode_len: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub seed: u64,
    pub summaries: Vec<TierSummary>,
    pub records: Vec<QuestionRecord>,
    pub skipped_total: usize,
}

impl EvalReport {
    /// Recompute the per-tier summaries from the per-question records; an
    /// ordered reduction, so aggregates are reproducible from the records.
    pub fn summarize(tiers: &[usize], records: &[QuestionRecord], skipped: &HashMap<usize, usize>) -> Vec<TierSummary> {
        tiers
            .iter()
            .map(|&tier| {
                let rs: Vec<&QuestionRecord> = records.iter().filter(|r| r.tier == tier).collect();
                let n = rs.len();
                if n == 0 {
                    return TierSummary { tier, skipped: *skipped.get(&tier).unwrap_or(&0), ..Default::default() };
                }
                let nf = n as f64;
                TierSummary {
                    tier,
                    episodes: n,
                    skipped: *skipped.get(&tier).unwrap_or(&0),
                    mean_progress_cells: rs.iter().map(|r| r.progress_cells as f64).sum::<f64>() / nf,
                    mean_progress_m: rs.iter().map(|r| r.progress_cells as f64 * METERS_PER_CELL).sum::<f64>() / nf,
                    qa_accuracy: rs.iter().filter(|r| r.correct).count() as f64 / nf,
                    stop_rate: rs.iter().filter(|r| r.stopped).count() as f64 / nf,
                    mean_episode_len: rs.iter().map(|r| r.episode_len as f64).sum::<f64>() / nf,
                }
            })
            .collect()
    }

    pub fn tier(&self, k: usize) -> Option<&TierSummary> {
        self.summaries.iter().find(|s| s.tier == k)
    }

    pub fn overall_mean_progress(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.progress_cells as f64).sum::<f64>() / self.records.len() as f64
    }

    pub fn overall_qa_accuracy(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.correct).count() as f64 / self.records.len() as f64
    }
}

/// How an agent behaves during evaluation.
enum AgentKind<'a> {
    /// Greedy rollout of a navigation policy, per-environment model lookup.
    Nav(&'a dyn Fn(&str) -> &'a NavModel),
    /// Never moves.
    Still,
    /// Replays the shortest action path into the goal set.
    Oracle,
}

/// Answerer applied to the episode's final frames.
enum AnswerKind<'a> {
    Qa(&'a QaModel),
    Blindfold(&'a BlindfoldModel),
}

fn goal_sets_for(entry: &EnvEntry, extra_env: Option<&GridEnvironment>) -> HashMap<ObjectId, GoalSet> {
    let env = extra_env.unwrap_or(&entry.env);
    let mut goals = HashMap::new();
    for q in &entry.questions {
        goals
            .entry(q.target_object_id)
            .or_insert_with(|| oracle::goal_set(env, q.target_object_id).expect("question target has no goal set"));
    }
    goals
}

fn run_eval(
    entries: &[EnvEntry],
    envs: Option<&HashMap<String, GridEnvironment>>,
    agent: AgentKind,
    answerer: AnswerKind,
    cfg: &EvalConfig,
    seed: u64,
) -> EvalReport {
    let root = DetRng::new(seed);
    let mut records = Vec::new();
    let mut skipped: HashMap<usize, usize> = HashMap::new();
    for entry in entries {
        let env = envs.and_then(|m| m.get(&entry.env.env_id)).unwrap_or(&entry.env);
        let goals = goal_sets_for(entry, Some(env));
        for q in &entry.questions {
            let goal = &goals[&q.target_object_id];
            for &tier in &cfg.tiers {
                let mut rng = root.derive(&format!("spawn:{}:{}", q.qid, tier));
                let spawn = match oracle::spawn_at_goal(env, goal, tier, &mut rng) {
                    Ok(s) => s,
                    Err(_) => {
                        *skipped.entry(tier).or_default() += 1;
                        continue;
                    }
                };
                let max_steps = cfg.max_steps(tier);
                let (stop_state, episode_len, stopped, frames) = match &agent {
                    AgentKind::Nav(lookup) => {
                        let nav = lookup(&entry.env.env_id);
                        let traj = nav.rollout(env, &q.tokens, spawn, max_steps).expect("rollout failed in eval");
                        let frames: Vec<Vec<f64>> = traj
                            .last_frames(N_FRAMES)
                            .into_iter()
                            .map(|o| o.features(env.space.types.len(), env.space.colors.len()))
                            .collect();
                        (traj.end_state(), traj.len(), traj.terminated_by == Termination::Stop, frames)
                    }
                    AgentKind::Still => {
                        let obs = env.obs_features(spawn);
                        (spawn, 0, true, vec![obs; N_FRAMES])
                    }
                    AgentKind::Oracle => {
                        let path = oracle::shortest_action_path(env, spawn, goal).expect("oracle path failed");
                        let states = path.states(env);
                        let n = states.len();
                        let mut frames = Vec::with_capacity(N_FRAMES);
                        for _ in n..N_FRAMES {
                            frames.push(env.obs_features(states[0]));
                        }
                        for s in states.iter().skip(n.saturating_sub(N_FRAMES)) {
                            frames.push(env.obs_features(*s));
                        }
                        (path.end, path.len(), true, frames)
                    }
                };
                let predicted = match &answerer {
                    AnswerKind::Qa(qa) => {
                        let dist = qa.answer(&frames, &q.tokens).expect("qa answer failed in eval");
                        qa.answer_token(crate::nav::argmax(&dist)).to_string()
                    }
                    AnswerKind::Blindfold(bf) => {
                        let dist = bf.answer(&q.tokens).expect("blindfold answer failed in eval");
                        bf.answers[crate::nav::argmax(&dist)].clone()
                    }
                };
                let initial_distance = env
                    .geodesic_distance(spawn.pos(), env.object(q.target_object_id).unwrap().pos)
                    .expect("spawn disconnected from target");
                let progress = distance_progress(env, q.target_object_id, spawn.pos(), stop_state.pos())
                    .expect("progress computation failed");
                records.push(QuestionRecord {
                    qid: q.qid.clone(),
                    env_id: entry.env.env_id.clone(),
                    tier,
                    spawn: spawn.pos(),
                    stop: stop_state.pos(),
                    initial_distance,
                    progress_cells: progress,
                    episode_len,
                    stopped,
                    predicted,
                    gold: q.answer_token.clone(),
                    correct: false, // filled below
                });
                let r = records.last_mut().unwrap();
                r.correct = r.predicted == r.gold;
            }
        }
    }
    let summaries = EvalReport::summarize(&cfg.tiers, &records, &skipped);
    let skipped_total = skipped.values().sum();
    EvalReport { config: cfg.clone(), seed, summaries, records, skipped_total }
}

/// Evaluate a navigation policy plus answerer over a split.
pub fn evaluate(
    nav: &NavModel,
    qa: &QaModel,
    dataset: &Dataset,
    split: Split,
    cfg: &EvalConfig,
    seed: u64,
) -> EvalReport {
    let lookup = move |_: &str| nav;
    run_eval(dataset.split(split), None, AgentKind::Nav(&lookup), AnswerKind::Qa(qa), cfg, seed)
}

/// Evaluate with one adapted navigation model per environment (calibration
/// setting). `envs` carries the marker-augmented environments the rollouts
/// run in; falls back to the dataset environment when absent.
pub fn evaluate_per_env(
    navs: &HashMap<String, NavModel>,
    fallback: &NavModel,
    envs: &HashMap<String, GridEnvironment>,
    qa: &QaModel,
    dataset: &Dataset,
    split: Split,
    cfg: &EvalConfig,
    seed: u64,
) -> EvalReport {
    let lookup = move |env_id: &str| navs.get(env_id).unwrap_or(fallback);
    run_eval(dataset.split(split), Some(envs), AgentKind::Nav(&lookup), AnswerKind::Qa(qa), cfg, seed)
}

/// The blindfold control: never moves, answers from the question alone.
/// Navigation progress is exactly zero by construction.
pub fn evaluate_blindfold(
    bf: &BlindfoldModel,
    dataset: &Dataset,
    split: Split,
    cfg: &EvalConfig,
    seed: u64,
) -> EvalReport {
    run_eval(dataset.split(split), None, AgentKind::Still, AnswerKind::Blindfold(bf), cfg, seed)
}

/// Upper-bound agent: replays the exact shortest path, answers on the goal
/// frames.
pub fn evaluate_oracle_agent(
    qa: &QaModel,
    dataset: &Dataset,
    split: Split,
    cfg: &EvalConfig,
    seed: u64,
) -> EvalReport {
    run_eval(dataset.split(split), None, AgentKind::Oracle, AnswerKind::Qa(qa), cfg, seed)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Setting {
    Standard,
    CalibrationFinetune,
    CalibrationDistill,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::Standard => "standard",
            Setting::CalibrationFinetune => "calibration-finetune",
            Setting::CalibrationDistill => "calibration-distill",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TierStat {
    pub tier: usize,
    pub mean: f64,
    pub stddev: f64,
    pub per_seed: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SettingRow {
    pub setting: Setting,
    pub progress: Vec<TierStat>,
    pub qa_accuracy: Vec<TierStat>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SettingsComparison {
    pub rows: Vec<SettingRow>,
    pub seeds: Vec<u64>,
    pub tiers: Vec<usize>,
}

fn stat(tier: usize, per_seed: Vec<f64>) -> TierStat {
    let n = per_seed.len() as f64;
    let mean = per_seed.iter().sum::<f64>() / n;
    let var = per_seed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    TierStat { tier, mean, stddev: var.sqrt(), per_seed }
}

/// Calibrate one adapted model per environment of a split; returns the
/// augmented environments and the adapted models.
pub fn calibrate_split(
    pretrained: &NavModel,
    dataset: &Dataset,
    split: Split,
    calib_cfg: &CalibrationConfig,
    distill: bool,
    seed: u64,
) -> Result<(HashMap<String, GridEnvironment>, HashMap<String, NavModel>), calib::CalibError> {
    let mut envs = HashMap::new();
    let mut navs = HashMap::new();
    for entry in dataset.split(split) {
        let mut rng = DetRng::new(seed).derive(&format!("markers:{}", entry.env.env_id));
        let marked = calib::place_markers(&entry.env, &dataset.vocab, calib_cfg, &mut rng)?;
        let data = calib::marker_questions(&marked, &mut rng)?;
        let cfg = CalibrationConfig { seed: DetRng::new(seed).derive(&entry.env.env_id).next_u64(), ..calib_cfg.clone() };
        let (adapted, _) = if distill {
            calib::calibrate_distill(pretrained, &marked, &data, &cfg)
        } else {
            calib::calibrate_finetune(pretrained, &marked, &data, &cfg)
        };
        navs.insert(entry.env.env_id.clone(), adapted);
        envs.insert(entry.env.env_id.clone(), marked);
    }
    Ok((envs, navs))
}

/// Standard versus calibration-finetune versus calibration-distill on a
/// split, averaged over seeds.
pub fn compare_settings(
    nav: &NavModel,
    qa: &QaModel,
    dataset: &Dataset,
    split: Split,
    calib_cfg: &CalibrationConfig,
    eval_cfg: &EvalConfig,
    seeds: &[u64],
) -> Result<SettingsComparison, calib::CalibError> {
    let settings = [Setting::Standard, Setting::CalibrationFinetune, Setting::CalibrationDistill];
    let mut rows = Vec::new();
    for setting in settings {
        let mut progress: Vec<Vec<f64>> = vec![Vec::new(); eval_cfg.tiers.len()];
        let mut accuracy: Vec<Vec<f64>> = vec![Vec::new(); eval_cfg.tiers.len()];
        for &seed in seeds {
            let report = match setting {
                Setting::Standard => evaluate(nav, qa, dataset, split, eval_cfg, seed),
                Setting::CalibrationFinetune | Setting::CalibrationDistill => {
                    let distill = setting == Setting::CalibrationDistill;
                    let (envs, navs) = calibrate_split(nav, dataset, split, calib_cfg, distill, seed)?;
                    evaluate_per_env(&navs, nav, &envs, qa, dataset, split, eval_cfg, seed)
                }
            };
            for (i, &tier) in eval_cfg.tiers.iter().enumerate() {
                let s = report.tier(tier).expect("missing tier in report");
                progress[i].push(s.mean_progress_cells);
                accuracy[i].push(s.qa_accuracy);
            }
        }
        rows.push(SettingRow {
            setting,
            progress: eval_cfg.tiers.iter().zip(progress).map(|(&t, v)| stat(t, v)).collect(),
            qa_accuracy: eval_cfg.tiers.iter().zip(accuracy).map(|(&t, v)| stat(t, v)).collect(),
        });
    }
    Ok(SettingsComparison { rows, seeds: seeds.to_vec(), tiers: eval_cfg.tiers.clone() })
}

impl SettingsComparison {
    pub fn row(&self, s: Setting) -> &SettingRow {
        self.rows.iter().find(|r| r.setting == s).expect("missing setting row")
    }

    /// Aligned plain-text table of progress and QA accuracy per tier.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<24}", "setting"));
        for t in &self.tiers {
            out.push_str(&format!(" | d{t:>3} prog (cells)"));
        }
        for t in &self.tiers {
            out.push_str(&format!(" | d{t:>3} QA acc"));
        }
        out.push('\n');
        out.push_str(&"-".repeat(out.len() - 1));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<24}", row.setting.name()));
            for s in &row.progress {
                out.push_str(&format!(" | {:>7.3} +- {:>5.3}", s.mean, s.stddev));
            }
            for s in &row.qa_accuracy {
                out.push_str(&format!(" | {:>5.1}% +- {:>4.1}", s.mean * 100.0, s.stddev * 100.0));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Marker count or lambda value, depending on the sweep.
    pub x: f64,
    pub progress: Vec<TierStat>,
    pub qa_accuracy: Vec<TierStat>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepCurve {
    pub kind: String,
    pub points: Vec<SweepPoint>,
    pub tiers: Vec<usize>,
    pub seeds: Vec<u64>,
}

fn sweep_eval(
    nav: &NavModel,
    qa: &QaModel,
    dataset: &Dataset,
    split: Split,
    calib_cfg: &CalibrationConfig,
    eval_cfg: &EvalConfig,
    seeds: &[u64],
    x: f64,
) -> Result<SweepPoint, calib::CalibError> {
    let mut progress: Vec<Vec<f64>> = vec![Vec::new(); eval_cfg.tiers.len()];
    let mut accuracy: Vec<Vec<f64>> = vec![Vec::new(); eval_cfg.tiers.len()];
    for &seed in seeds {
        let (envs, navs) = calibrate_split(nav, dataset, split, calib_cfg, true, seed)?;
        let report = evaluate_per_env(&navs, nav, &envs, qa, dataset, split, eval_cfg, seed);
        for (i, &tier) in eval_cfg.tiers.iter().enumerate() {
            let s = report.tier(tier).expect("missing tier");
            progress[i].push(s.mean_progress_cells);
            accuracy[i].push(s.qa_accuracy);
        }
    }
    Ok(SweepPoint {
        x,
        progress: eval_cfg.tiers.iter().zip(progress).map(|(&t, v)| stat(t, v)).collect(),
        qa_accuracy: eval_cfg.tiers.iter().zip(accuracy).map(|(&t, v)| stat(t, v)).collect(),
    })
}

/// Calibrate and evaluate at each marker count.
pub fn sweep_markers(
    nav: &NavModel,
    qa: &QaModel,
    dataset: &Dataset,
    split: Split,
    counts: &[usize],
    calib_cfg: &CalibrationConfig,
    eval_cfg: &EvalConfig,
    seeds: &[u64],
) -> Result<SweepCurve, calib::CalibError> {
    let mut points = Vec::new();
    for &n in counts {
        let cfg = CalibrationConfig { n_markers: n, ..calib_cfg.clone() };
        points.push(sweep_eval(nav, qa, dataset, split, &cfg, eval_cfg, seeds, n as f64)?);
    }
    Ok(SweepCurve { kind: "markers".into(), points, tiers: eval_cfg.tiers.clone(), seeds: seeds.to_vec() })
}

/// Calibrate and evaluate at each lambda (distillation weight).
pub fn sweep_lambda(
    nav: &NavModel,
    qa: &QaModel,
    dataset: &Dataset,
    split: Split,
    lambdas: &[f64],
    calib_cfg: &CalibrationConfig,
    eval_cfg: &EvalConfig,
    seeds: &[u64],
) -> Result<SweepCurve, calib::CalibError> {
    let mut points = Vec::new();
    for &lambda in lambdas {
        let cfg = CalibrationConfig { lambda, ..calib_cfg.clone() };
        points.push(sweep_eval(nav, qa, dataset, split, &cfg, eval_cfg, seeds, lambda)?);
    }
    Ok(SweepCurve { kind: "lambda".into(), points, tiers: eval_cfg.tiers.clone(), seeds: seeds.to_vec() })
}


impl SweepCurve {
    pub fn render_csv(&self) -> String {
        let mut out = String::from("x,tier,mean_progress_cells,stddev_progress_cells,mean_qa_accuracy,stddev_qa_accuracy\n");
        for p in &self.points {
            for (ps, qs) in p.progress.iter().zip(&p.qa_accuracy) {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    p.x, ps.tier, ps.mean, ps.stddev, qs.mean, qs.stddev
                ));
            }
        }
        out
    }
}
