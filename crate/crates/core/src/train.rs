//! Training pipelines: imitation learning for navigation, supervised QA on
//! ground-truth-path frames, the question-only blindfold classifier, and the
//! joint pipeline that gradually exposes the QA module to rolled-out frames.
//!
//! Random streams are separated by label (spawns, shuffling, rollout mixing,
//! per-model init), so changing one knob never perturbs the others: joint
//! training with the QA weight at zero reproduces plain navigation training
//! step for step.

use crate::gen::{Dataset, EnvEntry, Split};
use crate::grid::AgentState;
use crate::nav::{NavConfig, NavModel};
use crate::nn::{ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
use crate::oracle::{self, ActionPath, GoalSet};
use crate::qa::{BlindfoldModel, QaConfig, QaModel, N_FRAMES};
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// One supervision episode: a question, its deterministic spawn, and the
/// shortest action path into the target's goal set.
#[derive(Clone, Debug)]
pub struct Episode {
    pub env_idx: usize,
    pub question_idx: usize,
    pub spawn: AgentState,
    pub path: ActionPath,
}

/// Deterministic per-question spawns and shortest paths for a split. Spawn
/// streams are keyed by question id, so episode construction does not depend
/// on iteration order.
pub fn build_episodes(entries: &[EnvEntry], root: &DetRng) -> Vec<Episode> {
    let mut episodes = Vec::new();
    for (env_idx, entry) in entries.iter().enumerate() {
        let mut goals: HashMap<crate::grid::ObjectId, GoalSet> = HashMap::new();
        for (question_idx, q) in entry.questions.iter().enumerate() {
            let goal = goals
                .entry(q.target_object_id)
                .or_insert_with(|| oracle::goal_set(&entry.env, q.target_object_id).expect("dataset question without goal set"));
            let mut rng = root.derive(&format!("spawn:{}", q.qid));
            let spawn = oracle::random_state(&entry.env, &mut rng);
            let path = oracle::shortest_action_path(&entry.env, spawn, goal).expect("unreachable goal in connected env");
            episodes.push(Episode { env_idx, question_idx, spawn, path });
        }
    }
    episodes
}

/// Rollout budget used when the joint pipeline substitutes predicted frames:
/// twice the teacher path length plus slack, capped.
pub fn rollout_budget(path_len: usize, cap: usize) -> usize {
    (2 * path_len + 20).min(cap)
}

pub const DEFAULT_STEP_CAP: usize = 120;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for NavTrainConfig {
    fn default() -> Self {
        NavTrainConfig { epochs: 12, lr: 1e-3, batch: 8, seed: 1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NavCurvePoint {
    pub epoch: usize,
    pub loss: f64,
    pub teacher_forced_accuracy: f64,
}

/// Fraction of QA samples per joint epoch that use rolled-out frames instead
/// of ground-truth-path frames: linear ramp from 0 to `peak` over the first
/// half of the joint epochs, then constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub peak: f64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule { peak: 0.5 }
    }
}

impl TrainSchedule {
    pub fn rollout_mix(&self, epoch: usize, total_epochs: usize) -> f64 {
        if total_epochs == 0 {
            return self.peak;
        }
        let half = (total_epochs as f64 / 2.0).max(1.0);
        self.peak * (epoch as f64 / half).min(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    /// Navigation-only epochs before the joint phase.
    pub warmstart_epochs: usize,
    /// Joint epochs after the warm start.
    pub joint_epochs: usize,
    pub w_nav: f64,
    pub w_qa: f64,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    pub schedule: TrainSchedule,
    /// Evaluate on the validation split after each epoch (slower; fills the
    /// val columns of the training log).
    pub track_val: bool,
}

impl Default for JointConfig {
    fn default() -> Self {
        JointConfig {
            warmstart_epochs: 3,
            joint_epochs: 6,
            w_nav: 1.0,
            w_qa: 1.0,
            lr: 1e-3,
            batch: 8,
            seed: 1,
            schedule: TrainSchedule::default(),
            track_val: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointCurvePoint {
    pub epoch: usize,
    pub nav_loss: f64,
    pub nav_accuracy: f64,
    pub qa_loss: Option<f64>,
    pub rollout_mix: f64,
    pub val_progress: Option<f64>,
    pub val_qa_accuracy: Option<f64>,
}

struct LoopCfg {
    warmstart: usize,
    epochs: usize,
    w_nav: f64,
    w_qa: f64,
    lr: f64,
    batch: usize,
    schedule: TrainSchedule,
}

/// Shared epoch loop. `qa` joins in after the warm start; the QA module never
/// backpropagates into the navigation model (frames are constants), and the
/// rollout-mix stream is consumed identically whatever the loss weights are.
fn run_epochs(
    dataset: &Dataset,
    nav: &mut NavModel,
    mut qa: Option<&mut QaModel>,
    cfg: &LoopCfg,
    root: &DetRng,
    track_val: bool,
) -> Vec<JointCurvePoint> {
    let episodes = build_episodes(&dataset.train, &root.derive("train-episodes"));
    assert!(!episodes.is_empty(), "training split has no episodes");
    let mut shuffle_rng = root.derive("shuffle");
    let mut mix_rng = root.derive("rollout-mix");
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    let mut curve = Vec::new();

    for epoch in 0..cfg.warmstart + cfg.epochs {
        let joint = epoch >= cfg.warmstart;
        let p = if joint {
            cfg.schedule.rollout_mix(epoch - cfg.warmstart, cfg.epochs)
        } else {
            0.0
        };
        shuffle_rng.shuffle(&mut order);
        let mut nav_loss_sum = 0.0;
        let mut nav_acc_sum = 0.0;
        let mut qa_loss_sum = 0.0;
        let mut qa_count = 0usize;

        for chunk in order.chunks(cfg.batch) {
            let bs = chunk.len() as f64;
            for &ei in chunk {
                let ep = &episodes[ei];
                let entry = &dataset.train[ep.env_idx];
                let q = &entry.questions[ep.question_idx];
                let trace = nav
                    .teacher_forced(&entry.env, &q.tokens, &ep.path)
                    .expect("training episode failed the forward pass");
                nav_loss_sum += trace.loss;
                nav_acc_sum += trace.accuracy;
                nav.imitation_backward(&trace, cfg.w_nav / bs, None);

                if joint {
                    // consume the mix stream regardless of whether a QA model
                    // is attached, to keep the nav trajectory identical
                    let use_rollout = mix_rng.chance(p);
                    if let Some(qa) = qa.as_deref_mut() {
                        let label = qa.answer_index(&q.answer_token).expect("answer outside vocabulary");
                        let frames: Vec<Vec<f64>> = if use_rollout {
                            let budget = rollout_budget(ep.path.len(), DEFAULT_STEP_CAP);
                            let traj = nav
                                .rollout(&entry.env, &q.tokens, ep.spawn, budget)
                                .expect("rollout failed during training");
                            traj.last_frames(N_FRAMES)
                                .into_iter()
                                .map(|o| o.features(entry.env.space.types.len(), entry.env.space.colors.len()))
                                .collect()
                        } else {
                            ground_truth_frames(entry, ep)
                        };
                        let qa_trace = qa.answer_traced(&frames, &q.tokens).expect("qa forward failed");
                        qa_loss_sum += qa_trace.cross_entropy(label);
                        qa_count += 1;
                        qa.qa_backward(&qa_trace, label, cfg.w_qa / bs);
                    }
                }
            }
            nav.store.adam_step(cfg.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
            if joint {
                if let Some(qa) = qa.as_deref_mut() {
                    qa.store.adam_step(cfg.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
                }
            }
        }

        let (val_progress, val_qa_accuracy) = if track_val {
            match qa.as_deref() {
                Some(qa_model) => {
                    let report = crate::eval::evaluate(
                        nav,
                        qa_model,
                        dataset,
                        Split::Val,
                        &crate::eval::EvalConfig::default(),
                        root.derive("val-eval").next_u64(),
                    );
                    (Some(report.overall_mean_progress()), Some(report.overall_qa_accuracy()))
                }
                None => (None, None),
            }
        } else {
            (None, None)
        };

        curve.push(JointCurvePoint {
            epoch,
            nav_loss: nav_loss_sum / episodes.len() as f64,
            nav_accuracy: nav_acc_sum / episodes.len() as f64,
            qa_loss: (qa_count > 0).then(|| qa_loss_sum / qa_count as f64),
            rollout_mix: p,
            val_progress,
            val_qa_accuracy,
        });
    }
    curve
}

fn ground_truth_frames(entry: &EnvEntry, ep: &Episode) -> Vec<Vec<f64>> {
    let states = ep.path.states(&entry.env);
    let n = states.len();
    let mut frames = Vec::with_capacity(N_FRAMES);
    for _ in n..N_FRAMES {
        frames.push(entry.env.obs_features(states[0]));
    }
    let skip = n.saturating_sub(N_FRAMES);
    for s in states.into_iter().skip(skip) {
        frames.push(entry.env.obs_features(s));
    }
    frames
}

/// Imitation-train a navigation model on the training split.
pub fn train_navigation(dataset: &Dataset, cfg: &NavTrainConfig) -> (NavModel, Vec<NavCurvePoint>) {
    let root = DetRng::new(cfg.seed);
    let obs_dim = feature_dim(dataset);
    let mut nav = NavModel::new(NavConfig::standard(dataset.vocab.words.clone(), obs_dim), cfg.seed);
    let loop_cfg = LoopCfg {
        warmstart: 0,
        epochs: cfg.epochs,
        w_nav: 1.0,
        w_qa: 0.0,
        lr: cfg.lr,
        batch: cfg.batch.max(1),
        schedule: TrainSchedule { peak: 0.0 },
    };
    let curve = run_epochs(dataset, &mut nav, None, &loop_cfg, &root, false);
    let nav_curve = curve
        .into_iter()
        .map(|c| NavCurvePoint { epoch: c.epoch, loss: c.nav_loss, teacher_forced_accuracy: c.nav_accuracy })
        .collect::<Vec<_>>();
    (nav, nav_curve)
}

/// The united pipeline: navigation warm start, then joint updates with the QA
/// module consuming ground-truth or rolled-out frames per the schedule.
pub fn joint_train(dataset: &Dataset, cfg: &JointConfig) -> (NavModel, QaModel, Vec<JointCurvePoint>) {
    let root = DetRng::new(cfg.seed);
    let obs_dim = feature_dim(dataset);
    let mut nav = NavModel::new(NavConfig::standard(dataset.vocab.words.clone(), obs_dim), cfg.seed);
    let mut qa = QaModel::new(
        QaConfig::standard(dataset.vocab.words.clone(), dataset.vocab.answers.clone(), obs_dim),
        cfg.seed,
    );
    let loop_cfg = LoopCfg {
        warmstart: cfg.warmstart_epochs,
        epochs: cfg.joint_epochs,
        w_nav: cfg.w_nav,
        w_qa: cfg.w_qa,
        lr: cfg.lr,
        batch: cfg.batch.max(1),
        schedule: cfg.schedule.clone(),
    };
    let curve = run_epochs(dataset, &mut nav, Some(&mut qa), &loop_cfg, &root, cfg.track_val);
    (nav, qa, curve)
}

pub fn feature_dim(dataset: &Dataset) -> usize {
    dataset
        .train
        .first()
        .map(|e| e.env.feature_dim())
        .expect("dataset has no training environments")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for QaTrainConfig {
    fn default() -> Self {
        QaTrainConfig { epochs: 30, lr: 1e-3, batch: 8, seed: 1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QaCurvePoint {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Train the QA module alone on ground-truth-path frames.
pub fn train_qa(dataset: &Dataset, cfg: &QaTrainConfig) -> (QaModel, Vec<QaCurvePoint>) {
    let root = DetRng::new(cfg.seed);
    let obs_dim = feature_dim(dataset);
    let mut qa = QaModel::new(
        QaConfig::standard(dataset.vocab.words.clone(), dataset.vocab.answers.clone(), obs_dim),
        cfg.seed,
    );
    let episodes = build_episodes(&dataset.train, &root.derive("train-episodes"));
    // frames never change: precompute
    let frames: Vec<Vec<Vec<f64>>> = episodes.iter().map(|ep| ground_truth_frames(&dataset.train[ep.env_idx], ep)).collect();
    let labels: Vec<usize> = episodes
        .iter()
        .map(|ep| {
            let q = &dataset.train[ep.env_idx].questions[ep.question_idx];
            qa.answer_index(&q.answer_token).expect("answer outside vocabulary")
        })
        .collect();
    let mut shuffle_rng = root.derive("shuffle");
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    let mut curve = Vec::new();
    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for chunk in order.chunks(cfg.batch.max(1)) {
            let bs = chunk.len() as f64;
            for &i in chunk {
                let q = &dataset.train[episodes[i].env_idx].questions[episodes[i].question_idx];
                let trace = qa.answer_traced(&frames[i], &q.tokens).expect("qa forward failed");
                loss_sum += trace.cross_entropy(labels[i]);
                if trace.predicted() == labels[i] {
                    hits += 1;
                }
                qa.qa_backward(&trace, labels[i], 1.0 / bs);
            }
            qa.store.adam_step(cfg.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        }
        curve.push(QaCurvePoint {
            epoch,
            loss: loss_sum / episodes.len() as f64,
            accuracy: hits as f64 / episodes.len() as f64,
        });
    }
    (qa, curve)
}

/// Train the blindfold control on `(question tokens -> answer)` alone.
pub fn train_blindfold(dataset: &Dataset, cfg: &QaTrainConfig) -> (BlindfoldModel, Vec<QaCurvePoint>) {
    let root = DetRng::new(cfg.seed);
    let mut model = BlindfoldModel::new(dataset.vocab.words.clone(), dataset.vocab.answers.clone(), cfg.seed);
    let items: Vec<(usize, usize)> = dataset
        .train
        .iter()
        .enumerate()
        .flat_map(|(ei, e)| (0..e.questions.len()).map(move |qi| (ei, qi)))
        .collect();
    let labels: Vec<usize> = items
        .iter()
        .map(|&(ei, qi)| {
            let q = &dataset.train[ei].questions[qi];
            model
                .answers
                .iter()
                .position(|a| a == &q.answer_token)
                .expect("answer outside vocabulary")
        })
        .collect();
    let mut shuffle_rng = root.derive("shuffle");
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut curve = Vec::new();
    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for chunk in order.chunks(cfg.batch.max(1)) {
            let bs = chunk.len() as f64;
            for &i in chunk {
                let (ei, qi) = items[i];
                let q = &dataset.train[ei].questions[qi];
                let dist = model.answer(&q.tokens).expect("blindfold forward failed");
                if crate::nav::argmax(&dist) == labels[i] {
                    hits += 1;
                }
                loss_sum += model.loss_and_backward(&q.tokens, labels[i], 1.0 / bs).expect("blindfold backward failed");
            }
            model.store.adam_step(cfg.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        }
        curve.push(QaCurvePoint {
            epoch,
            loss: loss_sum / items.len() as f64,
            accuracy: hits as f64 / items.len() as f64,
        });
    }
    (model, curve)
}
