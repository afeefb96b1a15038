//! Navigation policy: a question-conditioned recurrent model over egocentric
//! observations, trained by teacher-forced imitation of shortest action
//! paths.
//!
//! Per step the model consumes `encoded observation (+) question vector (+)
//! previous-action embedding`, advances a 2-layer LSTM core, and emits logits
//! over the four actions. A reserved 5th action-embedding row is the start
//! token fed at the first step. A terminal `Stop` label is appended after the
//! final path action so the policy learns to terminate.

use crate::grid::{Action, AgentState, GridEnvironment, Observation};
use crate::nn::{Embedding, Linear, LstmStack, LstmState, LstmTrace, ParamStore};
use crate::oracle::ActionPath;
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("token {0:?} is not in the closed vocabulary")]
    UnknownToken(String),
    #[error("observation feature length {got} does not match model input {want}")]
    ObsDimMismatch { got: usize, want: usize },
}

/// Row of the action embedding fed at t=0, before any action was taken.
pub const START_TOKEN: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavConfig {
    pub words: Vec<String>,
    pub obs_dim: usize,
    pub word_dim: usize,
    pub q_hidden: usize,
    pub obs_embed: usize,
    pub act_embed: usize,
    pub core_hidden: usize,
    pub n_layers: usize,
}

impl NavConfig {
    /// Full-size configuration: 64-dim word embeddings, 2x64 question
    /// encoder, 2x128 navigation core, 16-dim action embeddings.
    pub fn standard(words: Vec<String>, obs_dim: usize) -> Self {
        NavConfig {
            words,
            obs_dim,
            word_dim: 64,
            q_hidden: 64,
            obs_embed: 64,
            act_embed: 16,
            core_hidden: 128,
            n_layers: 2,
        }
    }

    /// Scaled-down widths for gradient checking.
    pub fn miniature(words: Vec<String>, obs_dim: usize) -> Self {
        NavConfig {
            words,
            obs_dim,
            word_dim: 8,
            q_hidden: 8,
            obs_embed: 8,
            act_embed: 4,
            core_hidden: 16,
            n_layers: 2,
        }
    }

    pub fn core_input(&self) -> usize {
        self.obs_embed + self.q_hidden + self.act_embed
    }
}

#[derive(Clone, Debug)]
pub struct NavModel {
    pub cfg: NavConfig,
    pub store: ParamStore,
    word_emb: Embedding,
    q_enc: LstmStack,
    obs_enc: Linear,
    act_emb: Embedding,
    core: LstmStack,
    head: Linear,
}

/// Question-encoder forward cache.
#[derive(Clone, Debug)]
pub struct QuestionTrace {
    token_idx: Vec<usize>,
    trace: LstmTrace,
    pub qvec: Vec<f64>,
}

/// Teacher-forced episode forward cache; everything the backward pass and the
/// distillation loss need.
#[derive(Clone, Debug)]
pub struct EpisodeTrace {
    q: QuestionTrace,
    obs_feats: Vec<Vec<f64>>,
    core_inputs_prev_action: Vec<usize>,
    core_trace: LstmTrace,
    /// Per-step top-layer hidden states of the navigation core.
    pub core_tops: Vec<Vec<f64>>,
    logits: Vec<Vec<f64>>,
    labels: Vec<usize>,
    /// Mean per-step cross-entropy against the teacher actions.
    pub loss: f64,
    /// Fraction of steps where the argmax action matches the teacher.
    pub accuracy: f64,
}

impl EpisodeTrace {
    pub fn n_steps(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Termination {
    Stop,
    MaxSteps,
}

#[derive(Clone, Debug)]
pub struct TrajStep {
    /// Observation at the state the action was chosen in.
    pub obs: Observation,
    pub action: Action,
    pub state_after: AgentState,
}

/// Greedy rollout record: executed movement actions plus the observation at
/// the final state (`Stop` itself is not recorded as a step).
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub spawn: AgentState,
    pub steps: Vec<TrajStep>,
    pub final_obs: Observation,
    pub terminated_by: Termination,
}

impl Trajectory {
    pub fn end_state(&self) -> AgentState {
        self.steps.last().map(|s| s.state_after).unwrap_or(self.spawn)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Observations at every visited state, spawn first, stop state last.
    pub fn observations(&self) -> Vec<&Observation> {
        let mut out: Vec<&Observation> = self.steps.iter().map(|s| &s.obs).collect();
        out.push(&self.final_obs);
        out
    }

    /// The last `n` frames, left-padded by repeating the earliest frame when
    /// the trajectory is shorter.
    pub fn last_frames(&self, n: usize) -> Vec<&Observation> {
        let seq = self.observations();
        let mut out = Vec::with_capacity(n);
        for _ in seq.len()..n {
            out.push(seq[0]);
        }
        let skip = seq.len().saturating_sub(n);
        out.extend(seq.into_iter().skip(skip));
        out
    }

    /// Re-run the recorded actions through the dynamics and compare states.
    pub fn replay_consistent(&self, env: &GridEnvironment) -> bool {
        let mut s = self.spawn;
        for step in &self.steps {
            match env.step(s, step.action) {
                Ok(next) => {
                    if next != step.state_after {
                        return false;
                    }
                    s = next;
                }
                Err(_) => return false,
            }
        }
        true
    }
}

impl NavModel {
    pub fn new(cfg: NavConfig, seed: u64) -> Self {
        let mut rng = DetRng::new(seed).derive("nav-init");
        let mut store = ParamStore::new();
        let word_emb = Embedding::init(&mut store, "word_emb", cfg.words.len(), cfg.word_dim, &mut rng);
        let q_enc = LstmStack::init(&mut store, "q_enc", cfg.word_dim, cfg.q_hidden, cfg.n_layers, &mut rng);
        let obs_enc = Linear::init(&mut store, "obs_enc", cfg.obs_dim, cfg.obs_embed, &mut rng);
        let act_emb = Embedding::init(&mut store, "act_emb", 5, cfg.act_embed, &mut rng);
        let core = LstmStack::init(&mut store, "core", cfg.core_input(), cfg.core_hidden, cfg.n_layers, &mut rng);
        let head = Linear::init(&mut store, "head", cfg.core_hidden, 4, &mut rng);
        NavModel { cfg, store, word_emb, q_enc, obs_enc, act_emb, core, head }
    }

    pub fn token_indices(&self, tokens: &[String]) -> Result<Vec<usize>, ModelError> {
        tokens
            .iter()
            .map(|t| {
                self.cfg
                    .words
                    .iter()
                    .position(|w| w == t)
                    .ok_or_else(|| ModelError::UnknownToken(t.clone()))
            })
            .collect()
    }

    /// Final top-layer hidden state of the question encoder.
    pub fn encode_question(&self, tokens: &[String]) -> Result<Vec<f64>, ModelError> {
        let idx = self.token_indices(tokens)?;
        let mut state = self.q_enc.zero_state();
        let mut top = vec![0.0; self.cfg.q_hidden];
        for i in idx {
            let x = self.word_emb.lookup(&self.store, i).to_vec();
            top = self.q_enc.step(&self.store, &x, &mut state, None);
        }
        Ok(top)
    }

    fn encode_question_traced(&self, tokens: &[String]) -> Result<QuestionTrace, ModelError> {
        let token_idx = self.token_indices(tokens)?;
        assert!(!token_idx.is_empty(), "cannot encode an empty question");
        let xs: Vec<Vec<f64>> = token_idx.iter().map(|&i| self.word_emb.lookup(&self.store, i).to_vec()).collect();
        let (tops, trace) = self.q_enc.forward_seq(&self.store, &xs);
        let qvec = tops.last().expect("nonempty question").clone();
        Ok(QuestionTrace { token_idx, trace, qvec })
    }

    fn backward_question(&mut self, q: &QuestionTrace, d_qvec: Vec<f64>) {
        let n = q.token_idx.len();
        let mut d_tops = vec![vec![0.0; self.cfg.q_hidden]; n];
        d_tops[n - 1] = d_qvec;
        let d_xs = self.q_enc.backward_seq(&mut self.store, &q.trace, &d_tops);
        for (t, dx) in d_xs.iter().enumerate() {
            self.word_emb.backward(&mut self.store, q.token_idx[t], dx);
        }
    }

    fn core_step_input(&self, obs_feats: &[f64], qvec: &[f64], prev_action: usize) -> Vec<f64> {
        let obs_emb = self.obs_enc.forward(&self.store, obs_feats);
        let act = self.word_act_lookup(prev_action);
        let mut input = Vec::with_capacity(self.cfg.core_input());
        input.extend_from_slice(&obs_emb);
        input.extend_from_slice(qvec);
        input.extend_from_slice(&act);
        input
    }

    fn word_act_lookup(&self, row: usize) -> Vec<f64> {
        self.act_emb.lookup(&self.store, row).to_vec()
    }

    /// One policy step: action logits plus advanced hidden state.
    pub fn nav_step(
        &self,
        obs_feats: &[f64],
        qvec: &[f64],
        prev_action: usize,
        state: &mut LstmState,
    ) -> Result<Vec<f64>, ModelError> {
        if obs_feats.len() != self.cfg.obs_dim {
            return Err(ModelError::ObsDimMismatch { got: obs_feats.len(), want: self.cfg.obs_dim });
        }
        let input = self.core_step_input(obs_feats, qvec, prev_action);
        let top = self.core.step(&self.store, &input, state, None);
        Ok(self.head.forward(&self.store, &top))
    }

    pub fn zero_core_state(&self) -> LstmState {
        self.core.zero_state()
    }

    /// Teacher-forced pass over a shortest path (with the terminal `Stop`
    /// label appended); returns everything needed for the backward pass.
    pub fn teacher_forced(
        &self,
        env: &GridEnvironment,
        tokens: &[String],
        path: &ActionPath,
    ) -> Result<EpisodeTrace, ModelError> {
        let q = self.encode_question_traced(tokens)?;
        let states = path.states(env);
        let mut labels: Vec<usize> = path.actions.iter().map(|a| a.index()).collect();
        labels.push(Action::Stop.index());

        let n = labels.len();
        let mut obs_feats = Vec::with_capacity(n);
        let mut prev_rows = Vec::with_capacity(n);
        let mut core_inputs = Vec::with_capacity(n);
        for (t, s) in states.iter().enumerate() {
            let feats = env.obs_features(*s);
            if feats.len() != self.cfg.obs_dim {
                return Err(ModelError::ObsDimMismatch { got: feats.len(), want: self.cfg.obs_dim });
            }
            let prev = if t == 0 { START_TOKEN } else { labels[t - 1] };
            core_inputs.push(self.core_step_input(&feats, &q.qvec, prev));
            obs_feats.push(feats);
            prev_rows.push(prev);
        }
        let (core_tops, core_trace) = self.core.forward_seq(&self.store, &core_inputs);

        let mut logits = Vec::with_capacity(n);
        let mut loss = 0.0;
        let mut hits = 0usize;
        for t in 0..n {
            let l = self.head.forward(&self.store, &core_tops[t]);
            let (ce, _) = crate::nn::softmax_cross_entropy(&l, labels[t]);
            loss += ce;
            if argmax(&l) == labels[t] {
                hits += 1;
            }
            logits.push(l);
        }
        loss /= n as f64;
        let accuracy = hits as f64 / n as f64;
        Ok(EpisodeTrace {
            q,
            obs_feats,
            core_inputs_prev_action: prev_rows,
            core_trace,
            core_tops,
            logits,
            labels,
            loss,
            accuracy,
        })
    }

    /// Mean per-step cross-entropy of the policy against a teacher path.
    pub fn imitation_loss(
        &self,
        env: &GridEnvironment,
        tokens: &[String],
        path: &ActionPath,
    ) -> Result<f64, ModelError> {
        Ok(self.teacher_forced(env, tokens, path)?.loss)
    }

    /// Accumulate gradients for a teacher-forced episode. `ce_weight` scales
    /// the cross-entropy objective; `extra_dh_top`, when given, is added to
    /// the gradient of each step's top hidden state (distillation hook).
    pub fn imitation_backward(
        &mut self,
        trace: &EpisodeTrace,
        ce_weight: f64,
        extra_dh_top: Option<&[Vec<f64>]>,
    ) {
        let n = trace.labels.len();
        let scale = ce_weight / n as f64;
        let mut d_tops = vec![vec![0.0; self.cfg.core_hidden]; n];
        for t in 0..n {
            let (_, mut dlogits) = crate::nn::softmax_cross_entropy(&trace.logits[t], trace.labels[t]);
            for v in &mut dlogits {
                *v *= scale;
            }
            let head = self.head;
            head.backward(&mut self.store, &trace.core_tops[t], &dlogits, Some(&mut d_tops[t]));
        }
        if let Some(extra) = extra_dh_top {
            assert_eq!(extra.len(), n, "extra hidden-state gradients: step count mismatch");
            for t in 0..n {
                for k in 0..self.cfg.core_hidden {
                    d_tops[t][k] += extra[t][k];
                }
            }
        }
        let d_inputs = self.core.backward_seq(&mut self.store, &trace.core_trace, &d_tops);

        let (oe, qh) = (self.cfg.obs_embed, self.cfg.q_hidden);
        let mut d_qvec = vec![0.0; qh];
        let obs_enc = self.obs_enc;
        let act_emb = self.act_emb;
        for t in 0..n {
            let d = &d_inputs[t];
            obs_enc.backward(&mut self.store, &trace.obs_feats[t], &d[..oe], None);
            for k in 0..qh {
                d_qvec[k] += d[oe + k];
            }
            act_emb.backward(&mut self.store, trace.core_inputs_prev_action[t], &d[oe + qh..]);
        }
        self.backward_question(&trace.q, d_qvec);
    }

    /// Greedy deterministic rollout: argmax action each step (lowest index on
    /// ties), terminating on `Stop` or after `max_steps` actions.
    pub fn rollout(
        &self,
        env: &GridEnvironment,
        tokens: &[String],
        spawn: AgentState,
        max_steps: usize,
    ) -> Result<Trajectory, ModelError> {
        assert!(env.valid_state(spawn), "rollout from invalid spawn");
        let qvec = self.encode_question(tokens)?;
        let mut state = self.core.zero_state();
        let mut s = spawn;
        let mut prev = START_TOKEN;
        let mut steps = Vec::new();
        for _ in 0..max_steps {
            let obs = env.observe(s);
            let feats = obs.features(env.space.types.len(), env.space.colors.len());
            let logits = self.nav_step(&feats, &qvec, prev, &mut state)?;
            let action = Action::from_index(argmax(&logits));
            if action == Action::Stop {
                return Ok(Trajectory { spawn, steps, final_obs: obs, terminated_by: Termination::Stop });
            }
            let next = env.step(s, action).expect("rollout stepped from invalid state");
            steps.push(TrajStep { obs, action, state_after: next });
            s = next;
            prev = action.index();
        }
        Ok(Trajectory { spawn, steps, final_obs: env.observe(s), terminated_by: Termination::MaxSteps })
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}
