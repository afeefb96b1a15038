//! Question answering over the last five observation frames, plus the
//! question-only bag-of-words control.
//!
//! The answerer encodes the question with its own 2-layer LSTM, encodes each
//! frame linearly, attends over the five frame encodings with scaled
//! dot-product weights, and classifies `concat(question vector, attention
//! context)` into the answer vocabulary. The blindfold control consumes token
//! counts only and never sees an observation.

use crate::nav::argmax;
use crate::nn::{softmax, softmax_cross_entropy, Embedding, Linear, LstmStack, LstmTrace, ParamStore};
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The answer module always consumes exactly this many frames.
pub const N_FRAMES: usize = 5;

#[derive(Debug, Error)]
pub enum QaError {
    #[error("token {0:?} is not in the closed vocabulary")]
    UnknownToken(String),
    #[error("answer token {0:?} is not an answer candidate")]
    UnknownAnswer(String),
    #[error("expected {N_FRAMES} frames, got {0}")]
    FrameCount(usize),
    #[error("frame feature length {got} does not match model input {want}")]
    ObsDimMismatch { got: usize, want: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaConfig {
    pub words: Vec<String>,
    pub answers: Vec<String>,
    pub obs_dim: usize,
    pub word_dim: usize,
    pub q_hidden: usize,
    pub frame_embed: usize,
    pub n_layers: usize,
}

impl QaConfig {
    pub fn standard(words: Vec<String>, answers: Vec<String>, obs_dim: usize) -> Self {
        QaConfig { words, answers, obs_dim, word_dim: 64, q_hidden: 64, frame_embed: 64, n_layers: 2 }
    }

    pub fn miniature(words: Vec<String>, answers: Vec<String>, obs_dim: usize) -> Self {
        QaConfig { words, answers, obs_dim, word_dim: 8, q_hidden: 8, frame_embed: 8, n_layers: 2 }
    }
}

#[derive(Clone, Debug)]
pub struct QaModel {
    pub cfg: QaConfig,
    pub store: ParamStore,
    word_emb: Embedding,
    q_enc: LstmStack,
    frame_enc: Linear,
    head: Linear,
}

/// Forward cache for one answer computation.
#[derive(Clone, Debug)]
pub struct QaTrace {
    token_idx: Vec<usize>,
    q_trace: LstmTrace,
    qvec: Vec<f64>,
    frame_feats: Vec<Vec<f64>>,
    frame_emb: Vec<Vec<f64>>,
    weights: Vec<f64>,
    concat: Vec<f64>,
    logits: Vec<f64>,
    pub distribution: Vec<f64>,
}

impl QaTrace {
    pub fn attention_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn predicted(&self) -> usize {
        argmax(&self.distribution)
    }

    pub fn cross_entropy(&self, label: usize) -> f64 {
        softmax_cross_entropy(&self.logits, label).0
    }
}

impl QaModel {
    pub fn new(cfg: QaConfig, seed: u64) -> Self {
        assert_eq!(cfg.q_hidden, cfg.frame_embed, "dot-product attention needs matching dims");
        let mut rng = DetRng::new(seed).derive("qa-init");
        let mut store = ParamStore::new();
        let word_emb = Embedding::init(&mut store, "word_emb", cfg.words.len(), cfg.word_dim, &mut rng);
        let q_enc = LstmStack::init(&mut store, "q_enc", cfg.word_dim, cfg.q_hidden, cfg.n_layers, &mut rng);
        let frame_enc = Linear::init(&mut store, "frame_enc", cfg.obs_dim, cfg.frame_embed, &mut rng);
        let head = Linear::init(&mut store, "head", cfg.q_hidden + cfg.frame_embed, cfg.answers.len(), &mut rng);
        QaModel { cfg, store, word_emb, q_enc, frame_enc, head }
    }

    pub fn answer_index(&self, token: &str) -> Result<usize, QaError> {
        self.cfg
            .answers
            .iter()
            .position(|a| a == token)
            .ok_or_else(|| QaError::UnknownAnswer(token.to_string()))
    }

    pub fn answer_token(&self, idx: usize) -> &str {
        &self.cfg.answers[idx]
    }

    fn token_indices(&self, tokens: &[String]) -> Result<Vec<usize>, QaError> {
        tokens
            .iter()
            .map(|t| {
                self.cfg
                    .words
                    .iter()
                    .position(|w| w == t)
                    .ok_or_else(|| QaError::UnknownToken(t.clone()))
            })
            .collect()
    }

    /// Answer distribution over the candidates from exactly five frame
    /// feature vectors; also returns the full forward cache.
    pub fn answer_traced(&self, frame_feats: &[Vec<f64>], tokens: &[String]) -> Result<QaTrace, QaError> {
        if frame_feats.len() != N_FRAMES {
            return Err(QaError::FrameCount(frame_feats.len()));
        }
        for f in frame_feats {
            if f.len() != self.cfg.obs_dim {
                return Err(QaError::ObsDimMismatch { got: f.len(), want: self.cfg.obs_dim });
            }
        }
        let token_idx = self.token_indices(tokens)?;
        assert!(!token_idx.is_empty(), "cannot encode an empty question");
        let xs: Vec<Vec<f64>> = token_idx.iter().map(|&i| self.word_emb.lookup(&self.store, i).to_vec()).collect();
        let (tops, q_trace) = self.q_enc.forward_seq(&self.store, &xs);
        let qvec = tops.last().unwrap().clone();

        let frame_emb: Vec<Vec<f64>> = frame_feats.iter().map(|f| self.frame_enc.forward(&self.store, f)).collect();
        let scale = 1.0 / (self.cfg.frame_embed as f64).sqrt();
        let scores: Vec<f64> = frame_emb
            .iter()
            .map(|f| scale * f.iter().zip(&qvec).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let weights = softmax(&scores);
        let mut context = vec![0.0; self.cfg.frame_embed];
        for (w, f) in weights.iter().zip(&frame_emb) {
            for k in 0..context.len() {
                context[k] += w * f[k];
            }
        }
        let mut concat = Vec::with_capacity(self.cfg.q_hidden + self.cfg.frame_embed);
        concat.extend_from_slice(&qvec);
        concat.extend_from_slice(&context);
        let logits = self.head.forward(&self.store, &concat);
        let distribution = softmax(&logits);
        Ok(QaTrace {
            token_idx,
            q_trace,
            qvec,
            frame_feats: frame_feats.to_vec(),
            frame_emb,
            weights,
            concat,
            logits,
            distribution,
        })
    }

    /// Answer distribution only.
    pub fn answer(&self, frame_feats: &[Vec<f64>], tokens: &[String]) -> Result<Vec<f64>, QaError> {
        Ok(self.answer_traced(frame_feats, tokens)?.distribution)
    }

    /// Cross-entropy of the answer distribution against the gold token.
    pub fn qa_loss(&self, frame_feats: &[Vec<f64>], tokens: &[String], answer: &str) -> Result<f64, QaError> {
        let label = self.answer_index(answer)?;
        let trace = self.answer_traced(frame_feats, tokens)?;
        Ok(softmax_cross_entropy(&trace.logits, label).0)
    }

    /// Accumulate gradients of `weight * cross_entropy(answer)` for a cached
    /// forward pass.
    pub fn qa_backward(&mut self, trace: &QaTrace, label: usize, weight: f64) {
        let (_, mut dlogits) = softmax_cross_entropy(&trace.logits, label);
        for v in &mut dlogits {
            *v *= weight;
        }
        let qh = self.cfg.q_hidden;
        let fe = self.cfg.frame_embed;
        let mut d_concat = vec![0.0; qh + fe];
        let head = self.head;
        head.backward(&mut self.store, &trace.concat, &dlogits, Some(&mut d_concat));
        let mut d_qvec = d_concat[..qh].to_vec();
        let d_context = &d_concat[qh..];

        // context = sum_i w_i f_i
        let mut d_weights = vec![0.0; N_FRAMES];
        let mut d_frame_emb = vec![vec![0.0; fe]; N_FRAMES];
        for i in 0..N_FRAMES {
            for k in 0..fe {
                d_weights[i] += trace.frame_emb[i][k] * d_context[k];
                d_frame_emb[i][k] += trace.weights[i] * d_context[k];
            }
        }
        // softmax over scores
        let dot: f64 = trace.weights.iter().zip(&d_weights).map(|(w, d)| w * d).sum();
        let d_scores: Vec<f64> = trace.weights.iter().zip(&d_weights).map(|(w, d)| w * (d - dot)).collect();
        // scores_i = scale * qvec . f_i
        let scale = 1.0 / (fe as f64).sqrt();
        for i in 0..N_FRAMES {
            let ds = d_scores[i] * scale;
            for k in 0..fe {
                d_frame_emb[i][k] += ds * trace.qvec[k];
            }
            for k in 0..fe {
                d_qvec[k] += ds * trace.frame_emb[i][k];
            }
        }
        let frame_enc = self.frame_enc;
        for i in 0..N_FRAMES {
            frame_enc.backward(&mut self.store, &trace.frame_feats[i], &d_frame_emb[i], None);
        }
        // question encoder
        let n = trace.token_idx.len();
        let mut d_tops = vec![vec![0.0; qh]; n];
        d_tops[n - 1] = d_qvec;
        let d_xs = self.q_enc.backward_seq(&mut self.store, &trace.q_trace, &d_tops);
        let word_emb = self.word_emb;
        for (t, dx) in d_xs.iter().enumerate() {
            word_emb.backward(&mut self.store, trace.token_idx[t], dx);
        }
    }
}

/// Question-only bag-of-words answerer: token counts through one linear map.
/// It never receives observations, so its output is invariant to the
/// environment and the agent's position.
#[derive(Clone, Debug)]
pub struct BlindfoldModel {
    pub words: Vec<String>,
    pub answers: Vec<String>,
    pub store: ParamStore,
    head: Linear,
}

impl BlindfoldModel {
    pub fn new(words: Vec<String>, answers: Vec<String>, seed: u64) -> Self {
        let mut rng = DetRng::new(seed).derive("blindfold-init");
        let mut store = ParamStore::new();
        let head = Linear::init(&mut store, "head", words.len(), answers.len(), &mut rng);
        BlindfoldModel { words, answers, store, head }
    }

    pub fn bow_features(&self, tokens: &[String]) -> Result<Vec<f64>, QaError> {
        let mut counts = vec![0.0; self.words.len()];
        for t in tokens {
            let i = self
                .words
                .iter()
                .position(|w| w == t)
                .ok_or_else(|| QaError::UnknownToken(t.clone()))?;
            counts[i] += 1.0;
        }
        Ok(counts)
    }

    pub fn answer(&self, tokens: &[String]) -> Result<Vec<f64>, QaError> {
        let x = self.bow_features(tokens)?;
        Ok(softmax(&self.head.forward(&self.store, &x)))
    }

    pub fn loss_and_backward(&mut self, tokens: &[String], label: usize, weight: f64) -> Result<f64, QaError> {
        let x = self.bow_features(tokens)?;
        let logits = self.head.forward(&self.store, &x);
        let (loss, mut dlogits) = softmax_cross_entropy(&logits, label);
        for v in &mut dlogits {
            *v *= weight;
        }
        let head = self.head;
        head.backward(&mut self.store, &x, &dlogits, None);
        Ok(loss)
    }
}
