//! Shared helpers for the integration suites: small vocabularies, gradient
//! check drivers for each differentiable op, and the exhaustive BFS used to
//! certify path optimality. The oracles here are deliberately independent of
//! the library's implementation paths.

#![allow(dead_code)]

use eqa_core::gen::{self, Vocabulary};
use eqa_core::grid::{AgentState, GridEnvironment, Heading, ObsWindow};
use eqa_core::nn::{
    cosine_loss, grad_check, softmax_cross_entropy, xavier, Embedding, Linear, LstmStack, ParamStore, Tensor,
};
use eqa_core::oracle::{self, GoalSet};
use eqa_core::rng::DetRng;

pub const GRAD_TOL: f64 = 1e-6;
pub const FD_H: f64 = 1e-6;
/// Deep compositions accumulate more float roundoff in the two loss
/// evaluations; a slightly larger step keeps the cancellation error below
/// the truncation error without weakening the tolerance.
pub const FD_H_MODEL: f64 = 1e-5;

/// Tiny token tables so observation vectors stay short in numeric tests.
pub fn tiny_vocab() -> Vocabulary {
    Vocabulary::build(
        &["sofa".into(), "table".into()],
        &["red".into(), "blue".into()],
        &["kitchen".into(), "bedroom".into()],
    )
}

pub fn tiny_env_config() -> gen::EnvConfig {
    gen::EnvConfig { width: 11, height: 11, n_rooms: 2, n_objects: 3, window: ObsWindow { depth: 3, width: 3 } }
}

fn rand_vec(n: usize, rng: &mut DetRng) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

/// dL/dW for `L = w . y`, `y = linear(x)`, against finite differences.
pub fn check_linear(seed: u64) -> f64 {
    let mut rng = DetRng::new(seed);
    let mut store = ParamStore::new();
    let lin = Linear::init(&mut store, "lin", 4, 3, &mut rng);
    let x = rand_vec(4, &mut rng);
    let w_out = rand_vec(3, &mut rng);
    let loss = {
        let x = x.clone();
        let w_out = w_out.clone();
        move |s: &ParamStore| -> f64 { lin.forward(s, &x).iter().zip(&w_out).map(|(a, b)| a * b).sum() }
    };
    store.zero_grads();
    lin.backward(&mut store, &x, &w_out, None);
    grad_check(&mut store, loss, FD_H)
}

pub fn check_embedding(seed: u64) -> f64 {
    let mut rng = DetRng::new(seed);
    let mut store = ParamStore::new();
    let emb = Embedding::init(&mut store, "emb", 5, 8, &mut rng);
    let picks = [1usize, 3, 1];
    let w_out = rand_vec(8, &mut rng);
    let loss = {
        let w_out = w_out.clone();
        move |s: &ParamStore| -> f64 {
            picks
                .iter()
                .map(|&i| emb.lookup(s, i).iter().zip(&w_out).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        }
    };
    store.zero_grads();
    for &i in &picks {
        emb.backward(&mut store, i, &w_out);
    }
    grad_check(&mut store, loss, FD_H)
}

/// Single LSTM cell step (2-layer stack, one step).
pub fn check_lstm_cell(seed: u64) -> f64 {
    check_lstm_seq_len(seed, 1)
}

/// Full BPTT over a length-5 sequence.
pub fn check_lstm_bptt(seed: u64) -> f64 {
    check_lstm_seq_len(seed, 5)
}

fn check_lstm_seq_len(seed: u64, len: usize) -> f64 {
    let mut rng = DetRng::new(seed);
    let mut store = ParamStore::new();
    let stack = LstmStack::init(&mut store, "lstm", 6, 8, 2, &mut rng);
    let xs: Vec<Vec<f64>> = (0..len).map(|_| rand_vec(6, &mut rng)).collect();
    let w_out: Vec<Vec<f64>> = (0..len).map(|_| rand_vec(8, &mut rng)).collect();
    let loss = {
        let xs = xs.clone();
        let w_out = w_out.clone();
        let stack = stack.clone();
        move |s: &ParamStore| -> f64 {
            let (tops, _) = stack.forward_seq(s, &xs);
            tops.iter()
                .zip(&w_out)
                .map(|(h, w)| h.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        }
    };
    store.zero_grads();
    let (_, trace) = stack.forward_seq(&store, &xs);
    stack.backward_seq(&mut store, &trace, &w_out);
    grad_check(&mut store, loss, FD_H)
}

/// Softmax cross-entropy on raw logits held as a parameter tensor.
pub fn check_cross_entropy(seed: u64) -> f64 {
    let mut rng = DetRng::new(seed);
    let mut store = ParamStore::new();
    let logits = store.add("logits", Tensor::from_vec(&[6], rand_vec(6, &mut rng)));
    let label = (seed % 6) as usize;
    let loss = move |s: &ParamStore| -> f64 { softmax_cross_entropy(s.value(logits).data(), label).0 };
    store.zero_grads();
    let g = softmax_cross_entropy(store.value(logits).data(), label).1;
    store.grad_mut(logits).data_mut().copy_from_slice(&g);
    grad_check(&mut store, loss, FD_H)
}

/// Cosine dissimilarity, gradient w.r.t. the first argument only.
pub fn check_cosine(seed: u64) -> f64 {
    let mut rng = DetRng::new(seed);
    let mut store = ParamStore::new();
    let a = store.add("a", Tensor::from_vec(&[7], rand_vec(7, &mut rng)));
    let b = rand_vec(7, &mut rng);
    let loss = {
        let b = b.clone();
        move |s: &ParamStore| -> f64 { cosine_loss(s.value(a).data(), &b).0 }
    };
    store.zero_grads();
    let g = cosine_loss(store.value(a).data(), &b).1;
    store.grad_mut(a).data_mut().copy_from_slice(&g);
    grad_check(&mut store, loss, FD_H)
}

/// Scaled dot-product attention over five frames plus the answer head,
/// checked through the full QA backward pass (frame encoder, attention,
/// question encoder, embeddings).
pub fn check_attention(seed: u64) -> f64 {
    use eqa_core::qa::{QaConfig, QaModel, N_FRAMES};
    let mut rng = DetRng::new(seed);
    let words: Vec<String> = ["what", "color", "is", "?"].map(String::from).to_vec();
    let answers: Vec<String> = ["red", "blue", "green"].map(String::from).to_vec();
    let obs_dim = 10;
    let mut model = QaModel::new(
        QaConfig { words: words.clone(), answers, obs_dim, word_dim: 6, q_hidden: 6, frame_embed: 6, n_layers: 2 },
        seed,
    );
    // spread the parameters a bit so attention weights are not uniform
    for r in model.store.refs() {
        let noise = xavier(1, model.store.value(r).numel().max(1), &mut rng);
        for (v, n) in model.store.value_mut(r).data_mut().iter_mut().zip(noise.data()) {
            *v += 0.3 * n;
        }
    }
    let frames: Vec<Vec<f64>> = (0..N_FRAMES).map(|_| rand_vec(obs_dim, &mut rng)).collect();
    let tokens: Vec<String> = ["what", "color", "is", "?"].map(String::from).to_vec();
    let label = (seed % 3) as usize;
    let trace = model.answer_traced(&frames, &tokens).unwrap();
    model.store.zero_grads();
    model.qa_backward(&trace, label, 1.0);
    let loss = {
        let frames = frames.clone();
        let tokens = tokens.clone();
        let probe = model.clone();
        move |s: &ParamStore| -> f64 {
            let mut m = probe.clone();
            m.store = s.clone();
            m.answer_traced(&frames, &tokens).unwrap().cross_entropy(label)
        }
    };
    grad_check(&mut model.store, loss, FD_H_MODEL)
}

/// Exhaustive optimality certificate: A* length equals BFS length for every
/// `(start state, object)` pair of the environment.
pub fn assert_astar_matches_bfs_everywhere(env: &GridEnvironment) -> usize {
    let mut checked = 0;
    for obj in &env.objects {
        let goal: GoalSet = oracle::goal_set(env, obj.id).unwrap();
        for (x, y) in env.free_cells() {
            for h in Heading::ALL {
                let start = AgentState::new(x, y, h);
                let astar = oracle::shortest_action_path(env, start, &goal).unwrap();
                let bfs = oracle::bfs_shortest_len(env, start, &goal).unwrap();
                assert_eq!(
                    astar.len(),
                    bfs,
                    "suboptimal path in {} from {:?} to object {:?}",
                    env.env_id,
                    start,
                    obj.id
                );
                assert!(astar.replay_consistent(env));
                checked += 1;
            }
        }
    }
    checked
}
