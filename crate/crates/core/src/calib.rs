//! Calibration: place reserved marker objects in a test environment, generate
//! rhetorical color questions with shortest paths, and adapt a trained
//! navigation policy on them while a frozen copy of the pre-trained model
//! anchors its hidden states through a cosine distillation loss.
//!
//! The blended objective per teacher-forced step sequence is
//! `lambda * sum_i (1 - cos(h_student_i, h_teacher_i)) +
//!  (1 - lambda) * mean_i CE(logits_i, path action_i)`,
//! with `lambda = 0` reducing to plain fine-tuning. Only the navigation model
//! adapts; QA parameters are never touched.

use crate::gen::{Question, QuestionType, Vocabulary, MARKER_TYPES};
use crate::grid::GridEnvironment;
use crate::nav::NavModel;
use crate::nn::{cosine_loss, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
use crate::oracle::{self, ActionPath};
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("could not place {wanted} markers with spacing {min_distance} in {env_id} after {attempts} attempts")]
    Placement { env_id: String, wanted: usize, min_distance: usize, attempts: usize },
    #[error("environment {0} already contains markers")]
    AlreadyMarked(String),
    #[error("marker count {0} is outside the reserved marker vocabulary (1..=5)")]
    TooManyMarkers(usize),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    /// Number of distinct markers to place, 1..=5.
    pub n_markers: usize,
    /// Minimum pairwise geodesic distance between markers, in cells.
    pub min_distance: usize,
    /// Distillation weight in [0, 1].
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        // 4 cells = 2 m at the fixed 0.5 m/cell scale
        CalibrationConfig { n_markers: 5, min_distance: 4, lambda: 0.2, epochs: 40, lr: 1e-3, seed: 1 }
    }
}

const PLACEMENT_ATTEMPTS: usize = 100;

/// Place `n_markers` distinct marker types on free, unoccupied cells with the
/// pairwise geodesic spacing constraint, each painted a color drawn from the
/// color vocabulary. Returns a new environment; the input is untouched.
pub fn place_markers(
    env: &GridEnvironment,
    vocab: &Vocabulary,
    cfg: &CalibrationConfig,
    rng: &mut DetRng,
) -> Result<GridEnvironment, CalibError> {
    if env.objects.iter().any(|o| o.is_marker) {
        return Err(CalibError::AlreadyMarked(env.env_id.clone()));
    }
    if cfg.n_markers == 0 || cfg.n_markers > MARKER_TYPES.len() {
        return Err(CalibError::TooManyMarkers(cfg.n_markers));
    }
    let marker_picks = rng.sample_indices(MARKER_TYPES.len(), cfg.n_markers);
    let candidates: Vec<(usize, usize)> = env
        .free_cells()
        .into_iter()
        .filter(|&(x, y)| env.cell(x, y).occupant.is_none())
        .collect();

    for _ in 0..PLACEMENT_ATTEMPTS {
        let mut pool = candidates.clone();
        rng.shuffle(&mut pool);
        let mut placed: Vec<(usize, usize)> = Vec::with_capacity(cfg.n_markers);
        for &pos in &pool {
            let ok = placed.iter().all(|&p| {
                env.geodesic_distance(p, pos).map(|d| d >= cfg.min_distance).unwrap_or(false)
            });
            if ok {
                placed.push(pos);
                if placed.len() == cfg.n_markers {
                    break;
                }
            }
        }
        if placed.len() < cfg.n_markers {
            continue;
        }
        let mut out = env.clone();
        for (slot, &pos) in placed.iter().enumerate() {
            let marker = MARKER_TYPES[marker_picks[slot]];
            let type_idx = vocab.marker_type_idx(marker).expect("marker type missing from obs space");
            let color_idx = rng.below(vocab.colors.len());
            out.place_object(type_idx, color_idx, pos, true);
        }
        return Ok(out);
    }
    Err(CalibError::Placement {
        env_id: env.env_id.clone(),
        wanted: cfg.n_markers,
        min_distance: cfg.min_distance,
        attempts: PLACEMENT_ATTEMPTS,
    })
}

fn marker_question_tokens(marker: &str) -> Vec<String> {
    ["what", "is", "the", "color", "of", "the", marker, "?"].map(String::from).to_vec()
}

/// One rhetorical color question per placed marker, paired with a shortest
/// action path from a random spawn into the marker's goal set.
pub fn marker_questions(
    env: &GridEnvironment,
    rng: &mut DetRng,
) -> Result<Vec<(Question, ActionPath)>, CalibError> {
    let mut out = Vec::new();
    for obj in env.objects.iter().filter(|o| o.is_marker) {
        let marker = env.type_token(obj).to_string();
        let color = env.color_token(obj).to_string();
        let goal = oracle::goal_set(env, obj.id)?;
        let spawn = oracle::random_state(env, rng);
        let path = oracle::shortest_action_path(env, spawn, &goal)?;
        out.push((
            Question {
                qid: format!("{}:marker-{}", env.env_id, marker),
                tokens: marker_question_tokens(&marker),
                qtype: QuestionType::Color,
                target_object_id: obj.id,
                answer_token: color,
                env_id: env.env_id.clone(),
            },
            path,
        ));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibCurvePoint {
    pub epoch: usize,
    pub policy_loss: f64,
    pub distill_loss: f64,
    pub accuracy: f64,
}

/// Adapt a copy of `pretrained` on marker episodes with the blended
/// distillation objective. The pre-trained model itself is held fixed and
/// serves as the hidden-state teacher whenever `lambda > 0`. Stops early once
/// the teacher-forced accuracy on the marker paths plateaus.
pub fn calibrate_distill(
    pretrained: &NavModel,
    env: &GridEnvironment,
    data: &[(Question, ActionPath)],
    cfg: &CalibrationConfig,
) -> (NavModel, Vec<CalibCurvePoint>) {
    let mut student = pretrained.clone();
    if cfg.epochs == 0 || data.is_empty() {
        return (student, Vec::new());
    }
    // adaptation is a new training phase: stale training momentum must not
    // move parameters that receive no gradient here
    student.store.reset_optimizer();
    let lambda = cfg.lambda;
    let use_teacher = lambda > 0.0;
    let mut shuffle_rng = DetRng::new(cfg.seed).derive("calib-shuffle");
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve: Vec<CalibCurvePoint> = Vec::new();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_loss = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut policy_loss = 0.0;
        let mut distill_loss = 0.0;
        let mut acc = 0.0;
        for &i in &order {
            let (q, path) = &data[i];
            let trace = student
                .teacher_forced(env, &q.tokens, path)
                .expect("marker episode failed the forward pass");
            policy_loss += trace.loss;
            acc += trace.accuracy;
            let extra = if use_teacher {
                let teacher_trace = pretrained
                    .teacher_forced(env, &q.tokens, path)
                    .expect("teacher forward failed");
                let mut dh = Vec::with_capacity(trace.core_tops.len());
                for (hs, ht) in trace.core_tops.iter().zip(&teacher_trace.core_tops) {
                    let (l, mut g) = cosine_loss(hs, ht);
                    distill_loss += l;
                    for v in &mut g {
                        *v *= lambda;
                    }
                    dh.push(g);
                }
                Some(dh)
            } else {
                None
            };
            student.imitation_backward(&trace, 1.0 - lambda, extra.as_deref());
            student.store.adam_step(cfg.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        }
        let acc = acc / data.len() as f64;
        curve.push(CalibCurvePoint {
            epoch,
            policy_loss: policy_loss / data.len() as f64,
            distill_loss,
            accuracy: acc,
        });
        // the accuracy plateau: once the marker paths are reproduced the
        // supervision is exhausted and further epochs only overfit
        if acc >= 0.999 {
            break;
        }
        let epoch_loss = policy_loss / data.len() as f64;
        let improved_acc = acc > best_acc + 1e-9;
        let improved_loss = epoch_loss < best_loss * (1.0 - 1e-3);
        if improved_acc {
            best_acc = acc;
        }
        if epoch_loss < best_loss {
            best_loss = epoch_loss;
        }
        if improved_acc || improved_loss {
            stale = 0;
        } else {
            stale += 1;
            if stale >= 5 {
                break;
            }
        }
    }
    (student, curve)
}

/// Policy loss only: the same adaptation loop with `lambda` forced to zero
/// (no teacher pass).
pub fn calibrate_finetune(
    pretrained: &NavModel,
    env: &GridEnvironment,
    data: &[(Question, ActionPath)],
    cfg: &CalibrationConfig,
) -> (NavModel, Vec<CalibCurvePoint>) {
    let cfg = CalibrationConfig { lambda: 0.0, ..cfg.clone() };
    calibrate_distill(pretrained, env, data, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate_environment, EnvConfig};
    use crate::grid::SceneObject;

    fn setup(seed: u64) -> (GridEnvironment, Vocabulary) {
        let vocab = Vocabulary::default_tokens();
        let cfg = EnvConfig::default();
        (generate_environment(seed, &cfg, &vocab).unwrap(), vocab)
    }

    #[test]
    fn markers_respect_spacing_and_vocabulary() {
        let (env, vocab) = setup(3);
        let cfg = CalibrationConfig::default();
        let mut rng = DetRng::new(5);
        let marked = place_markers(&env, &vocab, &cfg, &mut rng).unwrap();
        let markers: Vec<&SceneObject> = marked.objects.iter().filter(|o| o.is_marker).collect();
        assert_eq!(markers.len(), 5);
        for (i, a) in markers.iter().enumerate() {
            assert!(a.type_idx >= vocab.object_types.len(), "marker type overlaps dataset types");
            for b in markers.iter().skip(i + 1) {
                assert_ne!(a.type_idx, b.type_idx, "duplicate marker type");
                let d = marked.geodesic_distance(a.pos, b.pos).unwrap();
                assert!(d >= cfg.min_distance, "spacing violated: {d}");
            }
        }
        marked.check_invariants().unwrap();
    }

    #[test]
    fn single_marker_trivially_satisfies_spacing() {
        let (env, vocab) = setup(4);
        let cfg = CalibrationConfig { n_markers: 1, ..Default::default() };
        let mut rng = DetRng::new(6);
        let marked = place_markers(&env, &vocab, &cfg, &mut rng).unwrap();
        assert_eq!(marked.objects.iter().filter(|o| o.is_marker).count(), 1);
    }

    #[test]
    fn tiny_env_cannot_host_five_markers() {
        let vocab = Vocabulary::default_tokens();
        let cfg_env = EnvConfig { width: 7, height: 7, n_rooms: 1, n_objects: 1, window: Default::default() };
        let env = generate_environment(9, &cfg_env, &vocab).unwrap();
        let cfg = CalibrationConfig { n_markers: 5, min_distance: 6, ..Default::default() };
        let mut rng = DetRng::new(2);
        assert!(matches!(
            place_markers(&env, &vocab, &cfg, &mut rng),
            Err(CalibError::Placement { .. })
        ));
    }

    #[test]
    fn marker_questions_carry_painted_colors_and_paths() {
        let (env, vocab) = setup(8);
        let cfg = CalibrationConfig::default();
        let mut rng = DetRng::new(7);
        let marked = place_markers(&env, &vocab, &cfg, &mut rng).unwrap();
        let data = marker_questions(&marked, &mut rng).unwrap();
        assert_eq!(data.len(), 5);
        for (q, path) in &data {
            let obj = marked.object(q.target_object_id).unwrap();
            assert!(obj.is_marker);
            assert_eq!(q.answer_token, marked.color_token(obj));
            assert!(path.replay_consistent(&marked));
            // the path ends with the marker in view
            assert!(marked.visible_objects(path.end).contains(&obj.id));
        }
    }

    #[test]
    fn zero_epochs_returns_pretrained_unchanged() {
        let (env, vocab) = setup(11);
        let model = NavModel::new(
            crate::nav::NavConfig::miniature(vocab.words.clone(), env.feature_dim()),
            1,
        );
        let cfg = CalibrationConfig { epochs: 0, ..Default::default() };
        let mut rng = DetRng::new(1);
        let marked = place_markers(&env, &vocab, &cfg, &mut rng).unwrap();
        let data = marker_questions(&marked, &mut rng).unwrap();
        let (adapted, curve) = calibrate_distill(&model, &marked, &data, &cfg);
        assert!(curve.is_empty());
        for i in 0..model.store.len() {
            assert_eq!(model.store.values[i].data(), adapted.store.values[i].data());
        }
    }

    #[test]
    fn distill_loss_is_zero_at_initialization() {
        let (env, vocab) = setup(12);
        let model = NavModel::new(
            crate::nav::NavConfig::miniature(vocab.words.clone(), env.feature_dim()),
            2,
        );
        let cfg = CalibrationConfig { epochs: 1, lambda: 0.5, ..Default::default() };
        let mut rng = DetRng::new(3);
        let marked = place_markers(&env, &vocab, &cfg, &mut rng).unwrap();
        let data = marker_questions(&marked, &mut rng).unwrap();
        let (_, curve) = calibrate_distill(&model, &marked, &data, &cfg);
        // the first episode of the first epoch runs student == teacher, but
        // later episodes in the epoch have already updated the student; check
        // the loss of the very first comparison instead by re-deriving it
        let (q, path) = &data[0];
        let s = model.teacher_forced(&marked, &q.tokens, path).unwrap();
        let t = model.teacher_forced(&marked, &q.tokens, path).unwrap();
        let total: f64 = s
            .core_tops
            .iter()
            .zip(&t.core_tops)
            .map(|(a, b)| cosine_loss(a, b).0)
            .sum();
        assert_eq!(total, 0.0);
        assert!(curve[0].distill_loss >= 0.0);
    }

    #[test]
    fn lambda_zero_matches_finetune_bitwise() {
        let (env, vocab) = setup(13);
        let model = NavModel::new(
            crate::nav::NavConfig::miniature(vocab.words.clone(), env.feature_dim()),
            4,
        );
        let cfg = CalibrationConfig { epochs: 3, lambda: 0.0, ..Default::default() };
        let mut rng = DetRng::new(14);
        let marked = place_markers(&env, &vocab, &cfg, &mut rng).unwrap();
        let data = marker_questions(&marked, &mut rng).unwrap();
        let (a, _) = calibrate_distill(&model, &marked, &data, &cfg);
        let (b, _) = calibrate_finetune(&model, &marked, &data, &cfg);
        for i in 0..a.store.len() {
            assert_eq!(a.store.values[i].data(), b.store.values[i].data());
        }
    }

    #[test]
    fn lambda_one_is_stationary_at_init() {
        let (env, vocab) = setup(15);
        let model = NavModel::new(
            crate::nav::NavConfig::miniature(vocab.words.clone(), env.feature_dim()),
            6,
        );
        let cfg = CalibrationConfig { epochs: 2, lambda: 1.0, ..Default::default() };
        let mut rng = DetRng::new(16);
        let marked = place_markers(&env, &vocab, &cfg, &mut rng).unwrap();
        let data = marker_questions(&marked, &mut rng).unwrap();

        // gradient norm at step 1 is exactly zero: CE weighted by (1-lambda)=0,
        // distillation gradient zero at bitwise-equal hidden states
        let mut probe = model.clone();
        let (q, path) = &data[0];
        let trace = probe.teacher_forced(&marked, &q.tokens, path).unwrap();
        let teacher = model.teacher_forced(&marked, &q.tokens, path).unwrap();
        let extra: Vec<Vec<f64>> = trace
            .core_tops
            .iter()
            .zip(&teacher.core_tops)
            .map(|(a, b)| cosine_loss(a, b).1)
            .collect();
        probe.imitation_backward(&trace, 0.0, Some(&extra));
        assert!(probe.store.grad_norm() < 1e-12);

        let (adapted, _) = calibrate_distill(&model, &marked, &data, &cfg);
        for i in 0..model.store.len() {
            assert_eq!(model.store.values[i].data(), adapted.store.values[i].data());
        }
    }

    #[test]
    fn lambda_one_ignores_stale_training_momentum() {
        // a pretrained model arrives with nonzero Adam state; adaptation must
        // reset it, or zero-gradient parameters would drift
        let (env, vocab) = setup(18);
        let mut model = NavModel::new(
            crate::nav::NavConfig::miniature(vocab.words.clone(), env.feature_dim()),
            7,
        );
        for r in model.store.refs() {
            let g: Vec<f64> = model.store.grad(r).data().iter().map(|_| 0.3).collect();
            model.store.grad_mut(r).data_mut().copy_from_slice(&g);
        }
        model.store.adam_step(1e-3, crate::nn::ADAM_BETA1, crate::nn::ADAM_BETA2, crate::nn::ADAM_EPS);
        let cfg = CalibrationConfig { epochs: 3, lambda: 1.0, ..Default::default() };
        let mut rng = DetRng::new(19);
        let marked = place_markers(&env, &vocab, &cfg, &mut rng).unwrap();
        let data = marker_questions(&marked, &mut rng).unwrap();
        let (adapted, _) = calibrate_distill(&model, &marked, &data, &cfg);
        for i in 0..model.store.len() {
            assert_eq!(model.store.values[i].data(), adapted.store.values[i].data());
        }
    }
}
