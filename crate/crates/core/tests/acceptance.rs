//! Acceptance suite: one test per headline criterion, each printing a single
//! PASS/FAIL line (run with `-- --nocapture` to see them live).
//!
//! The experiment criteria share one trained fixture (dataset + end-to-end
//! models) built on first use; individual criteria then calibrate, sweep, and
//! evaluate on top of it.

mod common;

use common::*;
use eqa_core::calib::CalibrationConfig;
use eqa_core::eval::{self, EvalConfig, Setting};
use eqa_core::gen::{self, build_dataset, DatasetConfig, Dataset, EnvConfig, Split, Vocabulary};
use eqa_core::grid::{Action, AgentState, Cell, GridEnvironment, Heading, ObjectId, ObsWindow, Room, RoomId};
use eqa_core::nav::{NavConfig, NavModel};
use eqa_core::nn::{ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
use eqa_core::oracle;
use eqa_core::qa::{QaConfig, QaModel, N_FRAMES};
use eqa_core::rng::DetRng;
use eqa_core::train::{self, JointConfig};
use std::sync::OnceLock;
use std::time::Instant;

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!("[{criterion}] {}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{criterion} failed: {detail}");
}

struct Fixture {
    dataset: Dataset,
    nav: NavModel,
    qa: QaModel,
    train_secs: f64,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let t0 = Instant::now();
        let dataset = build_dataset(&DatasetConfig::default()).expect("dataset build failed");
        let (nav, qa, _) = train::joint_train(&dataset, &JointConfig::default());
        Fixture { dataset, nav, qa, train_secs: t0.elapsed().as_secs_f64() }
    })
}

const EVAL_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn eval_cfg() -> EvalConfig {
    EvalConfig::default()
}

static COMPARISON: OnceLock<eval::SettingsComparison> = OnceLock::new();

/// Standard vs calibration comparison over the shared fixture; computed once,
/// consumed by criteria 6 and 7.
fn comparison() -> &'static eval::SettingsComparison {
    COMPARISON.get_or_init(|| {
        let fx = fixture();
        eval::compare_settings(
            &fx.nav,
            &fx.qa,
            &fx.dataset,
            Split::Test,
            &CalibrationConfig::default(),
            &eval_cfg(),
            &EVAL_SEEDS,
        )
        .expect("comparison failed")
    })
}

/// Criterion 1: every differentiable op passes central finite-difference
/// checks with max relative error < 1e-6 over >= 20 seeds each, in under a
/// minute.
#[test]
fn criterion_1_gradient_correctness() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checks = 0usize;
    for seed in 0..20u64 {
        for err in [
            check_linear(seed),
            check_embedding(seed),
            check_lstm_cell(seed),
            check_lstm_bptt(seed),
            check_attention(seed),
            check_cross_entropy(seed),
            check_cosine(seed),
        ] {
            worst = worst.max(err);
            checks += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = worst < GRAD_TOL && secs < 60.0;
    verdict(
        "criterion 1: gradient correctness",
        pass,
        &format!("max rel err {worst:.2e} over {checks} checks in {secs:.1} s (tol {GRAD_TOL:.0e}, budget 60 s)"),
    );
}

/// Criterion 2: A* path length equals exhaustive BFS on 200 random 11x11
/// environments for every (start, target) pair, within 2 minutes.
#[test]
fn criterion_2_path_optimality() {
    let t0 = Instant::now();
    let vocab = tiny_vocab();
    let cfg = gen::EnvConfig { width: 11, height: 11, n_rooms: 2, n_objects: 3, window: ObsWindow { depth: 3, width: 3 } };
    let mut pairs = 0usize;
    for seed in 0..200u64 {
        let env = gen::generate_environment(50_000 + seed, &cfg, &vocab).expect("generation failed");
        pairs += assert_astar_matches_bfs_everywhere(&env);
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = secs < 120.0;
    verdict(
        "criterion 2: path optimality",
        pass,
        &format!("A* == BFS on all {pairs} (start, target) pairs across 200 environments in {secs:.1} s (budget 120 s)"),
    );
}

/// Criterion 3: dynamics and observation properties, exhaustive over all
/// states of 20 small environments: turn inverse, four-turn identity, replay
/// consistency, occlusion/visibility agreement.
#[test]
fn criterion_3_dynamics_and_observation() {
    let t0 = Instant::now();
    let vocab = tiny_vocab();
    let cfg = tiny_env_config();
    let mut states_checked = 0usize;
    for seed in 0..20u64 {
        let env = gen::generate_environment(60_000 + seed, &cfg, &vocab).expect("generation failed");
        for (x, y) in env.free_cells() {
            for h in Heading::ALL {
                let s = AgentState::new(x, y, h);
                // turn inverse and four-turn identity
                assert_eq!(env.step(env.step(s, Action::TurnLeft).unwrap(), Action::TurnRight).unwrap(), s);
                let mut four = s;
                for _ in 0..4 {
                    four = env.step(four, Action::TurnRight).unwrap();
                }
                assert_eq!(four, s);
                // observation agrees with the visible-object set
                let obs = env.observe(s);
                let from_cells: std::collections::BTreeSet<ObjectId> =
                    obs.cells.iter().filter_map(|c| c.object.map(|(id, _, _)| id)).collect();
                let listed: std::collections::BTreeSet<ObjectId> = env.visible_objects(s).into_iter().collect();
                assert_eq!(from_cells, listed);
                states_checked += 1;
            }
        }
        // replay consistency of shortest paths from a sample of starts
        let goal = oracle::goal_set(&env, env.objects[0].id).unwrap();
        for (i, (x, y)) in env.free_cells().into_iter().enumerate() {
            if i % 7 != 0 {
                continue;
            }
            let path = oracle::shortest_action_path(&env, AgentState::new(x, y, Heading::South), &goal).unwrap();
            assert!(path.replay_consistent(&env));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        "criterion 3: dynamics/observation properties",
        true,
        &format!("exhaustive over {states_checked} states of 20 environments in {secs:.1} s"),
    );
}

/// Criterion 4: capacity sanity. Imitation memorizes 20 episodes of one
/// environment to >= 99% teacher-forced accuracy; QA memorizes 30 questions
/// to >= 95%; each under 5 minutes.
#[test]
fn criterion_4_capacity() {
    // navigation: 20 (question, spawn) episodes in one default-size house
    let t_nav = Instant::now();
    let vocab = Vocabulary::default_tokens();
    let env = gen::generate_environment(4242, &EnvConfig::default(), &vocab).expect("generation failed");
    let questions = gen::generate_questions(&env, &vocab);
    assert!(!questions.is_empty());
    let mut rng = DetRng::new(7).derive("capacity-spawns");
    let mut episodes = Vec::new();
    for i in 0..20 {
        let q = &questions[i % questions.len()];
        let goal = oracle::goal_set(&env, q.target_object_id).unwrap();
        let spawn = oracle::random_state(&env, &mut rng);
        let path = oracle::shortest_action_path(&env, spawn, &goal).unwrap();
        episodes.push((q.clone(), path));
    }
    let mut nav = NavModel::new(NavConfig::standard(vocab.words.clone(), env.feature_dim()), 3);
    let mut nav_acc = 0.0;
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    let mut shuffle = DetRng::new(3).derive("capacity-shuffle");
    for _epoch in 0..60 {
        shuffle.shuffle(&mut order);
        let mut acc = 0.0;
        for &i in &order {
            let (q, path) = &episodes[i];
            let trace = nav.teacher_forced(&env, &q.tokens, path).unwrap();
            acc += trace.accuracy;
            nav.imitation_backward(&trace, 1.0, None);
            nav.store.adam_step(2e-3, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        }
        nav_acc = acc / episodes.len() as f64;
        if nav_acc >= 0.995 {
            break;
        }
    }
    let nav_secs = t_nav.elapsed().as_secs_f64();

    // QA: 30 questions in one hand-built house with 15 distinct object types
    let t_qa = Instant::now();
    let (qa_env, qa_vocab) = many_types_env();
    let qa_questions = gen::generate_questions(&qa_env, &qa_vocab);
    assert!(qa_questions.len() >= 30, "expected >= 30 questions, got {}", qa_questions.len());
    let qa_questions = &qa_questions[..30];
    let mut rng = DetRng::new(11).derive("qa-capacity");
    let mut items = Vec::new();
    for q in qa_questions {
        let goal = oracle::goal_set(&qa_env, q.target_object_id).unwrap();
        let spawn = oracle::random_state(&qa_env, &mut rng);
        let path = oracle::shortest_action_path(&qa_env, spawn, &goal).unwrap();
        let states = path.states(&qa_env);
        let mut frames: Vec<Vec<f64>> = Vec::with_capacity(N_FRAMES);
        for _ in states.len()..N_FRAMES {
            frames.push(qa_env.obs_features(states[0]));
        }
        for s in states.iter().skip(states.len().saturating_sub(N_FRAMES)) {
            frames.push(qa_env.obs_features(*s));
        }
        items.push((q.clone(), frames));
    }
    let mut qa = QaModel::new(
        QaConfig::standard(qa_vocab.words.clone(), qa_vocab.answers.clone(), qa_env.feature_dim()),
        5,
    );
    let mut qa_acc = 0.0;
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut shuffle = DetRng::new(5).derive("qa-capacity-shuffle");
    for _epoch in 0..80 {
        shuffle.shuffle(&mut order);
        let mut hits = 0usize;
        for &i in &order {
            let (q, frames) = &items[i];
            let label = qa.answer_index(&q.answer_token).unwrap();
            let trace = qa.answer_traced(frames, &q.tokens).unwrap();
            if trace.predicted() == label {
                hits += 1;
            }
            qa.qa_backward(&trace, label, 1.0);
            qa.store.adam_step(2e-3, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        }
        qa_acc = hits as f64 / items.len() as f64;
        if qa_acc >= 0.97 {
            break;
        }
    }
    let qa_secs = t_qa.elapsed().as_secs_f64();

    let pass = nav_acc >= 0.99 && qa_acc >= 0.95 && nav_secs < 300.0 && qa_secs < 300.0;
    verdict(
        "criterion 4: capacity sanity",
        pass,
        &format!(
            "navigation {:.1}% on 20 episodes in {nav_secs:.0} s (need >= 99%); qa {:.1}% on 30 questions in {qa_secs:.0} s (need >= 95%)",
            nav_acc * 100.0,
            qa_acc * 100.0
        ),
    );
}

/// Open-plan house with 15 distinct-type objects: 30 unique-referent questions.
fn many_types_env() -> (GridEnvironment, Vocabulary) {
    let types: Vec<String> = (0..15).map(|i| format!("thing{i:02}")).collect();
    let colors: Vec<String> = ["red", "blue", "green", "yellow", "white", "black", "brown", "purple"]
        .map(String::from)
        .to_vec();
    let rooms: Vec<String> = ["kitchen", "bedroom"].map(String::from).to_vec();
    let vocab = Vocabulary::build(&types, &colors, &rooms);
    let (w, h) = (19usize, 19usize);
    let mut cells = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            let mut c = if border { Cell::wall() } else { Cell::free() };
            if !border {
                c.room_id = Some(RoomId(if x < w / 2 { 0 } else { 1 }));
            }
            cells.push(c);
        }
    }
    let mut env = GridEnvironment::new(
        "capacity-env".into(),
        0,
        w,
        h,
        cells,
        vec![],
        vec![
            Room { id: RoomId(0), label: "kitchen".into() },
            Room { id: RoomId(1), label: "bedroom".into() },
        ],
        ObsWindow::default(),
        vocab.obs_space(),
    );
    let mut rng = DetRng::new(99);
    let mut free: Vec<(usize, usize)> = env.free_cells();
    rng.shuffle(&mut free);
    for (i, &pos) in free.iter().take(15).enumerate() {
        env.place_object(i, rng.below(8), pos, false);
    }
    env.check_invariants().unwrap();
    (env, vocab)
}

/// Criterion 5: the blindfold control scores exactly zero navigation progress
/// at every tier while answering above uniform chance.
#[test]
fn criterion_5_blindfold_control() {
    let fx = fixture();
    let (bf, _) = train::train_blindfold(&fx.dataset, &train::QaTrainConfig::default());
    let report = eval::evaluate_blindfold(&bf, &fx.dataset, Split::Test, &eval_cfg(), 1);
    let zero_everywhere = report.records.iter().all(|r| r.progress_cells == 0)
        && report.summaries.iter().all(|s| s.mean_progress_cells == 0.0);
    let chance = 1.0 / fx.dataset.vocab.answers.len() as f64;
    let acc = report.overall_qa_accuracy();
    let pass = zero_everywhere && acc > chance;
    verdict(
        "criterion 5: blindfold control",
        pass,
        &format!(
            "progress exactly 0 at every tier: {zero_everywhere}; qa accuracy {:.1}% vs uniform chance {:.1}%",
            acc * 100.0,
            chance * 100.0
        ),
    );
}

/// Criterion 6: calibration gain. The distill-calibrated agent is compared to
/// the standard setting at the medium and long tiers over 5 seeds; the pass
/// gate is a positive seed-averaged difference at the long tier, with the
/// medium tier required not to regress beyond one seed-stddev (its reference
/// gain is noise-level). Runs inside the pipeline budget.
#[test]
fn criterion_6_calibration_gain() {
    let t0 = Instant::now();
    let fx = fixture();
    let cmp = comparison();
    let std_row = cmp.row(Setting::Standard);
    let distill = cmp.row(Setting::CalibrationDistill);
    let medium = 1usize; // tier index for 20
    let long = 2usize; // tier index for 30
    let med_gain = distill.progress[medium].mean - std_row.progress[medium].mean;
    let long_gain = distill.progress[long].mean - std_row.progress[long].mean;
    let med_ok = med_gain > -distill.progress[medium].stddev.max(std_row.progress[medium].stddev);
    let secs = fx.train_secs + t0.elapsed().as_secs_f64();
    let pass = long_gain > 0.0 && med_ok && secs < 3600.0;
    verdict(
        "criterion 6: calibration gain",
        pass,
        &format!(
            "long tier {:-.3} -> {:-.3} (gain {long_gain:+.3}, must be positive); medium tier {:-.3} -> {:-.3} (gain {med_gain:+.3}, within one seed-stddev: {med_ok}); pipeline {secs:.0} s (budget 3600 s)",
            std_row.progress[long].mean,
            distill.progress[long].mean,
            std_row.progress[medium].mean,
            distill.progress[medium].mean
        ),
    );
}

/// Criterion 7: distillation versus fine-tuning at the long tier; soft
/// criterion with a 5%-of-initial-distance allowance.
#[test]
fn criterion_7_distill_vs_finetune() {
    let fx = fixture();
    let cmp = comparison();
    let long_tier = *eval_cfg().tiers.last().unwrap();
    let standard = eval::evaluate(&fx.nav, &fx.qa, &fx.dataset, Split::Test, &eval_cfg(), EVAL_SEEDS[0]);
    let init_mean = {
        let rs: Vec<&eval::QuestionRecord> = standard.records.iter().filter(|r| r.tier == long_tier).collect();
        rs.iter().map(|r| r.initial_distance as f64).sum::<f64>() / rs.len().max(1) as f64
    };
    let di = cmp.row(Setting::CalibrationDistill).progress.last().unwrap().mean;
    let ft = cmp.row(Setting::CalibrationFinetune).progress.last().unwrap().mean;
    let allowance = 0.05 * init_mean;
    let pass = di >= ft - allowance;
    verdict(
        "criterion 7: distill vs finetune",
        pass,
        &format!(
            "long tier distill {di:.3} vs finetune {ft:.3} (allowance {allowance:.3} from mean initial distance {init_mean:.1})"
        ),
    );
}

fn mean_across_tiers(point: &eval::SweepPoint) -> f64 {
    point.progress.iter().map(|s| s.mean).sum::<f64>() / point.progress.len() as f64
}

/// Criterion 8: lambda sweep on validation environments. Some interior
/// lambda beats both endpoints on seed-averaged progress.
#[test]
fn criterion_8_lambda_sweep() {
    let fx = fixture();
    let lambdas = [0.0, 0.1, 0.2, 0.5, 0.8, 1.0];
    let curve = eval::sweep_lambda(
        &fx.nav,
        &fx.qa,
        &fx.dataset,
        Split::Val,
        &lambdas,
        &CalibrationConfig::default(),
        &eval_cfg(),
        &EVAL_SEEDS,
    )
    .expect("lambda sweep failed");
    let vals: Vec<f64> = curve.points.iter().map(mean_across_tiers).collect();
    let endpoint_lo = vals[0];
    let endpoint_hi = *vals.last().unwrap();
    let interior_best = vals[1..4].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pass = interior_best >= endpoint_lo && interior_best >= endpoint_hi;
    let detail = lambdas
        .iter()
        .zip(&vals)
        .map(|(l, v)| format!("lambda {l}: {v:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        "criterion 8: lambda sweep",
        pass,
        &format!("interior best {interior_best:.3} vs endpoints {endpoint_lo:.3} / {endpoint_hi:.3} ({detail})"),
    );
}

/// Criterion 9: marker-count sweep. Seed-averaged medium/long progress is
/// non-decreasing in marker count up to one seed-stddev per step.
#[test]
fn criterion_9_marker_sweep() {
    let fx = fixture();
    let counts = [1usize, 2, 3, 4, 5];
    let curve = eval::sweep_markers(
        &fx.nav,
        &fx.qa,
        &fx.dataset,
        Split::Test,
        &counts,
        &CalibrationConfig::default(),
        &eval_cfg(),
        &EVAL_SEEDS,
    )
    .expect("marker sweep failed");
    assert_eq!(curve.points.len(), counts.len());
    let mut pass = true;
    let mut detail = String::new();
    for tier_idx in [1usize, 2] {
        // medium and long tiers
        let tier = eval_cfg().tiers[tier_idx];
        let series: Vec<(f64, f64)> = curve
            .points
            .iter()
            .map(|p| (p.progress[tier_idx].mean, p.progress[tier_idx].stddev))
            .collect();
        for w in series.windows(2) {
            let (prev, prev_sd) = w[0];
            let (next, _) = w[1];
            if next < prev - prev_sd {
                pass = false;
            }
        }
        detail.push_str(&format!(
            "tier {tier}: [{}] ",
            series.iter().map(|(m, s)| format!("{m:.2}±{s:.2}")).collect::<Vec<_>>().join(", ")
        ));
    }
    verdict("criterion 9: marker sweep", pass, detail.trim());
}

/// Criterion 10: identical config and master seed reproduce every checkpoint
/// and report byte-identically across two full runs.
#[test]
fn criterion_10_determinism() {
    let t0 = Instant::now();
    let run = |dir: &std::path::Path| {
        let cfg = DatasetConfig {
            n_train_envs: 4,
            n_val_envs: 1,
            n_test_envs: 2,
            master_seed: 31,
            env: EnvConfig { width: 17, height: 17, n_rooms: 2, n_objects: 6, window: ObsWindow::default() },
        };
        let dataset = build_dataset(&cfg).unwrap();
        eqa_core::persist::save_dataset(&dataset, dir).unwrap();
        let jcfg = JointConfig { warmstart_epochs: 1, joint_epochs: 2, seed: 31, batch: 4, ..Default::default() };
        let (nav, qa, _) = train::joint_train(&dataset, &jcfg);
        eqa_core::ckpt::save_nav(&dir.join("nav.ckpt"), &nav).unwrap();
        eqa_core::ckpt::save_qa(&dir.join("qa.ckpt"), &qa).unwrap();
        let calib_cfg = CalibrationConfig { epochs: 3, min_distance: 3, n_markers: 3, ..Default::default() };
        let (envs, navs) = eval::calibrate_split(&nav, &dataset, Split::Test, &calib_cfg, true, 5).unwrap();
        for (env_id, adapted) in navs.iter().collect::<std::collections::BTreeMap<_, _>>() {
            eqa_core::ckpt::save_nav(&dir.join(format!("{env_id}.adapted.ckpt")), adapted).unwrap();
        }
        let ecfg = EvalConfig { tiers: vec![3, 6], step_cap: 60 };
        let report = eval::evaluate_per_env(&navs, &nav, &envs, &qa, &dataset, Split::Test, &ecfg, 5);
        let mut json = serde_json::to_string_pretty(&report).unwrap();
        json.push('\n');
        std::fs::write(dir.join("report.json"), json).unwrap();
    };
    let base = std::env::temp_dir().join(format!("eqa-acceptance-det-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    let (d1, d2) = (base.join("run1"), base.join("run2"));
    std::fs::create_dir_all(&d1).unwrap();
    std::fs::create_dir_all(&d2).unwrap();
    run(&d1);
    run(&d2);
    let collect = |dir: &std::path::Path| {
        let mut files = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    files.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
                }
            }
        }
        files.sort();
        files
    };
    let (f1, f2) = (collect(&d1), collect(&d2));
    let names_match = f1.iter().map(|(n, _)| n).eq(f2.iter().map(|(n, _)| n));
    let bytes_match = f1 == f2;
    let n_files = f1.len();
    let _ = std::fs::remove_dir_all(&base);
    let pass = names_match && bytes_match && n_files > 4;
    verdict(
        "criterion 10: determinism",
        pass,
        &format!(
            "two full runs produced {n_files} artifacts each, byte-identical: {bytes_match} ({:.0} s)",
            t0.elapsed().as_secs_f64()
        ),
    );
}
