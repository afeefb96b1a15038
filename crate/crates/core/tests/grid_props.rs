//! Dynamics and observation properties, exhaustive over small environments
//! plus randomized property tests.

mod common;

use common::{tiny_env_config, tiny_vocab};
use eqa_core::gen::{generate_environment, EnvConfig, Vocabulary};
use eqa_core::grid::{Action, AgentState, Heading, ObsCode};
use proptest::prelude::*;

fn all_states(env: &eqa_core::grid::GridEnvironment) -> Vec<AgentState> {
    env.free_cells()
        .into_iter()
        .flat_map(|(x, y)| Heading::ALL.map(|h| AgentState::new(x, y, h)))
        .collect()
}

/// Turn inverse, four-turn identity, purity, and stop identity, exhaustively
/// over every state of a batch of generated environments.
#[test]
fn turn_and_step_identities_exhaustive() {
    let vocab = tiny_vocab();
    for seed in 0..10u64 {
        let env = generate_environment(seed, &tiny_env_config(), &vocab).unwrap();
        for s in all_states(&env) {
            let left_right = env.step(env.step(s, Action::TurnLeft).unwrap(), Action::TurnRight).unwrap();
            assert_eq!(left_right, s);
            let mut four = s;
            for _ in 0..4 {
                four = env.step(four, Action::TurnRight).unwrap();
            }
            assert_eq!(four, s);
            assert_eq!(env.step(s, Action::Stop).unwrap(), s);
            // purity
            assert_eq!(env.step(s, Action::Forward).unwrap(), env.step(s, Action::Forward).unwrap());
        }
    }
}

/// `observe` and `visible_objects` agree: an object id is visible iff its
/// cell's observation code carries that object.
#[test]
fn observation_and_visibility_agree_exhaustive() {
    let vocab = tiny_vocab();
    for seed in 0..10u64 {
        let env = generate_environment(seed, &tiny_env_config(), &vocab).unwrap();
        for s in all_states(&env) {
            let obs = env.observe(s);
            let from_cells: std::collections::BTreeSet<_> =
                obs.cells.iter().filter_map(|c| c.object.map(|(id, _, _)| id)).collect();
            let listed: std::collections::BTreeSet<_> = env.visible_objects(s).into_iter().collect();
            assert_eq!(from_cells, listed);
            // exactly one terrain code per cell, and features are 0/1
            let feats = obs.features(env.space.types.len(), env.space.colors.len());
            assert_eq!(feats.len(), env.feature_dim());
            assert!(feats.iter().all(|&v| v == 0.0 || v == 1.0));
            let per_cell = 3 + env.space.types.len() + env.space.colors.len();
            for chunk in feats.chunks(per_cell) {
                assert_eq!(chunk[..3].iter().filter(|&&v| v == 1.0).count(), 1);
            }
        }
    }
}

/// Per-column occlusion oracle: re-derive the expected codes by an
/// independent ray scan and compare cell for cell.
#[test]
fn occlusion_matches_ray_scan_oracle() {
    let vocab = tiny_vocab();
    for seed in 0..6u64 {
        let cfg = EnvConfig { window: eqa_core::grid::ObsWindow { depth: 4, width: 5 }, ..tiny_env_config() };
        let env = generate_environment(seed, &cfg, &vocab).unwrap();
        for s in all_states(&env) {
            let obs = env.observe(s);
            let (fx, fy) = s.heading.forward();
            let (rx, ry) = s.heading.right().forward();
            for j in 0..5i64 {
                let off = j - 2;
                let mut blocked = false;
                for d in 0..4i64 {
                    let wx = s.x as i64 + d * fx + off * rx;
                    let wy = s.y as i64 + d * fy + off * ry;
                    let got = obs.cells[(d * 5 + j) as usize].code;
                    let expect = if blocked {
                        ObsCode::Unknown
                    } else if !env.in_bounds(wx, wy) || !env.is_free(wx as usize, wy as usize) {
                        blocked = true;
                        ObsCode::Wall
                    } else {
                        ObsCode::Free
                    };
                    assert_eq!(got, expect, "state {s:?} window ({d},{j})");
                }
            }
        }
    }
}

/// Geodesic distance is symmetric and satisfies the triangle inequality,
/// exhaustively on a small environment.
#[test]
fn geodesic_symmetry_and_triangle_exhaustive() {
    let vocab = tiny_vocab();
    let cfg = EnvConfig { width: 9, height: 9, n_rooms: 2, n_objects: 2, window: Default::default() };
    let env = generate_environment(2, &cfg, &vocab).unwrap();
    let free = env.free_cells();
    let d = |a: (usize, usize), b: (usize, usize)| env.geodesic_distance(a, b).unwrap();
    for &a in &free {
        for &b in &free {
            assert_eq!(d(a, b), d(b, a));
        }
    }
    for &a in &free {
        for &b in &free {
            for &c in &free {
                assert!(d(a, c) <= d(a, b) + d(b, c), "triangle violated at {a:?} {b:?} {c:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Generated environments satisfy the structural invariants for any seed.
    #[test]
    fn generated_envs_satisfy_invariants(seed in 0u64..10_000) {
        let vocab = Vocabulary::default_tokens();
        let cfg = EnvConfig { width: 15, height: 15, n_rooms: 3, n_objects: 6, window: Default::default() };
        let env = generate_environment(seed, &cfg, &vocab).unwrap();
        prop_assert!(env.check_invariants().is_ok());
    }

    /// A forward step never lands on a wall and moves at most one cell.
    #[test]
    fn forward_stays_on_free_cells(seed in 0u64..500, pick in 0usize..1000, h in 0usize..4) {
        let vocab = tiny_vocab();
        let env = generate_environment(seed, &tiny_env_config(), &vocab).unwrap();
        let free = env.free_cells();
        let (x, y) = free[pick % free.len()];
        let s = AgentState::new(x, y, Heading::ALL[h]);
        let s2 = env.step(s, Action::Forward).unwrap();
        prop_assert!(env.is_free(s2.x, s2.y));
        let manhattan = s2.x.abs_diff(s.x) + s2.y.abs_diff(s.y);
        prop_assert!(manhattan <= 1);
        prop_assert_eq!(s2.heading, s.heading);
    }
}
