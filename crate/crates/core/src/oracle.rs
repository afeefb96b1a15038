//! Exact shortest action paths in `(x, y, heading)` space.
//!
//! A* with unit action costs over the three movement actions, an admissible
//! Manhattan-to-nearest-goal-position heuristic, and fixed tie-breaking
//! (neighbour order Forward < TurnLeft < TurnRight, FIFO among equal
//! f-scores) so the supervision it produces is reproducible. A plain
//! breadth-first search over the same state graph is kept alongside as an
//! independent optimality oracle.

use crate::grid::{Action, AgentState, GridEnvironment, Heading, ObjectId};
use crate::rng::DetRng;
use std::collections::{BinaryHeap, HashSet};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("object {0:?} does not exist in environment {1}")]
    NoSuchObject(ObjectId, String),
    #[error("goal set for object {0:?} in {1} is empty")]
    EmptyGoalSet(ObjectId, String),
    #[error("no goal state reachable from {0:?}")]
    Unreachable(AgentState),
    #[error("environment {env_id} admits no spawn {k} actions from the goal after {attempts} attempts")]
    EnvTooSmall { env_id: String, k: usize, attempts: usize },
}

/// All agent states from which a target object is visible.
#[derive(Clone, Debug)]
pub struct GoalSet {
    pub target: ObjectId,
    pub states: HashSet<AgentState>,
    /// Distinct positions of goal states, for the search heuristic.
    positions: Vec<(usize, usize)>,
}

impl GoalSet {
    pub fn contains(&self, s: &AgentState) -> bool {
        self.states.contains(s)
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Admissible lower bound on the action distance from `pos` to the goal:
    /// Manhattan distance to the nearest goal position (turns only add cost).
    pub fn heuristic(&self, pos: (usize, usize)) -> usize {
        self.positions
            .iter()
            .map(|&(gx, gy)| gx.abs_diff(pos.0) + gy.abs_diff(pos.1))
            .min()
            .unwrap_or(0)
    }
}

/// Replayable action sequence (movement actions only, no `Stop`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionPath {
    pub start: AgentState,
    pub actions: Vec<Action>,
    pub end: AgentState,
}

impl ActionPath {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// States visited, `start` first, `end` last.
    pub fn states(&self, env: &GridEnvironment) -> Vec<AgentState> {
        let mut out = Vec::with_capacity(self.actions.len() + 1);
        let mut s = self.start;
        out.push(s);
        for &a in &self.actions {
            s = env.step(s, a).expect("path replay left the free cells");
            out.push(s);
        }
        out
    }

    /// Replaying the actions from `start` must land on `end`.
    pub fn replay_consistent(&self, env: &GridEnvironment) -> bool {
        self.states(env).last() == Some(&self.end)
    }
}

/// Enumerate every valid state that sees the target.
pub fn goal_set(env: &GridEnvironment, target: ObjectId) -> Result<GoalSet, OracleError> {
    if env.object(target).is_none() {
        return Err(OracleError::NoSuchObject(target, env.env_id.clone()));
    }
    let mut states = HashSet::new();
    let mut positions = Vec::new();
    for (x, y) in env.free_cells() {
        let mut any = false;
        for h in Heading::ALL {
            let s = AgentState::new(x, y, h);
            if env.visible_objects(s).contains(&target) {
                states.insert(s);
                any = true;
            }
        }
        if any {
            positions.push((x, y));
        }
    }
    if states.is_empty() {
        return Err(OracleError::EmptyGoalSet(target, env.env_id.clone()));
    }
    Ok(GoalSet { target, states, positions })
}

fn state_index(env: &GridEnvironment, s: &AgentState) -> usize {
    (s.y * env.width() + s.x) * 4 + s.heading.index()
}

#[derive(PartialEq, Eq)]
struct OpenEntry {
    f: usize,
    seq: u64,
    state: AgentState,
}

// BinaryHeap is a max-heap; invert so the smallest f pops first and FIFO
// order breaks ties.
impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.f.cmp(&self.f).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimal-action path from `start` into the goal set.
pub fn shortest_action_path(
    env: &GridEnvironment,
    start: AgentState,
    goal: &GoalSet,
) -> Result<ActionPath, OracleError> {
    assert!(env.valid_state(start), "shortest_action_path: invalid start");
    assert!(!goal.is_empty(), "shortest_action_path: empty goal set");
    if goal.contains(&start) {
        return Ok(ActionPath { start, actions: vec![], end: start });
    }
    let n_states = env.width() * env.height() * 4;
    let mut g = vec![usize::MAX; n_states];
    let mut parent: Vec<Option<(usize, Action)>> = vec![None; n_states];
    let mut closed = vec![false; n_states];
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;

    let si = state_index(env, &start);
    g[si] = 0;
    open.push(OpenEntry { f: goal.heuristic(start.pos()), seq, state: start });

    while let Some(OpenEntry { state, .. }) = open.pop() {
        let idx = state_index(env, &state);
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if goal.contains(&state) {
            // walk parents back to the start
            let mut actions = Vec::new();
            let mut cur = idx;
            while let Some((prev, act)) = parent[cur] {
                actions.push(act);
                cur = prev;
            }
            actions.reverse();
            return Ok(ActionPath { start, actions, end: state });
        }
        let ng = g[idx] + 1;
        for act in Action::MOVES {
            let next = env.step(state, act).expect("search expanded an invalid state");
            if next == state {
                continue; // blocked forward: useless self-loop
            }
            let nidx = state_index(env, &next);
            if closed[nidx] || ng >= g[nidx] {
                continue;
            }
            g[nidx] = ng;
            parent[nidx] = Some((idx, act));
            seq += 1;
            open.push(OpenEntry { f: ng + goal.heuristic(next.pos()), seq, state: next });
        }
    }
    Err(OracleError::Unreachable(start))
}

/// Independent optimality oracle: plain BFS over the `(x, y, heading)` state
/// graph, returning the minimal action count into the goal set.
pub fn bfs_shortest_len(env: &GridEnvironment, start: AgentState, goal: &GoalSet) -> Option<usize> {
    if goal.contains(&start) {
        return Some(0);
    }
    let n_states = env.width() * env.height() * 4;
    let mut dist = vec![usize::MAX; n_states];
    dist[state_index(env, &start)] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(start);
    while let Some(state) = queue.pop_front() {
        let d = dist[state_index(env, &state)];
        for act in Action::MOVES {
            let next = env.step(state, act).ok()?;
            if next == state {
                continue;
            }
            let nidx = state_index(env, &next);
            if dist[nidx] == usize::MAX {
                dist[nidx] = d + 1;
                if goal.contains(&next) {
                    return Some(d + 1);
                }
                queue.push_back(next);
            }
        }
    }
    None
}

/// Uniformly sample a valid agent state.
pub fn random_state(env: &GridEnvironment, rng: &mut DetRng) -> AgentState {
    let free = env.free_cells();
    let (x, y) = *rng.choose(&free);
    AgentState::new(x, y, Heading::ALL[rng.below(4)])
}

const SPAWN_ATTEMPTS: usize = 300;

/// Sample a spawn state exactly `k` actions from the goal set of `target`:
/// draw random starts until one admits a shortest path of length >= `k`, then
/// take the state `k` actions before that path's end. The suffix of an
/// optimal path is optimal, so the returned state's own shortest path has
/// length exactly `k` (re-solved and asserted).
pub fn spawn_at(
    env: &GridEnvironment,
    target: ObjectId,
    k: usize,
    rng: &mut DetRng,
) -> Result<AgentState, OracleError> {
    let goal = goal_set(env, target)?;
    spawn_at_goal(env, &goal, k, rng)
}

/// As [`spawn_at`] with a precomputed goal set.
pub fn spawn_at_goal(
    env: &GridEnvironment,
    goal: &GoalSet,
    k: usize,
    rng: &mut DetRng,
) -> Result<AgentState, OracleError> {
    for _ in 0..SPAWN_ATTEMPTS {
        let start = random_state(env, rng);
        let path = shortest_action_path(env, start, goal)?;
        if path.len() < k {
            continue;
        }
        let states = path.states(env);
        let spawn = states[states.len() - 1 - k];
        let check = shortest_action_path(env, spawn, goal)?;
        assert_eq!(check.len(), k, "truncated spawn does not sit exactly {k} actions from the goal");
        return Ok(spawn);
    }
    Err(OracleError::EnvTooSmall { env_id: env.env_id.clone(), k, attempts: SPAWN_ATTEMPTS })
}
