//! Gridworld house environment: occupancy, rooms, objects, deterministic
//! agent dynamics, and egocentric partial observations.
//!
//! Coordinates are `(x, y)` with `x` growing east and `y` growing south, so
//! heading north decreases `y`. The environment is immutable after
//! construction; dynamics produce new [`AgentState`] values.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("state ({x}, {y}) is not a free cell")]
    NotFree { x: usize, y: usize },
    #[error("no free path between ({:?}) and ({:?})", .0, .1)]
    Unreachable((usize, usize), (usize, usize)),
}

/// Index of an object within its environment's object table.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct ObjectId(pub usize);

/// Index of a room within its environment's room table.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct RoomId(pub usize);

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    /// Unit step along this heading; north decreases y.
    pub fn forward(self) -> (i64, i64) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    pub fn right(self) -> Heading {
        match self {
            Heading::North => Heading::East,
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
        }
    }

    pub fn left(self) -> Heading {
        self.right().right().right()
    }

    pub fn index(self) -> usize {
        match self {
            Heading::North => 0,
            Heading::East => 1,
            Heading::South => 2,
            Heading::West => 3,
        }
    }

    pub fn from_index(i: usize) -> Heading {
        Heading::ALL[i % 4]
    }

    pub fn token(self) -> &'static str {
        match self {
            Heading::North => "N",
            Heading::East => "E",
            Heading::South => "S",
            Heading::West => "W",
        }
    }

    pub fn from_token(s: &str) -> Option<Heading> {
        Some(match s {
            "N" => Heading::North,
            "E" => Heading::East,
            "S" => Heading::South,
            "W" => Heading::West,
            _ => return None,
        })
    }
}

/// The four navigation actions. `Stop` ends an episode; the other three are
/// movement actions used in shortest paths.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Stop];
    /// Movement actions in the deterministic expansion order used by search.
    pub const MOVES: [Action; 3] = [Action::Forward, Action::TurnLeft, Action::TurnRight];

    pub fn index(self) -> usize {
        match self {
            Action::Forward => 0,
            Action::TurnLeft => 1,
            Action::TurnRight => 2,
            Action::Stop => 3,
        }
    }

    pub fn from_index(i: usize) -> Action {
        Action::ALL[i % 4]
    }

    pub fn token(self) -> &'static str {
        match self {
            Action::Forward => "F",
            Action::TurnLeft => "L",
            Action::TurnRight => "R",
            Action::Stop => "S",
        }
    }
}

/// Agent pose: position plus discrete heading.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct AgentState {
    pub x: usize,
    pub y: usize,
    pub heading: Heading,
}

impl AgentState {
    pub fn new(x: usize, y: usize, heading: Heading) -> Self {
        AgentState { x, y, heading }
    }

    pub fn pos(&self) -> (usize, usize) {
        (self.x, self.y)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Terrain {
    Wall,
    Free,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cell {
    pub terrain: Terrain,
    pub room_id: Option<RoomId>,
    pub occupant: Option<ObjectId>,
}

impl Cell {
    pub fn wall() -> Self {
        Cell { terrain: Terrain::Wall, room_id: None, occupant: None }
    }

    pub fn free() -> Self {
        Cell { terrain: Terrain::Free, room_id: None, occupant: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    /// Index into [`ObsSpace::types`].
    pub type_idx: usize,
    /// Index into [`ObsSpace::colors`].
    pub color_idx: usize,
    pub pos: (usize, usize),
    pub is_marker: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Room {
    pub id: RoomId,
    pub label: String,
}

/// Token tables backing the observation one-hots. Shared verbatim by every
/// environment of a dataset so feature layouts line up; `types` includes the
/// reserved marker types at the tail even though training environments never
/// contain them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsSpace {
    pub types: Vec<String>,
    pub colors: Vec<String>,
}

/// Size of the egocentric observation window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsWindow {
    /// Rows looking away from the agent; row 0 holds the agent's own cell.
    pub depth: usize,
    /// Lateral width; must be odd so the agent's column is centred.
    pub width: usize,
}

impl Default for ObsWindow {
    fn default() -> Self {
        ObsWindow { depth: 5, width: 5 }
    }
}

/// Per-cell observation code.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ObsCode {
    Wall,
    Free,
    /// Occluded or out of view.
    Unknown,
}

#[derive(Clone, Copy, Debug)]
pub struct ObsCell {
    pub code: ObsCode,
    /// `(object, type index, color index)` when a visible object sits here.
    pub object: Option<(ObjectId, usize, usize)>,
}

/// Egocentric window of per-cell codes, rotated so the agent's heading points
/// "up": index `d * width + j` is `d` cells ahead and `j - width/2` cells to
/// the agent's right.
#[derive(Clone, Debug)]
pub struct Observation {
    pub window: ObsWindow,
    pub cells: Vec<ObsCell>,
}

impl Observation {
    pub fn feature_len(window: ObsWindow, n_types: usize, n_colors: usize) -> usize {
        window.depth * window.width * (3 + n_types + n_colors)
    }

    /// Flattened 0/1 feature vector: per cell `[wall, free, unknown]` terrain
    /// one-hot, then type one-hot, then color one-hot.
    pub fn features(&self, n_types: usize, n_colors: usize) -> Vec<f64> {
        let per_cell = 3 + n_types + n_colors;
        let mut out = vec![0.0; self.cells.len() * per_cell];
        for (i, cell) in self.cells.iter().enumerate() {
            let base = i * per_cell;
            let code_slot = match cell.code {
                ObsCode::Wall => 0,
                ObsCode::Free => 1,
                ObsCode::Unknown => 2,
            };
            out[base + code_slot] = 1.0;
            if let Some((_, type_idx, color_idx)) = cell.object {
                out[base + 3 + type_idx] = 1.0;
                out[base + 3 + n_types + color_idx] = 1.0;
            }
        }
        out
    }
}

/// A house: static grid, rooms, objects, and the observation configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridEnvironment {
    pub env_id: String,
    pub seed: u64,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    pub objects: Vec<SceneObject>,
    pub rooms: Vec<Room>,
    pub window: ObsWindow,
    pub space: ObsSpace,
}

impl GridEnvironment {
    pub fn new(
        env_id: String,
        seed: u64,
        width: usize,
        height: usize,
        cells: Vec<Cell>,
        objects: Vec<SceneObject>,
        rooms: Vec<Room>,
        window: ObsWindow,
        space: ObsSpace,
    ) -> Self {
        assert_eq!(cells.len(), width * height, "cell count mismatch");
        assert!(window.width % 2 == 1, "observation width must be odd");
        GridEnvironment { env_id, seed, width, height, cells, objects, rooms, window, space }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell(&self, x: usize, y: usize) -> &Cell {
        &self.cells[y * self.width + x]
    }

    pub(crate) fn cell_mut(&mut self, x: usize, y: usize) -> &mut Cell {
        &mut self.cells[y * self.width + x]
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn is_free(&self, x: usize, y: usize) -> bool {
        self.cell(x, y).terrain == Terrain::Free
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_free(x, y) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    pub fn valid_state(&self, s: AgentState) -> bool {
        s.x < self.width && s.y < self.height && self.is_free(s.x, s.y)
    }

    pub fn object(&self, id: ObjectId) -> Option<&SceneObject> {
        self.objects.get(id.0)
    }

    pub fn type_token(&self, obj: &SceneObject) -> &str {
        &self.space.types[obj.type_idx]
    }

    pub fn color_token(&self, obj: &SceneObject) -> &str {
        &self.space.colors[obj.color_idx]
    }

    /// Room label of the cell an object sits on, if that cell is inside a room.
    pub fn room_label_at(&self, pos: (usize, usize)) -> Option<&str> {
        let rid = self.cell(pos.0, pos.1).room_id?;
        Some(self.rooms[rid.0].label.as_str())
    }

    pub fn feature_dim(&self) -> usize {
        Observation::feature_len(self.window, self.space.types.len(), self.space.colors.len())
    }

    /// Add an object on a free, unoccupied cell and wire up the occupant
    /// pointer. Panics when the cell cannot host it.
    pub fn place_object(&mut self, type_idx: usize, color_idx: usize, pos: (usize, usize), is_marker: bool) -> ObjectId {
        assert!(self.is_free(pos.0, pos.1), "object placed on a wall at {pos:?}");
        assert!(self.cell(pos.0, pos.1).occupant.is_none(), "cell {pos:?} already occupied");
        assert!(type_idx < self.space.types.len() && color_idx < self.space.colors.len());
        let id = ObjectId(self.objects.len());
        self.cell_mut(pos.0, pos.1).occupant = Some(id);
        self.objects.push(SceneObject { id, type_idx, color_idx, pos, is_marker });
        id
    }

    /// One deterministic dynamics step. Forward into a wall (or off the map)
    /// is a silent no-op; `Stop` leaves the state unchanged and the caller
    /// ends the episode.
    pub fn step(&self, state: AgentState, action: Action) -> Result<AgentState, GridError> {
        if !self.valid_state(state) {
            return Err(GridError::NotFree { x: state.x, y: state.y });
        }
        Ok(match action {
            Action::Forward => {
                let (dx, dy) = state.heading.forward();
                let nx = state.x as i64 + dx;
                let ny = state.y as i64 + dy;
                if self.in_bounds(nx, ny) && self.is_free(nx as usize, ny as usize) {
                    AgentState::new(nx as usize, ny as usize, state.heading)
                } else {
                    state
                }
            }
            Action::TurnLeft => AgentState::new(state.x, state.y, state.heading.left()),
            Action::TurnRight => AgentState::new(state.x, state.y, state.heading.right()),
            Action::Stop => state,
        })
    }

    /// Egocentric observation. Per window column (fixed lateral offset) cells
    /// are scanned from the agent outward; everything beyond the first wall is
    /// coded unknown. Cells outside the map count as walls.
    pub fn observe(&self, state: AgentState) -> Observation {
        assert!(self.valid_state(state), "observe: invalid agent state");
        let ObsWindow { depth, width } = self.window;
        let half = (width / 2) as i64;
        let (fx, fy) = state.heading.forward();
        let (rx, ry) = state.heading.right().forward();
        let mut cells = vec![ObsCell { code: ObsCode::Unknown, object: None }; depth * width];
        for j in 0..width {
            let off = j as i64 - half;
            let mut blocked = false;
            for d in 0..depth {
                let wx = state.x as i64 + d as i64 * fx + off * rx;
                let wy = state.y as i64 + d as i64 * fy + off * ry;
                let slot = &mut cells[d * width + j];
                if blocked {
                    // stays Unknown
                    continue;
                }
                if !self.in_bounds(wx, wy) {
                    slot.code = ObsCode::Wall;
                    blocked = true;
                    continue;
                }
                let cell = self.cell(wx as usize, wy as usize);
                match cell.terrain {
                    Terrain::Wall => {
                        slot.code = ObsCode::Wall;
                        blocked = true;
                    }
                    Terrain::Free => {
                        slot.code = ObsCode::Free;
                        if let Some(oid) = cell.occupant {
                            let obj = &self.objects[oid.0];
                            slot.object = Some((oid, obj.type_idx, obj.color_idx));
                        }
                    }
                }
            }
        }
        Observation { window: self.window, cells }
    }

    /// Feature vector of the observation at `state`.
    pub fn obs_features(&self, state: AgentState) -> Vec<f64> {
        self.observe(state).features(self.space.types.len(), self.space.colors.len())
    }

    /// Objects currently visible (in the window and not occluded), ascending id.
    pub fn visible_objects(&self, state: AgentState) -> Vec<ObjectId> {
        let obs = self.observe(state);
        let mut ids: Vec<ObjectId> = obs.cells.iter().filter_map(|c| c.object.map(|(id, _, _)| id)).collect();
        ids.sort_unstable();
        ids
    }

    /// Shortest 4-connected free-path length between two positions (heading
    /// ignored), by breadth-first search.
    pub fn geodesic_distance(&self, a: (usize, usize), b: (usize, usize)) -> Result<usize, GridError> {
        for p in [a, b] {
            if p.0 >= self.width || p.1 >= self.height || !self.is_free(p.0, p.1) {
                return Err(GridError::NotFree { x: p.0, y: p.1 });
            }
        }
        if a == b {
            return Ok(0);
        }
        let mut dist = vec![usize::MAX; self.width * self.height];
        let mut queue = VecDeque::new();
        dist[a.1 * self.width + a.0] = 0;
        queue.push_back(a);
        while let Some((x, y)) = queue.pop_front() {
            let d = dist[y * self.width + x];
            for (dx, dy) in [(0i64, -1i64), (1, 0), (0, 1), (-1, 0)] {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if !self.in_bounds(nx, ny) || !self.is_free(nx as usize, ny as usize) {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if dist[ny * self.width + nx] == usize::MAX {
                    dist[ny * self.width + nx] = d + 1;
                    if (nx, ny) == b {
                        return Ok(d + 1);
                    }
                    queue.push_back((nx, ny));
                }
            }
        }
        Err(GridError::Unreachable(a, b))
    }

    /// All free cells reachable from each other (single connected component)?
    pub fn connected(&self) -> bool {
        let free = self.free_cells();
        let Some(&start) = free.first() else { return true };
        let mut seen = vec![false; self.width * self.height];
        let mut queue = VecDeque::new();
        seen[start.1 * self.width + start.0] = true;
        queue.push_back(start);
        let mut count = 1usize;
        while let Some((x, y)) = queue.pop_front() {
            for (dx, dy) in [(0i64, -1i64), (1, 0), (0, 1), (-1, 0)] {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if self.in_bounds(nx, ny)
                    && self.is_free(nx as usize, ny as usize)
                    && !seen[ny as usize * self.width + nx as usize]
                {
                    seen[ny as usize * self.width + nx as usize] = true;
                    count += 1;
                    queue.push_back((nx as usize, ny as usize));
                }
            }
        }
        count == free.len()
    }

    /// Structural invariants: border walls, object placement, wall cells bare,
    /// free-cell connectivity. Returns the first violation as text.
    pub fn check_invariants(&self) -> Result<(), String> {
        for x in 0..self.width {
            for y in [0, self.height - 1] {
                if self.is_free(x, y) {
                    return Err(format!("border cell ({x}, {y}) is not a wall"));
                }
            }
        }
        for y in 0..self.height {
            for x in [0, self.width - 1] {
                if self.is_free(x, y) {
                    return Err(format!("border cell ({x}, {y}) is not a wall"));
                }
            }
        }
        for y in 0..self.height {
            for x in 0..self.width {
                let c = self.cell(x, y);
                if c.terrain == Terrain::Wall && (c.occupant.is_some() || c.room_id.is_some()) {
                    return Err(format!("wall cell ({x}, {y}) has occupant or room"));
                }
            }
        }
        let mut seen = vec![false; self.objects.len()];
        for (i, obj) in self.objects.iter().enumerate() {
            if obj.id.0 != i {
                return Err(format!("object {i} has id {:?}", obj.id));
            }
            let (x, y) = obj.pos;
            if !self.is_free(x, y) {
                return Err(format!("object {i} on non-free cell ({x}, {y})"));
            }
            if self.cell(x, y).occupant != Some(obj.id) {
                return Err(format!("cell ({x}, {y}) does not point back at object {i}"));
            }
            if obj.type_idx >= self.space.types.len() || obj.color_idx >= self.space.colors.len() {
                return Err(format!("object {i} has out-of-range type/color"));
            }
            if seen[i] {
                return Err(format!("duplicate object id {i}"));
            }
            seen[i] = true;
        }
        let mut occupied = std::collections::HashSet::new();
        for obj in &self.objects {
            if !occupied.insert(obj.pos) {
                return Err(format!("two objects share cell {:?}", obj.pos));
            }
        }
        if !self.connected() {
            return Err("free cells are not a single connected component".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Empty-interior room with border walls; objects placed by the caller.
    pub(crate) fn open_env(width: usize, height: usize) -> GridEnvironment {
        let mut cells = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let border = x == 0 || y == 0 || x == width - 1 || y == height - 1;
                let mut c = if border { Cell::wall() } else { Cell::free() };
                if !border {
                    c.room_id = Some(RoomId(0));
                }
                cells.push(c);
            }
        }
        GridEnvironment::new(
            "test-env".into(),
            0,
            width,
            height,
            cells,
            vec![],
            vec![Room { id: RoomId(0), label: "kitchen".into() }],
            ObsWindow::default(),
            ObsSpace { types: vec!["sofa".into(), "table".into()], colors: vec!["red".into(), "blue".into()] },
        )
    }

    pub(crate) fn add_object(env: &mut GridEnvironment, type_idx: usize, color_idx: usize, pos: (usize, usize)) -> ObjectId {
        let id = ObjectId(env.objects.len());
        env.objects.push(SceneObject { id, type_idx, color_idx, pos, is_marker: false });
        env.cell_mut(pos.0, pos.1).occupant = Some(id);
        id
    }

    #[test]
    fn forward_moves_north_into_free_cell() {
        let env = open_env(11, 11);
        let s = AgentState::new(5, 5, Heading::North);
        let s2 = env.step(s, Action::Forward).unwrap();
        assert_eq!((s2.x, s2.y, s2.heading), (5, 4, Heading::North));
    }

    #[test]
    fn forward_into_wall_is_noop() {
        let env = open_env(11, 11);
        let s = AgentState::new(5, 1, Heading::North); // wall at y=0
        let s2 = env.step(s, Action::Forward).unwrap();
        assert_eq!(s2, s);
    }

    #[test]
    fn turn_right_rotates_ninety_degrees() {
        let env = open_env(11, 11);
        let s = AgentState::new(5, 5, Heading::North);
        let s2 = env.step(s, Action::TurnRight).unwrap();
        assert_eq!(s2.heading, Heading::East);
    }

    #[test]
    fn step_from_wall_cell_is_error() {
        let env = open_env(11, 11);
        let s = AgentState::new(0, 0, Heading::North);
        assert!(env.step(s, Action::Forward).is_err());
    }

    #[test]
    fn stop_leaves_state_unchanged() {
        let env = open_env(11, 11);
        let s = AgentState::new(3, 7, Heading::West);
        assert_eq!(env.step(s, Action::Stop).unwrap(), s);
    }

    #[test]
    fn occlusion_hides_cells_behind_wall() {
        let mut env = open_env(11, 11);
        // wall two cells ahead of the agent in its own column
        *env.cell_mut(5, 3) = Cell::wall();
        let obs = env.observe(AgentState::new(5, 5, Heading::North));
        let w = obs.window.width;
        let center = w / 2;
        // d=0 agent cell free, d=1 free, d=2 wall, d>2 unknown
        assert_eq!(obs.cells[center].code, ObsCode::Free);
        assert_eq!(obs.cells[w + center].code, ObsCode::Free);
        assert_eq!(obs.cells[2 * w + center].code, ObsCode::Wall);
        assert_eq!(obs.cells[3 * w + center].code, ObsCode::Unknown);
        assert_eq!(obs.cells[4 * w + center].code, ObsCode::Unknown);
    }

    #[test]
    fn out_of_bounds_coded_wall() {
        let env = open_env(11, 11);
        // facing west right next to the border: d=1 is the border wall column,
        // beyond it out of bounds and occluded
        let obs = env.observe(AgentState::new(1, 5, Heading::West));
        let w = obs.window.width;
        let center = w / 2;
        assert_eq!(obs.cells[w + center].code, ObsCode::Wall);
        assert_eq!(obs.cells[2 * w + center].code, ObsCode::Unknown);
        // lateral column clipped by the map edge shows a wall at its first cell
        // (agent in the corner row)
        let obs2 = env.observe(AgentState::new(1, 1, Heading::North));
        // heading north, right = east; leftmost column j=0 is offset -2 -> x = -1
        assert_eq!(obs2.cells[0].code, ObsCode::Wall);
    }

    #[test]
    fn object_encodes_type_and_color() {
        let mut env = open_env(11, 11);
        let id = add_object(&mut env, 0, 0, (5, 3)); // red sofa two cells ahead
        let obs = env.observe(AgentState::new(5, 5, Heading::North));
        let w = obs.window.width;
        let cell = obs.cells[2 * w + w / 2];
        assert_eq!(cell.object, Some((id, 0, 0)));
        let feats = obs.features(2, 2);
        let per_cell = 3 + 2 + 2;
        let base = (2 * w + w / 2) * per_cell;
        assert_eq!(feats[base + 1], 1.0); // free
        assert_eq!(feats[base + 3], 1.0); // type "sofa"
        assert_eq!(feats[base + 5], 1.0); // color "red"
        assert!(feats.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn object_behind_wall_not_visible() {
        let mut env = open_env(11, 11);
        *env.cell_mut(5, 4) = Cell::wall();
        let id = add_object(&mut env, 0, 0, (5, 3));
        let vis = env.visible_objects(AgentState::new(5, 5, Heading::North));
        assert!(!vis.contains(&id));
    }

    #[test]
    fn object_one_ahead_visible() {
        let mut env = open_env(11, 11);
        let id = add_object(&mut env, 1, 1, (5, 4));
        let vis = env.visible_objects(AgentState::new(5, 5, Heading::North));
        assert_eq!(vis, vec![id]);
    }

    #[test]
    fn empty_room_sees_nothing() {
        let env = open_env(11, 11);
        assert!(env.visible_objects(AgentState::new(5, 5, Heading::South)).is_empty());
    }

    #[test]
    fn geodesic_basics() {
        let env = open_env(5, 5); // 3x3 free interior
        assert_eq!(env.geodesic_distance((1, 1), (1, 1)).unwrap(), 0);
        assert_eq!(env.geodesic_distance((1, 1), (3, 3)).unwrap(), 4);
        assert!(env.geodesic_distance((0, 0), (1, 1)).is_err());
    }

    #[test]
    fn geodesic_unreachable_across_full_wall() {
        let mut env = open_env(7, 7);
        for y in 1..6 {
            *env.cell_mut(3, y) = Cell::wall();
        }
        assert!(matches!(env.geodesic_distance((1, 1), (5, 5)), Err(GridError::Unreachable(_, _))));
    }

    #[test]
    fn invariants_hold_for_open_env() {
        let env = open_env(9, 9);
        env.check_invariants().unwrap();
    }
}
