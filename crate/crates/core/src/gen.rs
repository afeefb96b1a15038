//! Procedural generation: recursive-partition houses with doored rooms,
//! template questions over unique referents, and disjoint train/val/test
//! splits. Everything is a pure function of `(seed, config)`.

use crate::grid::{Cell, GridEnvironment, ObjectId, ObsSpace, ObsWindow, Room, RoomId, SceneObject, Terrain};
use crate::oracle;
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved marker object types; disjoint from any dataset object vocabulary.
pub const MARKER_TYPES: [&str; 5] = ["mailbox", "safe", "shoes", "tripod", "cloth"];

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("environment generation failed (seed {seed}): {reason}")]
    Unsatisfiable { seed: u64, reason: String },
    #[error("dataset inconsistency: {0}")]
    Dataset(String),
}

/// Geometry and content of one generated house.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub width: usize,
    pub height: usize,
    pub n_rooms: usize,
    pub n_objects: usize,
    pub window: ObsWindow,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { width: 25, height: 25, n_rooms: 4, n_objects: 10, window: ObsWindow::default() }
    }
}

/// Token tables shared by every environment and model of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Question word vocabulary (templates + object types + marker types).
    pub words: Vec<String>,
    /// Answer candidates (colors + room labels).
    pub answers: Vec<String>,
    pub object_types: Vec<String>,
    pub colors: Vec<String>,
    pub room_labels: Vec<String>,
}

const TEMPLATE_WORDS: [&str; 9] = ["what", "color", "is", "the", "?", "room", "located", "in", "of"];

impl Vocabulary {
    /// Build the closed vocabularies from the content token lists.
    pub fn build(object_types: &[String], colors: &[String], room_labels: &[String]) -> Self {
        let mut words: Vec<String> = TEMPLATE_WORDS.iter().map(|s| s.to_string()).collect();
        words.extend(object_types.iter().cloned());
        words.extend(MARKER_TYPES.iter().map(|s| s.to_string()));
        let mut answers = colors.to_vec();
        answers.extend(room_labels.iter().cloned());
        Vocabulary {
            words,
            answers,
            object_types: object_types.to_vec(),
            colors: colors.to_vec(),
            room_labels: room_labels.to_vec(),
        }
    }

    pub fn default_tokens() -> Self {
        let types = ["sofa", "table", "chair", "lamp", "bed", "fridge", "television", "plant", "desk", "sink"];
        let colors = ["red", "blue", "green", "yellow", "white", "black", "brown", "purple"];
        let rooms = ["kitchen", "bedroom", "bathroom", "office", "garage", "hallway"];
        Vocabulary::build(
            &types.map(String::from),
            &colors.map(String::from),
            &rooms.map(String::from),
        )
    }

    /// Observation type table: dataset types followed by the marker types.
    pub fn obs_space(&self) -> ObsSpace {
        let mut types = self.object_types.clone();
        types.extend(MARKER_TYPES.iter().map(|s| s.to_string()));
        ObsSpace { types, colors: self.colors.clone() }
    }

    pub fn word_index(&self, w: &str) -> Option<usize> {
        self.words.iter().position(|x| x == w)
    }

    pub fn answer_index(&self, a: &str) -> Option<usize> {
        self.answers.iter().position(|x| x == a)
    }

    /// Type index of a marker token within the observation space.
    pub fn marker_type_idx(&self, marker: &str) -> Option<usize> {
        MARKER_TYPES.iter().position(|m| *m == marker).map(|i| self.object_types.len() + i)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum QuestionType {
    Color,
    Location,
}

/// Tokenized template question with its ground-truth answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub qid: String,
    pub tokens: Vec<String>,
    pub qtype: QuestionType,
    pub target_object_id: ObjectId,
    pub answer_token: String,
    pub env_id: String,
}

/// One environment with its questions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvEntry {
    pub env: GridEnvironment,
    pub questions: Vec<Question>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_train_envs: usize,
    pub n_val_envs: usize,
    pub n_test_envs: usize,
    pub master_seed: u64,
    pub env: EnvConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_train_envs: 60,
            n_val_envs: 10,
            n_test_envs: 10,
            master_seed: 1,
            env: EnvConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub train: Vec<EnvEntry>,
    pub val: Vec<EnvEntry>,
    pub test: Vec<EnvEntry>,
    pub config: DatasetConfig,
}

impl Dataset {
    pub fn split(&self, s: Split) -> &[EnvEntry] {
        match s {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn n_questions(&self, s: Split) -> usize {
        self.split(s).iter().map(|e| e.questions.len()).sum()
    }
}

// Interior rectangle of free cells (walls excluded).
#[derive(Clone, Copy, Debug)]
struct Region {
    x0: usize,
    y0: usize,
    x1: usize, // inclusive
    y1: usize, // inclusive
}

impl Region {
    fn w(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    fn h(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    fn area(&self) -> usize {
        self.w() * self.h()
    }
}

// Smallest room side after a split; a split needs side >= 2*MIN_SIDE + 1.
const MIN_SIDE: usize = 2;

fn splittable(r: &Region) -> bool {
    r.w() >= 2 * MIN_SIDE + 1 || r.h() >= 2 * MIN_SIDE + 1
}

/// Recursive-partition room layout: repeatedly split the largest region with
/// a wall that keeps a one-cell door gap, until `n_rooms` regions exist.
fn partition_rooms(
    cells: &mut [Cell],
    width: usize,
    height: usize,
    n_rooms: usize,
    rng: &mut DetRng,
) -> Option<Vec<Region>> {
    let mut regions = vec![Region { x0: 1, y0: 1, x1: width - 2, y1: height - 2 }];
    while regions.len() < n_rooms {
        // largest splittable region, earliest on ties
        let mut pick: Option<usize> = None;
        for (i, r) in regions.iter().enumerate() {
            if splittable(r) && pick.is_none_or(|p| r.area() > regions[p].area()) {
                pick = Some(i);
            }
        }
        let idx = pick?;
        let r = regions[idx];
        // split across the longer side; ties go vertical
        let vertical = if r.w() >= 2 * MIN_SIDE + 1 && r.h() >= 2 * MIN_SIDE + 1 {
            r.w() >= r.h()
        } else {
            r.w() >= 2 * MIN_SIDE + 1
        };
        if vertical {
            let lo = r.x0 + MIN_SIDE;
            let hi = r.x1 - MIN_SIDE;
            let wall_x = lo + rng.below(hi - lo + 1);
            let door_y = r.y0 + rng.below(r.h());
            for y in r.y0..=r.y1 {
                if y != door_y {
                    cells[y * width + wall_x] = Cell::wall();
                }
            }
            regions[idx] = Region { x1: wall_x - 1, ..r };
            regions.push(Region { x0: wall_x + 1, ..r });
        } else {
            let lo = r.y0 + MIN_SIDE;
            let hi = r.y1 - MIN_SIDE;
            let wall_y = lo + rng.below(hi - lo + 1);
            let door_x = r.x0 + rng.below(r.w());
            for x in r.x0..=r.x1 {
                if x != door_x {
                    cells[wall_y * width + x] = Cell::wall();
                }
            }
            regions[idx] = Region { y1: wall_y - 1, ..r };
            regions.push(Region { x0: r.x0, y0: wall_y + 1, x1: r.x1, y1: r.y1 });
        }
    }
    Some(regions)
}

/// Deterministically generate one house from `(seed, config)`.
pub fn generate_environment(seed: u64, cfg: &EnvConfig, vocab: &Vocabulary) -> Result<GridEnvironment, GenError> {
    generate_environment_labeled(seed, cfg, vocab, &format!("env-{seed:016x}"))
}

pub fn generate_environment_labeled(
    seed: u64,
    cfg: &EnvConfig,
    vocab: &Vocabulary,
    env_id: &str,
) -> Result<GridEnvironment, GenError> {
    if cfg.width < 2 * MIN_SIDE + 3 || cfg.height < 2 * MIN_SIDE + 3 {
        return Err(GenError::Config(format!("grid {}x{} too small", cfg.width, cfg.height)));
    }
    if cfg.n_rooms == 0 {
        return Err(GenError::Config("n_rooms must be >= 1".into()));
    }
    if cfg.window.width % 2 == 0 || cfg.window.width == 0 || cfg.window.depth == 0 {
        return Err(GenError::Config("observation window must have odd width and nonzero depth".into()));
    }
    let interior = (cfg.width - 2) * (cfg.height - 2);
    if cfg.n_rooms * (MIN_SIDE * MIN_SIDE) > interior {
        return Err(GenError::Config(format!(
            "{} rooms cannot fit a {}x{} interior",
            cfg.n_rooms,
            cfg.width - 2,
            cfg.height - 2
        )));
    }

    let root = DetRng::new(seed);
    const ATTEMPTS: usize = 32;
    let mut last_reason = String::new();
    for attempt in 0..ATTEMPTS {
        let mut rng = root.derive_idx("layout", attempt as u64);
        match try_generate(seed, cfg, vocab, env_id, &mut rng) {
            Ok(env) => return Ok(env),
            Err(reason) => last_reason = reason,
        }
    }
    Err(GenError::Unsatisfiable { seed, reason: last_reason })
}

fn try_generate(
    seed: u64,
    cfg: &EnvConfig,
    vocab: &Vocabulary,
    env_id: &str,
    rng: &mut DetRng,
) -> Result<GridEnvironment, String> {
    let (width, height) = (cfg.width, cfg.height);
    let mut cells = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let border = x == 0 || y == 0 || x == width - 1 || y == height - 1;
            cells.push(if border { Cell::wall() } else { Cell::free() });
        }
    }

    let regions = partition_rooms(&mut cells, width, height, cfg.n_rooms, rng)
        .ok_or_else(|| format!("could not split interior into {} rooms", cfg.n_rooms))?;

    // room labels: sample without replacement while labels last, then reuse
    let mut labels: Vec<String> = Vec::with_capacity(regions.len());
    let mut pool = vocab.room_labels.clone();
    for _ in &regions {
        if pool.is_empty() {
            pool = vocab.room_labels.clone();
        }
        let i = rng.below(pool.len());
        labels.push(pool.swap_remove(i));
    }
    let rooms: Vec<Room> = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| Room { id: RoomId(i), label })
        .collect();
    for (i, r) in regions.iter().enumerate() {
        for y in r.y0..=r.y1 {
            for x in r.x0..=r.x1 {
                let c = &mut cells[y * width + x];
                if c.terrain == Terrain::Free {
                    c.room_id = Some(RoomId(i));
                }
            }
        }
    }

    // objects go on free cells inside rooms (door gaps have no room)
    let mut roomed: Vec<(usize, usize)> = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let c = &cells[y * width + x];
            if c.terrain == Terrain::Free && c.room_id.is_some() {
                roomed.push((x, y));
            }
        }
    }
    if cfg.n_objects > roomed.len() {
        return Err(format!(
            "{} objects do not fit on {} available free cells",
            cfg.n_objects,
            roomed.len()
        ));
    }
    let picks = rng.sample_indices(roomed.len(), cfg.n_objects);
    let mut objects = Vec::with_capacity(cfg.n_objects);
    for (i, &cell_idx) in picks.iter().enumerate() {
        let pos = roomed[cell_idx];
        let type_idx = rng.below(vocab.object_types.len());
        let color_idx = rng.below(vocab.colors.len());
        let id = ObjectId(i);
        cells[pos.1 * width + pos.0].occupant = Some(id);
        objects.push(SceneObject { id, type_idx, color_idx, pos, is_marker: false });
    }

    let env = GridEnvironment::new(
        env_id.to_string(),
        seed,
        width,
        height,
        cells,
        objects,
        rooms,
        cfg.window,
        vocab.obs_space(),
    );
    env.check_invariants()?;
    Ok(env)
}

fn color_question_tokens(type_token: &str) -> Vec<String> {
    ["what", "color", "is", "the", type_token, "?"].map(String::from).to_vec()
}

fn location_question_tokens(type_token: &str) -> Vec<String> {
    ["what", "room", "is", "the", type_token, "located", "in", "?"].map(String::from).to_vec()
}

/// One color and one location question per object whose type is unique in the
/// environment; ambiguous referents are skipped.
pub fn generate_questions(env: &GridEnvironment, vocab: &Vocabulary) -> Vec<Question> {
    let mut type_counts = vec![0usize; env.space.types.len()];
    for obj in &env.objects {
        if !obj.is_marker {
            type_counts[obj.type_idx] += 1;
        }
    }
    let mut out = Vec::new();
    for obj in &env.objects {
        if obj.is_marker || type_counts[obj.type_idx] != 1 {
            continue;
        }
        let type_token = env.type_token(obj).to_string();
        let color = env.color_token(obj).to_string();
        let room = env
            .room_label_at(obj.pos)
            .expect("object placed outside any room")
            .to_string();
        debug_assert!(vocab.answer_index(&color).is_some());
        debug_assert!(vocab.answer_index(&room).is_some());
        out.push(Question {
            qid: format!("{}:q{}", env.env_id, out.len()),
            tokens: color_question_tokens(&type_token),
            qtype: QuestionType::Color,
            target_object_id: obj.id,
            answer_token: color,
            env_id: env.env_id.clone(),
        });
        out.push(Question {
            qid: format!("{}:q{}", env.env_id, out.len()),
            tokens: location_question_tokens(&type_token),
            qtype: QuestionType::Location,
            target_object_id: obj.id,
            answer_token: room,
            env_id: env.env_id.clone(),
        });
    }
    out
}

/// Generate the full dataset: three disjoint splits of environments with
/// questions, every question verified to have a nonempty goal set.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<Dataset, GenError> {
    build_dataset_with_vocab(cfg, Vocabulary::default_tokens())
}

pub fn build_dataset_with_vocab(cfg: &DatasetConfig, vocab: Vocabulary) -> Result<Dataset, GenError> {
    if cfg.n_train_envs == 0 || cfg.n_val_envs == 0 || cfg.n_test_envs == 0 {
        return Err(GenError::Config("split sizes must be >= 1".into()));
    }
    let root = DetRng::new(cfg.master_seed);
    let mut splits: Vec<Vec<EnvEntry>> = Vec::new();
    for (split, count) in [
        (Split::Train, cfg.n_train_envs),
        (Split::Val, cfg.n_val_envs),
        (Split::Test, cfg.n_test_envs),
    ] {
        let mut entries = Vec::with_capacity(count);
        for i in 0..count {
            let env_seed = root.derive_idx(split.name(), i as u64).next_u64();
            let env_id = format!("{}-{:03}", split.name(), i);
            let env = generate_environment_labeled(env_seed, &cfg.env, &vocab, &env_id)?;
            let questions = generate_questions(&env, &vocab);
            // every target must be observable from somewhere
            for q in &questions {
                oracle::goal_set(&env, q.target_object_id)
                    .map_err(|e| GenError::Dataset(format!("{}: {e}", q.qid)))?;
            }
            entries.push(EnvEntry { env, questions });
        }
        splits.push(entries);
    }
    let test = splits.pop().unwrap();
    let val = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    Ok(Dataset { vocab, train, val, test, config: cfg.clone() })
}
