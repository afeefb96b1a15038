//! On-disk formats: versioned environment text files and the dataset
//! directory (manifest plus one environment file per house).
//!
//! An environment document is line-oriented: a version header, scalar fields,
//! the terrain grid as rows of `#`/`.`, a room table, a room-assignment grid
//! (base-36 room index per cell, `.` for roomless free cells), and an object
//! table. Loading a document with an unknown version fails loudly.

use crate::gen::{Dataset, DatasetConfig, EnvEntry, Question, Vocabulary};
use crate::grid::{Cell, GridEnvironment, ObjectId, ObsSpace, ObsWindow, Room, RoomId, SceneObject, Terrain};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use thiserror::Error;

pub const ENV_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("unsupported format version {found} (expected {expected}) in {path}")]
    Version { path: String, found: u32, expected: u32 },
    #[error("manifest error: {0}")]
    Manifest(String),
}

fn io_err(path: &Path, source: io::Error) -> PersistError {
    PersistError::Io { path: path.display().to_string(), source }
}

const ROOM_DIGITS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// Serialize an environment to the versioned text format.
pub fn env_to_text(env: &GridEnvironment) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "eqa-env {ENV_FORMAT_VERSION}");
    let _ = writeln!(s, "id {}", env.env_id);
    let _ = writeln!(s, "seed {}", env.seed);
    let _ = writeln!(s, "size {} {}", env.width(), env.height());
    let _ = writeln!(s, "window {} {}", env.window.depth, env.window.width);
    let _ = writeln!(s, "types {}", env.space.types.join(","));
    let _ = writeln!(s, "colors {}", env.space.colors.join(","));
    s.push_str("grid\n");
    for y in 0..env.height() {
        for x in 0..env.width() {
            s.push(if env.is_free(x, y) { '.' } else { '#' });
        }
        s.push('\n');
    }
    let _ = writeln!(s, "rooms {}", env.rooms.len());
    for r in &env.rooms {
        let _ = writeln!(s, "{} {}", r.id.0, r.label);
    }
    s.push_str("roommap\n");
    for y in 0..env.height() {
        for x in 0..env.width() {
            let c = env.cell(x, y);
            s.push(match (c.terrain, c.room_id) {
                (Terrain::Wall, _) => '#',
                (Terrain::Free, None) => '.',
                (Terrain::Free, Some(RoomId(r))) => ROOM_DIGITS[r] as char,
            });
        }
        s.push('\n');
    }
    let _ = writeln!(s, "objects {}", env.objects.len());
    for o in &env.objects {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            o.id.0,
            env.type_token(o),
            env.color_token(o),
            o.pos.0,
            o.pos.1,
            u8::from(o.is_marker)
        );
    }
    s.push_str("end\n");
    s
}

struct LineReader<'a> {
    path: &'a str,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineReader<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), PersistError> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| PersistError::Parse { path: self.path.into(), line: 0, msg: "unexpected end of file".into() })
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> PersistError {
        PersistError::Parse { path: self.path.into(), line, msg: msg.into() }
    }
}

/// Parse the versioned text format back into an environment.
pub fn env_from_text(text: &str, path_label: &str) -> Result<GridEnvironment, PersistError> {
    let mut r = LineReader { path: path_label, lines: text.lines().enumerate() };

    let (ln, header) = r.next()?;
    let version: u32 = header
        .strip_prefix("eqa-env ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| r.err(ln, "expected `eqa-env <version>` header"))?;
    if version != ENV_FORMAT_VERSION {
        return Err(PersistError::Version { path: path_label.into(), found: version, expected: ENV_FORMAT_VERSION });
    }

    fn field<'b>(r: &mut LineReader<'b>, key: &str) -> Result<(usize, &'b str), PersistError> {
        let (ln, line) = r.next()?;
        line.strip_prefix(key)
            .and_then(|v| v.strip_prefix(' '))
            .map(|v| (ln, v))
            .ok_or_else(|| r.err(ln, format!("expected `{key} ...`")))
    }

    let (_, env_id) = field(&mut r, "id")?;
    let (ln, seed_s) = field(&mut r, "seed")?;
    let seed: u64 = seed_s.parse().map_err(|_| r.err(ln, "bad seed"))?;
    let (ln, size_s) = field(&mut r, "size")?;
    let mut it = size_s.split_whitespace();
    let width: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| r.err(ln, "bad size"))?;
    let height: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| r.err(ln, "bad size"))?;
    let (ln, win_s) = field(&mut r, "window")?;
    let mut it = win_s.split_whitespace();
    let depth: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| r.err(ln, "bad window"))?;
    let wwidth: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| r.err(ln, "bad window"))?;
    let (_, types_s) = field(&mut r, "types")?;
    let types: Vec<String> = types_s.split(',').map(String::from).collect();
    let (_, colors_s) = field(&mut r, "colors")?;
    let colors: Vec<String> = colors_s.split(',').map(String::from).collect();

    let (ln, g) = r.next()?;
    if g != "grid" {
        return Err(r.err(ln, "expected `grid`"));
    }
    let mut cells = Vec::with_capacity(width * height);
    for _ in 0..height {
        let (ln, row) = r.next()?;
        if row.len() != width {
            return Err(r.err(ln, format!("grid row has {} cells, expected {width}", row.len())));
        }
        for ch in row.chars() {
            cells.push(match ch {
                '#' => Cell::wall(),
                '.' => Cell::free(),
                _ => return Err(r.err(ln, format!("bad grid char {ch:?}"))),
            });
        }
    }

    let (ln, rooms_s) = field(&mut r, "rooms")?;
    let n_rooms: usize = rooms_s.parse().map_err(|_| r.err(ln, "bad room count"))?;
    let mut rooms = Vec::with_capacity(n_rooms);
    for i in 0..n_rooms {
        let (ln, line) = r.next()?;
        let (id_s, label) = line
            .split_once(' ')
            .ok_or_else(|| r.err(ln, "expected `<room id> <label>`"))?;
        let id: usize = id_s.parse().map_err(|_| r.err(ln, "bad room id"))?;
        if id != i {
            return Err(r.err(ln, format!("room ids must be dense, got {id} at position {i}")));
        }
        rooms.push(Room { id: RoomId(id), label: label.to_string() });
    }

    let (ln, rm) = r.next()?;
    if rm != "roommap" {
        return Err(r.err(ln, "expected `roommap`"));
    }
    for y in 0..height {
        let (ln, row) = r.next()?;
        if row.len() != width {
            return Err(r.err(ln, "roommap row width mismatch"));
        }
        for (x, ch) in row.chars().enumerate() {
            let cell = &mut cells[y * width + x];
            match ch {
                '#' => {
                    if cell.terrain != Terrain::Wall {
                        return Err(r.err(ln, format!("roommap/grid disagree at ({x}, {y})")));
                    }
                }
                '.' => {}
                _ => {
                    let idx = ROOM_DIGITS
                        .iter()
                        .position(|&d| d as char == ch)
                        .ok_or_else(|| r.err(ln, format!("bad roommap char {ch:?}")))?;
                    if idx >= rooms.len() {
                        return Err(r.err(ln, format!("room index {idx} out of range")));
                    }
                    cell.room_id = Some(RoomId(idx));
                }
            }
        }
    }

    let (ln, objs_s) = field(&mut r, "objects")?;
    let n_objects: usize = objs_s.parse().map_err(|_| r.err(ln, "bad object count"))?;
    let mut objects = Vec::with_capacity(n_objects);
    for i in 0..n_objects {
        let (ln, line) = r.next()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 6 {
            return Err(r.err(ln, "expected `<id> <type> <color> <x> <y> <marker>`"));
        }
        let id: usize = parts[0].parse().map_err(|_| r.err(ln, "bad object id"))?;
        if id != i {
            return Err(r.err(ln, "object ids must be dense"));
        }
        let type_idx = types
            .iter()
            .position(|t| t == parts[1])
            .ok_or_else(|| r.err(ln, format!("unknown type {:?}", parts[1])))?;
        let color_idx = colors
            .iter()
            .position(|c| c == parts[2])
            .ok_or_else(|| r.err(ln, format!("unknown color {:?}", parts[2])))?;
        let x: usize = parts[3].parse().map_err(|_| r.err(ln, "bad x"))?;
        let y: usize = parts[4].parse().map_err(|_| r.err(ln, "bad y"))?;
        let is_marker = match parts[5] {
            "0" => false,
            "1" => true,
            _ => return Err(r.err(ln, "marker flag must be 0 or 1")),
        };
        cells[y * width + x].occupant = Some(ObjectId(id));
        objects.push(SceneObject { id: ObjectId(id), type_idx, color_idx, pos: (x, y), is_marker });
    }
    let (ln, end) = r.next()?;
    if end != "end" {
        return Err(r.err(ln, "expected `end`"));
    }

    let env = GridEnvironment::new(
        env_id.to_string(),
        seed,
        width,
        height,
        cells,
        objects,
        rooms,
        ObsWindow { depth, width: wwidth },
        ObsSpace { types, colors },
    );
    env.check_invariants()
        .map_err(|e| PersistError::Parse { path: path_label.into(), line: 0, msg: format!("invariant violation: {e}") })?;
    Ok(env)
}

#[derive(Serialize, Deserialize)]
struct ManifestSplit {
    env_files: Vec<String>,
    questions: Vec<Vec<Question>>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: DatasetConfig,
    vocab: Vocabulary,
    train: ManifestSplit,
    val: ManifestSplit,
    test: ManifestSplit,
}

fn split_to_manifest(entries: &[EnvEntry]) -> ManifestSplit {
    ManifestSplit {
        env_files: entries.iter().map(|e| format!("envs/{}.env", e.env.env_id)).collect(),
        questions: entries.iter().map(|e| e.questions.clone()).collect(),
    }
}

/// Write a dataset directory: `manifest.json` plus one `.env` file per house.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<(), PersistError> {
    let envs_dir = dir.join("envs");
    fs::create_dir_all(&envs_dir).map_err(|e| io_err(&envs_dir, e))?;
    for entry in dataset.train.iter().chain(&dataset.val).chain(&dataset.test) {
        let path = envs_dir.join(format!("{}.env", entry.env.env_id));
        fs::write(&path, env_to_text(&entry.env)).map_err(|e| io_err(&path, e))?;
    }
    let manifest = Manifest {
        format_version: MANIFEST_FORMAT_VERSION,
        config: dataset.config.clone(),
        vocab: dataset.vocab.clone(),
        train: split_to_manifest(&dataset.train),
        val: split_to_manifest(&dataset.val),
        test: split_to_manifest(&dataset.test),
    };
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serialization failed");
    json.push('\n');
    fs::write(&path, json).map_err(|e| io_err(&path, e))?;
    Ok(())
}

fn load_split(dir: &Path, split: &ManifestSplit) -> Result<Vec<EnvEntry>, PersistError> {
    if split.env_files.len() != split.questions.len() {
        return Err(PersistError::Manifest("env file and question lists disagree".into()));
    }
    let mut out = Vec::with_capacity(split.env_files.len());
    for (file, questions) in split.env_files.iter().zip(&split.questions) {
        let path = dir.join(file);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let env = env_from_text(&text, &path.display().to_string())?;
        for q in questions {
            if q.env_id != env.env_id {
                return Err(PersistError::Manifest(format!(
                    "question {} does not belong to environment {}",
                    q.qid, env.env_id
                )));
            }
            if env.object(q.target_object_id).is_none() {
                return Err(PersistError::Manifest(format!("question {} targets a missing object", q.qid)));
            }
        }
        out.push(EnvEntry { env, questions: questions.clone() });
    }
    Ok(out)
}

/// Load a dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<Dataset, PersistError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| PersistError::Manifest(format!("{}: {e}", path.display())))?;
    if manifest.format_version != MANIFEST_FORMAT_VERSION {
        return Err(PersistError::Version {
            path: path.display().to_string(),
            found: manifest.format_version,
            expected: MANIFEST_FORMAT_VERSION,
        });
    }
    Ok(Dataset {
        vocab: manifest.vocab,
        train: load_split(dir, &manifest.train)?,
        val: load_split(dir, &manifest.val)?,
        test: load_split(dir, &manifest.test)?,
        config: manifest.config,
    })
}
