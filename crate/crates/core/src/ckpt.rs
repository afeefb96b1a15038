//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "EQACKPT\0" (8 bytes)
//! u32 format version (currently 1)
//! u64 config length | config JSON (carries the model kind and its config)
//! u64 parameter count
//! per parameter, in store order:
//!   u64 name length | name bytes
//!   u64 ndim | u64 dims...
//!   u64 numel | f64 values... | f64 adam m... | f64 adam v...
//!   u64 adam step count
//! ```
//!
//! Values are raw IEEE-754 bits, so save -> load -> save round-trips
//! byte-identically. Loading rejects unknown magic, versions, kinds, and any
//! parameter mismatch against the model rebuilt from the config.

use crate::nav::{NavConfig, NavModel};
use crate::nn::{ParamStore, Tensor};
use crate::qa::{QaConfig, QaModel};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io;
use std::path::Path;
use thiserror::Error;

pub const CKPT_MAGIC: &[u8; 8] = b"EQACKPT\0";
pub const CKPT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CkptError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0} is not a checkpoint (bad magic)")]
    BadMagic(String),
    #[error("unsupported checkpoint version {found} (expected {expected}) in {path}")]
    Version { path: String, found: u32, expected: u32 },
    #[error("corrupt checkpoint {path}: {msg}")]
    Corrupt { path: String, msg: String },
    #[error("checkpoint {path} holds a {found} model, expected {expected}")]
    WrongKind { path: String, found: String, expected: String },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CkptHeader {
    Nav { config: NavConfig },
    Qa { config: QaConfig },
    Blindfold { words: Vec<String>, answers: Vec<String> },
}

impl CkptHeader {
    fn kind(&self) -> &'static str {
        match self {
            CkptHeader::Nav { .. } => "nav",
            CkptHeader::Qa { .. } => "qa",
            CkptHeader::Blindfold { .. } => "blindfold",
        }
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.buf.extend_from_slice(b);
    }

    fn floats(&mut self, xs: &[f64]) {
        for x in xs {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }
}

fn encode(header: &CkptHeader, store: &ParamStore) -> Vec<u8> {
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(CKPT_MAGIC);
    w.u32(CKPT_VERSION);
    let config = serde_json::to_vec(header).expect("checkpoint header serialization failed");
    w.bytes(&config);
    w.u64(store.len() as u64);
    for (name, value, m, v, t) in store.iter_params() {
        w.bytes(name.as_bytes());
        w.u64(value.shape().len() as u64);
        for &d in value.shape() {
            w.u64(d as u64);
        }
        w.u64(value.numel() as u64);
        w.floats(value.data());
        w.floats(m.data());
        w.floats(v.data());
        w.u64(t);
    }
    w.buf
}

struct Reader<'a> {
    path: &'a str,
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, msg: impl Into<String>) -> CkptError {
        CkptError::Corrupt { path: self.path.into(), msg: msg.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CkptError> {
        if self.at + n > self.buf.len() {
            return Err(self.corrupt(format!("truncated at byte {}", self.at)));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CkptError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CkptError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8], CkptError> {
        let n = self.u64()? as usize;
        self.take(n)
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>, CkptError> {
        let raw = self.take(n * 8)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn decode(path: &str, buf: &[u8]) -> Result<(CkptHeader, Vec<(String, Tensor, Tensor, Tensor, u64)>), CkptError> {
    let mut r = Reader { path, buf, at: 0 };
    if r.take(8)? != CKPT_MAGIC {
        return Err(CkptError::BadMagic(path.into()));
    }
    let version = r.u32()?;
    if version != CKPT_VERSION {
        return Err(CkptError::Version { path: path.into(), found: version, expected: CKPT_VERSION });
    }
    let header: CkptHeader = serde_json::from_slice(r.bytes()?)
        .map_err(|e| r.corrupt(format!("bad header json: {e}")))?;
    let n_params = r.u64()? as usize;
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let name = String::from_utf8(r.bytes()?.to_vec()).map_err(|_| r.corrupt("non-utf8 parameter name"))?;
        let ndim = r.u64()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u64()? as usize);
        }
        let numel = r.u64()? as usize;
        if shape.iter().product::<usize>() != numel {
            return Err(r.corrupt(format!("parameter {name}: shape/numel mismatch")));
        }
        let value = Tensor::from_vec(&shape, r.floats(numel)?);
        let m = Tensor::from_vec(&shape, r.floats(numel)?);
        let v = Tensor::from_vec(&shape, r.floats(numel)?);
        let t = r.u64()?;
        params.push((name, value, m, v, t));
    }
    if r.at != buf.len() {
        return Err(r.corrupt(format!("{} trailing bytes", buf.len() - r.at)));
    }
    Ok((header, params))
}

fn fill_store(path: &str, store: &mut ParamStore, params: Vec<(String, Tensor, Tensor, Tensor, u64)>) -> Result<(), CkptError> {
    if params.len() != store.len() {
        return Err(CkptError::Corrupt {
            path: path.into(),
            msg: format!("checkpoint has {} parameters, model expects {}", params.len(), store.len()),
        });
    }
    for (name, value, m, v, t) in params {
        store
            .load_param(&name, value, m, v, t)
            .map_err(|msg| CkptError::Corrupt { path: path.into(), msg })?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CkptError> {
    fs::write(path, bytes).map_err(|e| CkptError::Io { path: path.display().to_string(), source: e })
}

fn read_file(path: &Path) -> Result<Vec<u8>, CkptError> {
    fs::read(path).map_err(|e| CkptError::Io { path: path.display().to_string(), source: e })
}

pub fn save_nav(path: &Path, model: &NavModel) -> Result<(), CkptError> {
    write_file(path, &encode(&CkptHeader::Nav { config: model.cfg.clone() }, &model.store))
}

pub fn load_nav(path: &Path) -> Result<NavModel, CkptError> {
    let label = path.display().to_string();
    let (header, params) = decode(&label, &read_file(path)?)?;
    match header {
        CkptHeader::Nav { config } => {
            let mut model = NavModel::new(config, 0);
            fill_store(&label, &mut model.store, params)?;
            Ok(model)
        }
        other => Err(CkptError::WrongKind { path: label, found: other.kind().into(), expected: "nav".into() }),
    }
}

pub fn save_qa(path: &Path, model: &QaModel) -> Result<(), CkptError> {
    write_file(path, &encode(&CkptHeader::Qa { config: model.cfg.clone() }, &model.store))
}

pub fn load_qa(path: &Path) -> Result<QaModel, CkptError> {
    let label = path.display().to_string();
    let (header, params) = decode(&label, &read_file(path)?)?;
    match header {
        CkptHeader::Qa { config } => {
            let mut model = QaModel::new(config, 0);
            fill_store(&label, &mut model.store, params)?;
            Ok(model)
        }
        other => Err(CkptError::WrongKind { path: label, found: other.kind().into(), expected: "qa".into() }),
    }
}

pub fn save_blindfold(path: &Path, model: &crate::qa::BlindfoldModel) -> Result<(), CkptError> {
    let header = CkptHeader::Blindfold { words: model.words.clone(), answers: model.answers.clone() };
    write_file(path, &encode(&header, &model.store))
}

pub fn load_blindfold(path: &Path) -> Result<crate::qa::BlindfoldModel, CkptError> {
    let label = path.display().to_string();
    let (header, params) = decode(&label, &read_file(path)?)?;
    match header {
        CkptHeader::Blindfold { words, answers } => {
            let mut model = crate::qa::BlindfoldModel::new(words, answers, 0);
            fill_store(&label, &mut model.store, params)?;
            Ok(model)
        }
        other => Err(CkptError::WrongKind { path: label, found: other.kind().into(), expected: "blindfold".into() }),
    }
}
