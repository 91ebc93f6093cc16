//! Content-addressed embedding cache.
//!
//! The store is an append-only log. Each record is a `u32`-length-prefixed
//! backend id, the 32-byte SHA-256 digest of the text, the vector dimension as
//! `u32`, then that many little-endian `f32` values.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use sha2::{Digest, Sha256};
use troubleshoot_core::{BackendError, Embedder, EmbeddingVector};

use crate::error::{AppError, Result};

pub type TextDigest = [u8; 32];

pub fn digest(text: &str) -> TextDigest {
    Sha256::digest(text.as_bytes()).into()
}

fn encode_record(backend_id: &str, digest: &TextDigest, values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + backend_id.len() + 36 + 4 * values.len());
    out.extend_from_slice(&(backend_id.len() as u32).to_le_bytes());
    out.extend_from_slice(backend_id.as_bytes());
    out.extend_from_slice(digest);
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

type Entries = HashMap<(String, TextDigest), Vec<f32>>;

fn decode_log(path: &Path, bytes: &[u8]) -> Result<Entries> {
    let mut entries = Entries::new();
    let mut pos = 0usize;
    let corrupt = |offset: usize, message: &str| AppError::Corrupt {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    };
    while pos < bytes.len() {
        let start = pos;
        let need = |pos: usize, n: usize| {
            if bytes.len() - pos < n {
                Err(corrupt(start, "truncated record"))
            } else {
                Ok(())
            }
        };
        need(pos, 4)?;
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().expect("4 bytes")) as usize;
        pos += 4;
        need(pos, len)?;
        let id = std::str::from_utf8(&bytes[pos..pos + len])
            .map_err(|_| corrupt(pos, "backend id is not UTF-8"))?
            .to_string();
        pos += len;
        need(pos, 36)?;
        let digest: TextDigest = bytes[pos..pos + 32].try_into().expect("32 bytes");
        pos += 32;
        let d = u32::from_le_bytes(bytes[pos..pos + 4].try_into().expect("4 bytes")) as usize;
        pos += 4;
        need(pos, 4 * d)?;
        let values: Vec<f32> = bytes[pos..pos + 4 * d]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(corrupt(pos, "non-finite value"));
        }
        pos += 4 * d;
        entries.insert((id, digest), values);
    }
    Ok(entries)
}

/// Shared cache: concurrent lookups, serialized appends.
#[derive(Debug)]
pub struct EmbeddingCache {
    path: PathBuf,
    entries: RwLock<Entries>,
    file: Mutex<File>,
}

impl EmbeddingCache {
    /// Opens or creates the store. A corrupt store is an error carrying the
    /// offset of the first bad record.
    pub fn open(path: &Path) -> Result<Self> {
        let entries = match std::fs::read(path) {
            Ok(bytes) => decode_log(path, &bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Entries::new(),
            Err(e) => return Err(AppError::io(path, e)),
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| AppError::io(path, e))?;
        Ok(EmbeddingCache {
            path: path.to_path_buf(),
            entries: RwLock::new(entries),
            file: Mutex::new(file),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, backend_id: &str, text: &str) -> Option<EmbeddingVector> {
        let key = (backend_id.to_string(), digest(text));
        let entries = self.entries.read().expect("cache lock");
        entries
            .get(&key)
            .map(|v| EmbeddingVector::new(v.clone()).expect("stored values are finite"))
    }

    pub fn store(&self, backend_id: &str, text: &str, vector: &EmbeddingVector) -> Result<()> {
        let key = (backend_id.to_string(), digest(text));
        let mut file = self.file.lock().expect("cache file lock");
        if self.entries.read().expect("cache lock").contains_key(&key) {
            return Ok(());
        }
        file.write_all(&encode_record(backend_id, &key.1, vector.values()))
            .and_then(|_| file.flush())
            .map_err(|e| AppError::io(&self.path, e))?;
        self.entries
            .write()
            .expect("cache lock")
            .insert(key, vector.values().to_vec());
        Ok(())
    }
}

/// Embedder wrapper that serves hits from the cache and stores misses.
pub struct CachedEmbedder {
    inner: Arc<dyn Embedder>,
    cache: Arc<EmbeddingCache>,
}

impl CachedEmbedder {
    pub fn new(inner: Arc<dyn Embedder>, cache: Arc<EmbeddingCache>) -> Self {
        CachedEmbedder { inner, cache }
    }
}

impl Embedder for CachedEmbedder {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, BackendError> {
        let id = self.inner.id();
        let mut out: Vec<Option<EmbeddingVector>> = texts.iter().map(|t| self.cache.lookup(id, t)).collect();
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let batch: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let fresh = self.inner.embed(&batch)?;
            if fresh.len() != batch.len() {
                return Err(BackendError::Contract(format!(
                    "expected {} embeddings, got {}",
                    batch.len(),
                    fresh.len()
                )));
            }
            for (&i, v) in missing.iter().zip(fresh) {
                self.cache
                    .store(id, texts[i], &v)
                    .map_err(|e| BackendError::Transport(format!("cache write failed: {e}")))?;
                out[i] = Some(v);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled")).collect())
    }
}
