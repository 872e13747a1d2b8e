use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{
    BackendError, BackendIdentity, BackendKind, CompletionBackend, CompletionRequest,
    ScoredContinuation,
};

const CHECKSUM_PREFIX: &str = "sha256:";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    kind: BackendKind,
    model_id: &'a str,
    prompt: &'a str,
    num_beams: usize,
    max_new_tokens: usize,
    temperature: Option<f64>,
    system_message: Option<&'a str>,
}

/// Hex SHA-256 over every field that can change a response.
pub fn cache_key(identity: &BackendIdentity, req: &CompletionRequest) -> String {
    let material = KeyMaterial {
        kind: identity.kind,
        model_id: &identity.model_id,
        prompt: &req.prompt,
        num_beams: req.num_beams,
        max_new_tokens: req.max_new_tokens,
        temperature: identity.temperature,
        system_message: identity.system_message.as_deref(),
    };
    sha256_hex(&serde_json::to_vec(&material).expect("key serializes"))
}

/// On-disk response cache: one file per key, named by the key.
///
/// Each file holds a `sha256:<hex>` checksum line followed by the JSON
/// response. Writes go to a temporary file that is renamed into place, so
/// readers never observe partial entries and concurrent writers of the same
/// key leave one complete copy.
#[derive(Debug)]
pub struct CacheStore {
    dir: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
    corrupt: AtomicU64,
    tmp_seq: AtomicU64,
}

impl CacheStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            corrupt: AtomicU64::new(0),
            tmp_seq: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    /// Stored response for `key`. Unreadable or corrupt entries count as a
    /// miss.
    pub fn get(&self, key: &str) -> Option<Vec<ScoredContinuation>> {
        let found = match fs::read_to_string(self.path(key)) {
            Ok(content) => {
                let parsed = decode_entry(&content);
                if parsed.is_none() {
                    log::warn!("cache entry {key} is corrupt; refetching");
                    self.corrupt.fetch_add(1, Ordering::Relaxed);
                }
                parsed
            }
            Err(_) => None,
        };
        match found {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        found
    }

    pub fn put(&self, key: &str, response: &[ScoredContinuation]) -> io::Result<()> {
        let seq = self.tmp_seq.fetch_add(1, Ordering::Relaxed);
        let tmp = self
            .dir
            .join(format!(".{key}.{}.{seq}.tmp", std::process::id()));
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(encode_entry(response).as_bytes())?;
            file.sync_all()?;
        }
        fs::rename(&tmp, self.path(key))
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn corrupt_entries(&self) -> u64 {
        self.corrupt.load(Ordering::Relaxed)
    }
}

fn encode_entry(response: &[ScoredContinuation]) -> String {
    let body = serde_json::to_string(response).expect("response serializes");
    format!("{CHECKSUM_PREFIX}{}\n{body}", sha256_hex(body.as_bytes()))
}

fn decode_entry(content: &str) -> Option<Vec<ScoredContinuation>> {
    let (header, body) = content.split_once('\n')?;
    let checksum = header.strip_prefix(CHECKSUM_PREFIX)?;
    if checksum != sha256_hex(body.as_bytes()) {
        return None;
    }
    serde_json::from_str(body).ok()
}

/// Serves `req` from `cache` when possible, otherwise asks `backend` and
/// stores the answer. Errors are never cached.
pub fn cached_complete(
    cache: &CacheStore,
    backend: &dyn CompletionBackend,
    req: &CompletionRequest,
) -> Result<Vec<ScoredContinuation>, BackendError> {
    req.validate()?;
    let key = cache_key(&backend.identity(), req);
    if let Some(hit) = cache.get(&key) {
        return Ok(hit);
    }
    let response = backend.complete(req)?;
    if let Err(e) = cache.put(&key, &response) {
        log::warn!("failed to write cache entry {key}: {e}");
    }
    Ok(response)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ServiceStats {
    pub backend_calls: u64,
    pub backend_errors: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

/// A completion engine plus optional cache, counting how often the engine
/// itself is reached.
pub struct CompletionService {
    backend: Box<dyn CompletionBackend>,
    cache: Option<CacheStore>,
    calls: AtomicU64,
    errors: AtomicU64,
}

struct Counting<'a> {
    inner: &'a dyn CompletionBackend,
    calls: &'a AtomicU64,
    errors: &'a AtomicU64,
}

impl CompletionBackend for Counting<'_> {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<ScoredContinuation>, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let out = self.inner.complete(req);
        if out.is_err() {
            self.errors.fetch_add(1, Ordering::Relaxed);
        }
        out
    }

    fn identity(&self) -> BackendIdentity {
        self.inner.identity()
    }
}

impl CompletionService {
    pub fn new(backend: Box<dyn CompletionBackend>, cache: Option<CacheStore>) -> Self {
        Self {
            backend,
            cache,
            calls: AtomicU64::new(0),
            errors: AtomicU64::new(0),
        }
    }

    pub fn complete(
        &self,
        req: &CompletionRequest,
    ) -> Result<Vec<ScoredContinuation>, BackendError> {
        let counting = Counting {
            inner: self.backend.as_ref(),
            calls: &self.calls,
            errors: &self.errors,
        };
        match &self.cache {
            Some(cache) => cached_complete(cache, &counting, req),
            None => {
                req.validate()?;
                counting.complete(req)
            }
        }
    }

    pub fn identity(&self) -> BackendIdentity {
        self.backend.identity()
    }

    pub fn cache(&self) -> Option<&CacheStore> {
        self.cache.as_ref()
    }

    pub fn stats(&self) -> ServiceStats {
        ServiceStats {
            backend_calls: self.calls.load(Ordering::Relaxed),
            backend_errors: self.errors.load(Ordering::Relaxed),
            cache_hits: self.cache.as_ref().map_or(0, CacheStore::hits),
            cache_misses: self.cache.as_ref().map_or(0, CacheStore::misses),
        }
    }
}
