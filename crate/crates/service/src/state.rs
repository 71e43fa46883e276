//! Shared service state and its on-disk form.
//!
//! ```text
//! <data-dir>/articles/<article_id>.json   stored articles
//! <data-dir>/false_positives.log          one {"text","kind"} object per line
//! <data-dir>/sessions/<session_id>.jsonl  session event logs
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use dataref_core::detector::{find_references, ArticleText, ReferenceCandidate};
use dataref_core::dictionary::{FeatureDictionary, FeatureKind};
use dataref_core::exporter::ArticleMetadata;
use dataref_core::ranker::{aggregate_per_feature, rank_article, RankerConfig};
use dataref_core::registry::RegistryIndex;
use dataref_core::{FeatureGroup, RankedMatch, Score};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};
use crate::session::{ReviewSession, SessionEvent};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredArticle {
    pub article: ArticleText,
    pub metadata: ArticleMetadata,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FalsePositive {
    pub text: String,
    pub kind: FeatureKind,
}

/// Detection and ranking output for one article under one dictionary.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub references: Vec<ReferenceCandidate>,
    pub ranked: Vec<Vec<RankedMatch>>,
    pub groups: Vec<FeatureGroup>,
}

pub type SessionHandle = Arc<tokio::sync::Mutex<ReviewSession>>;

struct SessionEntry {
    article_id: String,
    handle: SessionHandle,
}

impl SessionEntry {
    fn new(session: ReviewSession) -> Self {
        Self {
            article_id: session.article_id.clone(),
            handle: Arc::new(tokio::sync::Mutex::new(session)),
        }
    }
}

pub struct AppState {
    data_dir: PathBuf,
    registry: Arc<RegistryIndex>,
    dictionary: RwLock<Arc<FeatureDictionary>>,
    config: RankerConfig<Score>,
    articles: RwLock<BTreeMap<String, Arc<StoredArticle>>>,
    sessions: RwLock<HashMap<String, SessionEntry>>,
    fp_log: Mutex<()>,
}

/// Identifiers become file names, so they are restricted to a safe set.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn append_line(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let mut line = serde_json::to_string(value).map_err(io::Error::other)?;
    line.push('\n');
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(line.as_bytes())?;
    file.sync_data()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> io::Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), n + 1),
            )
        })?;
        out.push(value);
    }
    Ok(out)
}

impl AppState {
    /// Opens the data directory, replaying stored articles, false positives
    /// and session logs.
    pub fn open(
        data_dir: impl Into<PathBuf>,
        registry: RegistryIndex,
        dictionary: FeatureDictionary,
        config: RankerConfig<Score>,
    ) -> io::Result<Self> {
        let data_dir = data_dir.into();
        fs::create_dir_all(data_dir.join("articles"))?;
        fs::create_dir_all(data_dir.join("sessions"))?;

        let mut dictionary = dictionary;
        let fp_path = data_dir.join("false_positives.log");
        if fp_path.exists() {
            for fp in read_jsonl::<FalsePositive>(&fp_path)? {
                dictionary.add_false_positive(&fp.text, fp.kind);
            }
        }

        let mut articles = BTreeMap::new();
        for entry in fs::read_dir(data_dir.join("articles"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let stored: StoredArticle =
                    serde_json::from_slice(&fs::read(&path)?).map_err(|e| {
                        io::Error::new(
                            io::ErrorKind::InvalidData,
                            format!("{}: {e}", path.display()),
                        )
                    })?;
                articles.insert(stored.article.article_id.clone(), Arc::new(stored));
            }
        }

        let mut sessions = HashMap::new();
        for entry in fs::read_dir(data_dir.join("sessions"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                let events = read_jsonl::<SessionEvent>(&path)?;
                let session = ReviewSession::replay(events).map_err(|e| {
                    io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("{}: {e}", path.display()),
                    )
                })?;
                sessions.insert(session.session_id.clone(), SessionEntry::new(session));
            }
        }
        tracing::info!(
            articles = articles.len(),
            sessions = sessions.len(),
            features = dictionary.len(),
            "service state loaded"
        );

        Ok(Self {
            data_dir,
            registry: Arc::new(registry),
            dictionary: RwLock::new(Arc::new(dictionary)),
            config,
            articles: RwLock::new(articles),
            sessions: RwLock::new(sessions),
            fp_log: Mutex::new(()),
        })
    }

    pub fn registry(&self) -> &RegistryIndex {
        &self.registry
    }

    pub fn config(&self) -> &RankerConfig<Score> {
        &self.config
    }

    pub fn dictionary(&self) -> Arc<FeatureDictionary> {
        self.dictionary.read().expect("dictionary lock").clone()
    }

    pub fn article(&self, id: &str) -> ApiResult<Arc<StoredArticle>> {
        self.articles
            .read()
            .expect("articles lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown article {id:?}")))
    }

    /// Stores a new article; an existing id is a conflict.
    pub fn add_article(&self, stored: StoredArticle) -> ApiResult<Arc<StoredArticle>> {
        let id = stored.article.article_id.clone();
        let mut articles = self.articles.write().expect("articles lock");
        if articles.contains_key(&id) {
            return Err(ApiError::conflict(format!("article {id:?} already exists")));
        }
        let bytes =
            serde_json::to_vec_pretty(&stored).map_err(|e| ApiError::internal(e.to_string()))?;
        write_atomic(
            &self.data_dir.join("articles").join(format!("{id}.json")),
            &bytes,
        )?;
        let stored = Arc::new(stored);
        articles.insert(id, stored.clone());
        Ok(stored)
    }

    /// Records a false positive and swaps in the pruned dictionary. Returns
    /// whether a live feature was removed.
    pub fn add_false_positive(&self, fp: FalsePositive) -> ApiResult<bool> {
        let _guard = self.fp_log.lock().expect("false-positive log lock");
        append_line(&self.data_dir.join("false_positives.log"), &fp)?;
        let current = self.dictionary();
        let mut next = (*current).clone();
        let removed = next.add_false_positive(&fp.text, fp.kind);
        *self.dictionary.write().expect("dictionary lock") = Arc::new(next);
        Ok(removed)
    }

    /// Detects and ranks with the dictionary current at call time.
    pub fn analyze(&self, article: &ArticleText) -> Analysis {
        let dictionary = self.dictionary();
        let references = find_references(article, &dictionary);
        let ranked = rank_article(&references, &self.registry, article, &self.config);
        let groups = aggregate_per_feature(
            references.iter().zip(ranked.iter().map(Vec::as_slice)),
            self.config.top_k_feature,
        );
        Analysis {
            references,
            ranked,
            groups,
        }
    }

    pub fn session(&self, id: &str) -> ApiResult<SessionHandle> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .map(|e| e.handle.clone())
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))
    }

    /// Sessions of one article, ordered by session id.
    pub fn sessions_for(&self, article_id: &str) -> Vec<SessionHandle> {
        let sessions = self.sessions.read().expect("sessions lock");
        let mut found: Vec<(&String, &SessionEntry)> = sessions
            .iter()
            .filter(|(_, e)| e.article_id == article_id)
            .collect();
        found.sort_by_key(|(id, _)| *id);
        found.into_iter().map(|(_, e)| e.handle.clone()).collect()
    }

    fn session_log(&self, id: &str) -> PathBuf {
        self.data_dir.join("sessions").join(format!("{id}.jsonl"))
    }

    /// Persists the creation event, then registers the session.
    pub fn create_session(&self, created: SessionEvent) -> ApiResult<SessionHandle> {
        let session = ReviewSession::replay([created.clone()])?;
        let id = session.session_id.clone();
        append_line(&self.session_log(&id), &created)?;
        let entry = SessionEntry::new(session);
        let handle = entry.handle.clone();
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(id, entry);
        Ok(handle)
    }

    /// Validates, persists and applies one event. The caller holds the
    /// session lock.
    pub fn record(&self, session: &mut ReviewSession, event: SessionEvent) -> ApiResult<()> {
        session.check(&event)?;
        append_line(&self.session_log(&session.session_id), &event)?;
        session.apply(&event)
    }
}
