//! File-backed storage in one data directory:
//!
//! ```text
//! users.json
//! kbs/<id>/meta.json      version history, deletion flag
//! kbs/<id>/v<N>.kb        each version as canonical rule-language text
//! cases/<id>.json         archived consultations
//! sessions/<id>.json      completed sessions, rebuilt by replay on demand
//! ```
//!
//! Every file is written to a temporary sibling, synced and renamed into
//! place, so a crash leaves either the old or the new content.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chainshell_core::engine::{AnsweredQuestion, Outcome, TraceEvent};
use chainshell_core::kb::{KnowledgeBase, Value};
use chainshell_core::lang::{parse_kb, serialize_kb};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::auth::{hash_password, now_secs, random_hex, Role, User};

pub const ADMIN_USERNAME: &str = "admin";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("no users exist yet: set CHAINSHELL_ADMIN_PASSWORD to create the `admin` account")]
    NoAdminPassword,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths have a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| StoreError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("store records always encode");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Json files directly inside `dir`, sorted by name.
fn json_files(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Knowledge-base ids double as directory names.
pub fn is_valid_kb_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        && !id.starts_with('-')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionInfo {
    pub version: u64,
    /// Username of the editor.
    pub editor: String,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbMeta {
    pub id: String,
    pub versions: Vec<VersionInfo>,
    /// Deleted knowledge bases are hidden but their versions are kept, so
    /// archived cases can still be replayed.
    pub deleted: bool,
}

impl KbMeta {
    pub fn latest(&self) -> u64 {
        self.versions.last().map_or(0, |v| v.version)
    }

    pub fn has_version(&self, version: u64) -> bool {
        self.versions.iter().any(|v| v.version == version)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactEntry {
    pub variable: String,
    pub value: Value,
}

pub fn fact_pairs(facts: &[FactEntry]) -> Vec<(String, Value)> {
    facts.iter().map(|f| (f.variable.clone(), f.value.clone())).collect()
}

pub fn fact_entries(pairs: &[(String, Value)]) -> Vec<FactEntry> {
    pairs
        .iter()
        .map(|(variable, value)| FactEntry {
            variable: variable.clone(),
            value: value.clone(),
        })
        .collect()
}

/// Everything needed to rebuild a session: the pinned knowledge-base
/// version, the inputs and the answers in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInputs {
    pub kb: String,
    pub kb_version: u64,
    /// `forward`, `backward` or `hybrid`.
    pub mode: String,
    pub goal: Option<String>,
    pub initial_facts: Vec<FactEntry>,
    pub answers: Vec<AnsweredQuestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    #[serde(flatten)]
    pub inputs: SessionInputs,
    pub outcome: Outcome,
    pub trace: Vec<TraceEvent>,
    pub session: String,
    pub created_by: String,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    #[serde(flatten)]
    pub inputs: SessionInputs,
    /// Id of the owning user.
    pub owner: String,
    pub archived_case: Option<String>,
    pub created_at: u64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct UsersFile {
    users: Vec<User>,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    users: Vec<User>,
    kbs: BTreeMap<String, KbMeta>,
    cases: BTreeMap<String, CaseRecord>,
    kb_cache: HashMap<(String, u64), Arc<KnowledgeBase>>,
}

impl Store {
    /// Opens or initializes the data directory. On first boot the `admin`
    /// user is created with `admin_password`.
    pub fn open(root: &Path, admin_password: Option<&str>) -> Result<Store, StoreError> {
        for sub in ["kbs", "cases", "sessions"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let users_path = root.join("users.json");
        let users = if users_path.exists() {
            read_json::<UsersFile>(&users_path)?.users
        } else {
            let password = admin_password.ok_or(StoreError::NoAdminPassword)?;
            let admin = User {
                id: random_hex(8),
                username: ADMIN_USERNAME.to_string(),
                password_hash: hash_password(password),
                role: Role::Admin,
                created_at: now_secs(),
            };
            let file = UsersFile { users: vec![admin] };
            write_json(&users_path, &file)?;
            file.users
        };

        let mut kbs = BTreeMap::new();
        let kb_dir = root.join("kbs");
        for entry in fs::read_dir(&kb_dir).map_err(io_err(&kb_dir))? {
            let dir = entry.map_err(io_err(&kb_dir))?.path();
            let meta_path = dir.join("meta.json");
            if meta_path.exists() {
                let meta: KbMeta = read_json(&meta_path)?;
                kbs.insert(meta.id.clone(), meta);
            }
        }
        let mut cases = BTreeMap::new();
        for path in json_files(&root.join("cases"))? {
            let case: CaseRecord = read_json(&path)?;
            cases.insert(case.id.clone(), case);
        }
        Ok(Store {
            root: root.to_path_buf(),
            users,
            kbs,
            cases,
            kb_cache: HashMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    // users

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn user_by_name(&self, username: &str) -> Option<&User> {
        self.users.iter().find(|u| u.username == username)
    }

    pub fn user_by_id(&self, id: &str) -> Option<&User> {
        self.users.iter().find(|u| u.id == id)
    }

    fn save_users(&self, users: &[User]) -> Result<(), StoreError> {
        write_json(
            &self.root.join("users.json"),
            &UsersFile {
                users: users.to_vec(),
            },
        )
    }

    /// Adds a user; the caller has checked the username is free.
    pub fn add_user(&mut self, user: User) -> Result<(), StoreError> {
        let mut users = self.users.clone();
        users.push(user);
        self.save_users(&users)?;
        self.users = users;
        Ok(())
    }

    pub fn remove_user(&mut self, username: &str) -> Result<Option<User>, StoreError> {
        let Some(pos) = self.users.iter().position(|u| u.username == username) else {
            return Ok(None);
        };
        let mut users = self.users.clone();
        let removed = users.remove(pos);
        self.save_users(&users)?;
        self.users = users;
        Ok(Some(removed))
    }

    // knowledge bases

    /// Metadata of a knowledge base that has not been deleted.
    pub fn kb_meta(&self, id: &str) -> Option<&KbMeta> {
        self.kbs.get(id).filter(|m| !m.deleted)
    }

    pub fn kb_metas(&self) -> impl Iterator<Item = &KbMeta> {
        self.kbs.values().filter(|m| !m.deleted)
    }

    fn version_path(&self, id: &str, version: u64) -> PathBuf {
        self.root.join("kbs").join(id).join(format!("v{version}.kb"))
    }

    /// A stored version, including versions of deleted knowledge bases.
    pub fn load_kb(&mut self, id: &str, version: u64) -> Result<Option<Arc<KnowledgeBase>>, StoreError> {
        if !self.kbs.get(id).is_some_and(|m| m.has_version(version)) {
            return Ok(None);
        }
        let key = (id.to_string(), version);
        if let Some(kb) = self.kb_cache.get(&key) {
            return Ok(Some(kb.clone()));
        }
        let path = self.version_path(id, version);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut kb = parse_kb(&text).map_err(|errors| StoreError::Corrupt {
            path: path.clone(),
            message: errors.first().map_or_else(String::new, ToString::to_string),
        })?;
        kb.id = id.to_string();
        kb.version = version;
        let kb = Arc::new(kb);
        self.kb_cache.insert(key, kb.clone());
        Ok(Some(kb))
    }

    /// Stores `kb` as the next version of `id` (reviving a deleted id) and
    /// returns the stored copy. The caller has validated it.
    pub fn put_kb(&mut self, id: &str, kb: &KnowledgeBase, editor: &str) -> Result<Arc<KnowledgeBase>, StoreError> {
        let mut meta = self.kbs.get(id).cloned().unwrap_or_else(|| KbMeta {
            id: id.to_string(),
            versions: Vec::new(),
            deleted: false,
        });
        let version = meta.latest() + 1;
        let mut stored = kb.clone();
        stored.id = id.to_string();
        stored.version = version;
        write_atomic(&self.version_path(id, version), serialize_kb(&stored).as_bytes())?;
        meta.deleted = false;
        meta.versions.push(VersionInfo {
            version,
            editor: editor.to_string(),
            created_at: now_secs(),
        });
        write_json(&self.root.join("kbs").join(id).join("meta.json"), &meta)?;
        self.kbs.insert(id.to_string(), meta);
        let stored = Arc::new(stored);
        self.kb_cache.insert((id.to_string(), version), stored.clone());
        Ok(stored)
    }

    pub fn delete_kb(&mut self, id: &str) -> Result<bool, StoreError> {
        let Some(mut meta) = self.kb_meta(id).cloned() else {
            return Ok(false);
        };
        meta.deleted = true;
        write_json(&self.root.join("kbs").join(id).join("meta.json"), &meta)?;
        self.kbs.insert(id.to_string(), meta);
        Ok(true)
    }

    // cases and completed sessions

    pub fn put_case(&mut self, case: CaseRecord) -> Result<(), StoreError> {
        write_json(&self.case_path(&case.id), &case)?;
        self.cases.insert(case.id.clone(), case);
        Ok(())
    }

    pub fn case_path(&self, id: &str) -> PathBuf {
        self.root.join("cases").join(format!("{id}.json"))
    }

    pub fn case(&self, id: &str) -> Option<&CaseRecord> {
        self.cases.get(id)
    }

    /// Cases in creation order.
    pub fn cases(&self) -> Vec<&CaseRecord> {
        let mut all: Vec<&CaseRecord> = self.cases.values().collect();
        all.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
        all
    }

    /// The case file exactly as stored, for byte-level replay checks.
    pub fn raw_case(&self, id: &str) -> Result<serde_json::Value, StoreError> {
        read_json(&self.case_path(id))
    }

    pub fn put_session(&self, record: &SessionRecord) -> Result<(), StoreError> {
        write_json(&self.root.join("sessions").join(format!("{}.json", record.id)), record)
    }

    pub fn session_record(&self, id: &str) -> Result<Option<SessionRecord>, StoreError> {
        if !is_valid_kb_id(id) {
            return Ok(None);
        }
        let path = self.root.join("sessions").join(format!("{id}.json"));
        if !path.exists() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }
}
