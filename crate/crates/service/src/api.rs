use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use chainshell_core::engine::{start_session, Answer, EngineError, InferenceSession, Status, Verdict};
use chainshell_core::explain::{how as explain_how, render_explanation, why as explain_why};
use chainshell_core::kb::{validate_kb, Diagnostic, KnowledgeBase, Rule, Value};
use chainshell_core::lang::{
    decode_interchange, encode_interchange, parse_kb_with_spans, parse_rule, serialize_kb, ErrorSite, ParseError,
    SourceSpan,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use tower_http::services::{ServeDir, ServeFile};

use crate::auth::{hash_password, now_secs, random_hex, verify_against_dummy, verify_password, Role, Tokens, User};
use crate::config::Config;
use crate::consult::{canonical_json, inputs_of, parse_mode, replay};
use crate::permissions::Endpoint;
use crate::store::{
    fact_pairs, is_valid_kb_id, CaseRecord, FactEntry, KbMeta, SessionInputs, SessionRecord, Store, StoreError,
};

// errors

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Map<String, Json>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        let mut body = serde_json::Map::new();
        body.insert("error".into(), Json::String(message.into()));
        ApiError { status, body }
    }

    fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.body.insert(key.into(), serde_json::to_value(value).expect("error details encode"));
        self
    }

    fn unauthorized() -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, "authentication required")
    }

    fn not_found(what: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, format!("{what} not found"))
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, message)
    }

    fn invalid(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(Json::Object(self.body))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("storage failure: {e}"))
    }
}

fn engine_error(e: EngineError) -> ApiError {
    let status = match &e {
        EngineError::InvalidState(_) => StatusCode::CONFLICT,
        EngineError::NoFact(_) => StatusCode::NOT_FOUND,
        EngineError::TypeFault(_) | EngineError::StepLimit(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    };
    ApiError::new(status, e.to_string())
}

type ApiResult<T = Response> = Result<T, ApiError>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| {
        let status = if e.is_syntax() || e.is_eof() {
            StatusCode::BAD_REQUEST
        } else {
            StatusCode::UNPROCESSABLE_ENTITY
        };
        ApiError::new(status, format!("invalid request body: {e}"))
    })
}

fn reply(status: StatusCode, value: impl Serialize) -> Response {
    (status, axum::Json(value)).into_response()
}

// diagnostics

/// A validation or parse problem, anchored to a source span or to a path
/// in an interchange document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticView {
    pub severity: String,
    pub code: String,
    pub message: String,
    pub rulebase: Option<String>,
    pub rule: Option<String>,
    pub span: Option<SourceSpan>,
    pub path: Option<String>,
}

impl From<&Diagnostic> for DiagnosticView {
    fn from(d: &Diagnostic) -> Self {
        let loc = d.location.clone().unwrap_or_default();
        DiagnosticView {
            severity: d.severity.to_string(),
            code: d.code.clone(),
            message: d.message.clone(),
            rulebase: loc.rulebase,
            rule: loc.rule,
            span: loc.span,
            path: None,
        }
    }
}

impl From<&ParseError> for DiagnosticView {
    fn from(e: &ParseError) -> Self {
        let (span, path) = match &e.site {
            ErrorSite::Span(span) => (Some(*span), None),
            ErrorSite::Path(path) => (None, Some(path.clone())),
        };
        DiagnosticView {
            severity: "error".into(),
            code: "syntax".into(),
            message: e.message.clone(),
            rulebase: None,
            rule: None,
            span,
            path,
        }
    }
}

fn parse_failure(errors: &[ParseError]) -> ApiError {
    let diagnostics: Vec<DiagnosticView> = errors.iter().map(DiagnosticView::from).collect();
    ApiError::invalid("knowledge base does not parse").with("diagnostics", diagnostics)
}

/// Validation diagnostics, with spans into the canonical text of `kb`.
fn diagnose(kb: &KnowledgeBase) -> Vec<Diagnostic> {
    let mut diagnostics = validate_kb(kb);
    if let Ok((_, map)) = parse_kb_with_spans(&serialize_kb(kb)) {
        map.attach(kb, &mut diagnostics);
    }
    diagnostics
}

/// Fails with 422 when any diagnostic is an error.
fn gate(diagnostics: &[Diagnostic]) -> ApiResult<Vec<DiagnosticView>> {
    let views: Vec<DiagnosticView> = diagnostics.iter().map(DiagnosticView::from).collect();
    if diagnostics.iter().any(Diagnostic::is_error) {
        return Err(ApiError::invalid("knowledge base has errors").with("diagnostics", views));
    }
    Ok(views)
}

/// A knowledge base from DSL text or an interchange document, with
/// diagnostics anchored to the submitted form.
fn read_kb(text: Option<&str>, doc: Option<&Json>) -> ApiResult<(KnowledgeBase, Vec<Diagnostic>)> {
    match (text, doc) {
        (Some(text), None) => {
            let (kb, map) = parse_kb_with_spans(text).map_err(|errors| parse_failure(&errors))?;
            let mut diagnostics = validate_kb(&kb);
            map.attach(&kb, &mut diagnostics);
            Ok((kb, diagnostics))
        }
        (None, Some(doc)) => {
            let kb = decode_interchange(doc).map_err(|e| parse_failure(&[e]))?;
            let diagnostics = diagnose(&kb);
            Ok((kb, diagnostics))
        }
        _ => Err(ApiError::invalid("give exactly one of `text` and `kb`")),
    }
}

// state

struct Live {
    id: String,
    /// Id of the user who created the session.
    owner: String,
    kb_id: String,
    session: InferenceSession,
    archived_case: Option<String>,
    created_at: u64,
}

impl Live {
    fn record(&self) -> SessionRecord {
        SessionRecord {
            id: self.id.clone(),
            inputs: inputs_of(&self.kb_id, &self.session),
            owner: self.owner.clone(),
            archived_case: self.archived_case.clone(),
            created_at: self.created_at,
        }
    }
}

type SessionCell = Arc<tokio::sync::Mutex<Live>>;

/// Sessions belong to their creator; others see them as missing.
fn owned(live: &Live, user: &User) -> ApiResult<()> {
    if live.owner == user.id {
        Ok(())
    } else {
        Err(ApiError::not_found("session"))
    }
}

struct Inner {
    config: Config,
    store: Mutex<Store>,
    tokens: Mutex<Tokens>,
    sessions: Mutex<HashMap<String, SessionCell>>,
}

/// Shared service state: the store, issued tokens and live sessions.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl AppState {
    pub fn open(config: Config) -> Result<AppState, StoreError> {
        let store = Store::open(&config.data_dir, config.admin_password.as_deref())?;
        Ok(AppState {
            inner: Arc::new(Inner {
                config,
                store: Mutex::new(store),
                tokens: Mutex::new(Tokens::default()),
                sessions: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn config(&self) -> &Config {
        &self.inner.config
    }

    fn store(&self) -> MutexGuard<'_, Store> {
        lock(&self.inner.store)
    }

    /// The caller behind the bearer token, if their role may use `endpoint`.
    fn authorize(&self, headers: &HeaderMap, endpoint: Endpoint) -> ApiResult<User> {
        let token = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or_else(ApiError::unauthorized)?;
        let user_id = lock(&self.inner.tokens).user_of(token.trim()).ok_or_else(ApiError::unauthorized)?;
        let user = self.store().user_by_id(&user_id).cloned().ok_or_else(ApiError::unauthorized)?;
        if !endpoint.allows(user.role) {
            return Err(ApiError::new(
                StatusCode::FORBIDDEN,
                format!("role {} may not use this endpoint", user.role),
            ));
        }
        Ok(user)
    }

    /// A session, live or completed and rebuilt from disk. Callers check
    /// ownership with [`owned`] once they hold its lock.
    fn session(&self, id: &str) -> ApiResult<SessionCell> {
        let cell = lock(&self.inner.sessions).get(id).cloned();
        let cell = match cell {
            Some(cell) => cell,
            None => {
                let mut store = self.store();
                let record = store.session_record(id)?.ok_or_else(|| ApiError::not_found("session"))?;
                let kb = store
                    .load_kb(&record.inputs.kb, record.inputs.kb_version)?
                    .ok_or_else(|| ApiError::not_found("knowledge base version"))?;
                drop(store);
                let session = replay(kb, &record.inputs).map_err(engine_error)?;
                let live = Live {
                    id: record.id.clone(),
                    owner: record.owner,
                    kb_id: record.inputs.kb,
                    session,
                    archived_case: record.archived_case,
                    created_at: record.created_at,
                };
                let cell = Arc::new(tokio::sync::Mutex::new(live));
                lock(&self.inner.sessions).entry(id.to_string()).or_insert(cell).clone()
            }
        };
        Ok(cell)
    }
}

pub fn router(state: AppState) -> Router {
    let web_dir = state.config().web_dir.clone();
    let api = Router::new()
        .route("/api/login", post(login))
        .route("/api/users", get(list_users).post(create_user).delete(delete_user))
        .route("/api/kbs", get(list_kbs).post(upload_kb))
        .route("/api/kbs/{id}", get(get_kb).delete(delete_kb))
        .route("/api/kbs/{id}/rules", post(add_rule).put(replace_rule).delete(remove_rule))
        .route("/api/validate", post(validate))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/answers", post(answer))
        .route("/api/sessions/{id}/why", get(why))
        .route("/api/sessions/{id}/how/{variable}", get(how))
        .route("/api/sessions/{id}/archive", post(archive))
        .route("/api/cases", get(list_cases))
        .route("/api/cases/{id}", get(get_case))
        .route("/api/cases/{id}/replay", post(replay_case))
        .route("/api/{*rest}", axum::routing::any(|| async { ApiError::not_found("route") }))
        .with_state(state);
    match web_dir {
        Some(dir) => {
            let index = ServeFile::new(dir.join("index.html"));
            api.fallback_service(ServeDir::new(dir).fallback(index))
        }
        None => api,
    }
}

// login and users

#[derive(Deserialize)]
struct LoginBody {
    username: String,
    password: String,
}

async fn login(State(state): State<AppState>, raw: Bytes) -> ApiResult {
    let req: LoginBody = body(&raw)?;
    let user = state.store().user_by_name(&req.username).cloned();
    let password = req.password;
    let user = tokio::task::spawn_blocking(move || match user {
        Some(user) if verify_password(&password, &user.password_hash) => Some(user),
        Some(_) => None,
        None => {
            verify_against_dummy(&password);
            None
        }
    })
    .await
    .expect("password check does not panic")
    .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "invalid username or password"))?;
    let (token, expires_at) = lock(&state.inner.tokens).issue(&user.id, state.config().token_ttl);
    Ok(reply(
        StatusCode::OK,
        json!({"token": token, "expires_at": expires_at, "username": user.username, "role": user.role}),
    ))
}

fn user_view(u: &User) -> Json {
    json!({"id": u.id, "username": u.username, "role": u.role, "created_at": u.created_at})
}

async fn list_users(State(state): State<AppState>, headers: HeaderMap) -> ApiResult {
    state.authorize(&headers, Endpoint::ListUsers)?;
    let users: Vec<Json> = state.store().users().iter().map(user_view).collect();
    Ok(reply(StatusCode::OK, json!({ "users": users })))
}

#[derive(Deserialize)]
struct CreateUserBody {
    username: String,
    password: String,
    role: Role,
}

fn is_valid_username(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

async fn create_user(State(state): State<AppState>, headers: HeaderMap, raw: Bytes) -> ApiResult {
    state.authorize(&headers, Endpoint::CreateUser)?;
    let req: CreateUserBody = body(&raw)?;
    if !is_valid_username(&req.username) {
        return Err(ApiError::invalid("usernames are 1-64 letters, digits, `_`, `.` or `-`"));
    }
    if req.password.is_empty() {
        return Err(ApiError::invalid("password must not be empty"));
    }
    let password = req.password;
    let password_hash = tokio::task::spawn_blocking(move || hash_password(&password))
        .await
        .expect("hashing does not panic");
    let user = User {
        id: random_hex(8),
        username: req.username,
        password_hash,
        role: req.role,
        created_at: now_secs(),
    };
    let mut store = state.store();
    if store.user_by_name(&user.username).is_some() {
        return Err(ApiError::conflict(format!("username `{}` is taken", user.username)));
    }
    store.add_user(user.clone())?;
    Ok(reply(StatusCode::CREATED, user_view(&user)))
}

async fn delete_user(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult {
    state.authorize(&headers, Endpoint::DeleteUser)?;
    let username = query
        .get("username")
        .ok_or_else(|| ApiError::invalid("missing `username` query parameter"))?;
    let mut store = state.store();
    let target = store.user_by_name(username).cloned().ok_or_else(|| ApiError::not_found("user"))?;
    let admins = store.users().iter().filter(|u| u.role == Role::Admin).count();
    if target.role == Role::Admin && admins == 1 {
        return Err(ApiError::conflict("cannot delete the last admin"));
    }
    store.remove_user(username)?;
    drop(store);
    lock(&state.inner.tokens).revoke_user(&target.id);
    Ok(reply(StatusCode::OK, json!({ "deleted": target.username })))
}

// knowledge bases

#[derive(Serialize)]
struct KbView {
    id: String,
    version: u64,
    /// Canonical rule-language text of this version.
    text: String,
    /// The same knowledge base in the interchange format.
    kb: Json,
    versions: Vec<crate::store::VersionInfo>,
    diagnostics: Vec<DiagnosticView>,
}

fn kb_view(kb: &KnowledgeBase, meta: &KbMeta, diagnostics: Vec<DiagnosticView>) -> KbView {
    KbView {
        id: kb.id.clone(),
        version: kb.version,
        text: serialize_kb(kb),
        kb: encode_interchange(kb),
        versions: meta.versions.clone(),
        diagnostics,
    }
}

async fn list_kbs(State(state): State<AppState>, headers: HeaderMap) -> ApiResult {
    state.authorize(&headers, Endpoint::ListKbs)?;
    let kbs: Vec<Json> = state
        .store()
        .kb_metas()
        .map(|m| {
            let last = m.versions.last().expect("stored knowledge bases have a version");
            json!({"id": m.id, "version": last.version, "updated_by": last.editor, "updated_at": last.created_at})
        })
        .collect();
    Ok(reply(StatusCode::OK, json!({ "kbs": kbs })))
}

#[derive(Deserialize)]
struct UploadBody {
    id: Option<String>,
    text: Option<String>,
    kb: Option<Json>,
    /// Optimistic concurrency: the version the edit is based on (0 for a
    /// new knowledge base).
    base_version: Option<u64>,
}

fn check_base(store: &Store, id: &str, base: Option<u64>) -> ApiResult<()> {
    let latest = store.kb_meta(id).map_or(0, KbMeta::latest);
    match base {
        Some(base) if base != latest => Err(ApiError::conflict(format!(
            "knowledge base `{id}` is at version {latest}, not {base}"
        ))
        .with("latest", latest)),
        _ => Ok(()),
    }
}

/// Validates and stores `kb` as the next version of `id`.
fn commit(
    state: &AppState,
    id: &str,
    kb: KnowledgeBase,
    diagnostics: &[Diagnostic],
    base: Option<u64>,
    editor: &User,
) -> ApiResult<KbView> {
    let views = gate(diagnostics)?;
    let mut store = state.store();
    check_base(&store, id, base)?;
    let stored = store.put_kb(id, &kb, &editor.username)?;
    let meta = store.kb_meta(id).expect("just stored");
    Ok(kb_view(&stored, meta, views))
}

async fn upload_kb(State(state): State<AppState>, headers: HeaderMap, raw: Bytes) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::UploadKb)?;
    let req: UploadBody = body(&raw)?;
    let (kb, diagnostics) = read_kb(req.text.as_deref(), req.kb.as_ref())?;
    let id = match (&req.id, &req.kb) {
        (Some(id), _) => id.clone(),
        (None, Some(_)) => kb.id.clone(),
        (None, None) => return Err(ApiError::invalid("missing knowledge-base `id`")),
    };
    if !is_valid_kb_id(&id) {
        return Err(ApiError::invalid(format!(
            "invalid knowledge-base id `{id}`: use 1-64 letters, digits, `_` or `-`"
        )));
    }
    let view = commit(&state, &id, kb, &diagnostics, req.base_version, &user)?;
    Ok(reply(StatusCode::CREATED, view))
}

/// The latest (or a requested) stored version of a visible knowledge base.
fn fetch_kb(state: &AppState, id: &str, version: Option<u64>) -> ApiResult<(Arc<KnowledgeBase>, KbMeta)> {
    let mut store = state.store();
    let meta = store.kb_meta(id).cloned().ok_or_else(|| ApiError::not_found("knowledge base"))?;
    let version = version.unwrap_or_else(|| meta.latest());
    let kb = store
        .load_kb(id, version)?
        .ok_or_else(|| ApiError::not_found(format!("version {version} of knowledge base")))?;
    Ok((kb, meta))
}

fn query_u64(query: &HashMap<String, String>, key: &str) -> ApiResult<Option<u64>> {
    query
        .get(key)
        .map(|v| v.parse().map_err(|_| ApiError::invalid(format!("`{key}` must be a number"))))
        .transpose()
}

async fn get_kb(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult {
    state.authorize(&headers, Endpoint::GetKb)?;
    let (kb, meta) = fetch_kb(&state, &id, query_u64(&query, "version")?)?;
    let diagnostics = diagnose(&kb).iter().map(DiagnosticView::from).collect();
    Ok(reply(StatusCode::OK, kb_view(&kb, &meta, diagnostics)))
}

async fn delete_kb(State(state): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult {
    state.authorize(&headers, Endpoint::DeleteKb)?;
    if !state.store().delete_kb(&id)? {
        return Err(ApiError::not_found("knowledge base"));
    }
    Ok(reply(StatusCode::OK, json!({ "deleted": id })))
}

#[derive(Deserialize)]
struct RuleBody {
    /// Target rule base; defaults to the first.
    rulebase: Option<String>,
    /// The rule in the rule language, e.g. `rule R4: if ... then ...`.
    text: Option<String>,
    /// The rule in the interchange format.
    rule: Option<Json>,
    /// Insertion index for new rules; defaults to the end.
    position: Option<usize>,
    /// Id of the rule to replace; defaults to the new rule's id.
    target: Option<String>,
    base_version: Option<u64>,
}

/// Decodes one interchange rule by decoding a copy of `kb` holding only it.
fn decode_rule(kb: &KnowledgeBase, rb_index: usize, rule: &Json) -> ApiResult<Rule> {
    let mut doc = encode_interchange(kb);
    let mut rule = rule.clone();
    if let Some(obj) = rule.as_object_mut() {
        obj.entry("order_index").or_insert(json!(0));
    }
    doc["rulebases"][rb_index]["rules"] = json!([rule]);
    let prefix = format!("rulebases[{rb_index}].rules[0]");
    match decode_interchange(&doc) {
        Ok(mut decoded) => Ok(decoded.rulebases.swap_remove(rb_index).rules.remove(0)),
        Err(mut e) => {
            if let ErrorSite::Path(path) = &mut e.site {
                *path = path.replacen(&prefix, "rule", 1);
            }
            Err(parse_failure(&[e]))
        }
    }
}

/// Resolves the rule base and the submitted rule of a rule edit.
fn rule_edit(kb: &KnowledgeBase, req: &RuleBody) -> ApiResult<(usize, Option<Rule>)> {
    let rb_index = match &req.rulebase {
        Some(id) => kb
            .rulebases
            .iter()
            .position(|rb| &rb.id == id)
            .ok_or_else(|| ApiError::not_found(format!("rule base `{id}`")))?,
        None => 0,
    };
    let rule = match (&req.text, &req.rule) {
        (Some(text), None) => Some(parse_rule(text).map_err(|errors| parse_failure(&errors))?),
        (None, Some(doc)) => Some(decode_rule(kb, rb_index, doc)?),
        (None, None) => None,
        (Some(_), Some(_)) => return Err(ApiError::invalid("give at most one of `text` and `rule`")),
    };
    Ok((rb_index, rule))
}

/// Applies `edit` to the latest version of `id` and stores the result.
fn edit_rules(
    state: &AppState,
    user: &User,
    id: &str,
    req: &RuleBody,
    edit: impl FnOnce(&mut Vec<Rule>, Option<Rule>) -> ApiResult<()>,
) -> ApiResult<KbView> {
    let (latest, _) = fetch_kb(state, id, None)?;
    check_base(&state.store(), id, req.base_version)?;
    let mut kb = (*latest).clone();
    let (rb_index, rule) = rule_edit(&kb, req)?;
    edit(&mut kb.rulebases[rb_index].rules, rule)?;
    kb.rulebases[rb_index].reindex();
    let diagnostics = diagnose(&kb);
    commit(state, id, kb, &diagnostics, Some(latest.version), user)
}

async fn add_rule(State(state): State<AppState>, headers: HeaderMap, Path(id): Path<String>, raw: Bytes) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::AddRule)?;
    let req: RuleBody = body(&raw)?;
    let position = req.position;
    let view = edit_rules(&state, &user, &id, &req, |rules, rule| {
        let rule = rule.ok_or_else(|| ApiError::invalid("missing rule: give `text` or `rule`"))?;
        if rules.iter().any(|r| r.id == rule.id) {
            return Err(ApiError::conflict(format!("rule `{}` already exists", rule.id)));
        }
        let at = position.unwrap_or(rules.len());
        if at > rules.len() {
            return Err(ApiError::invalid(format!("position {at} is past the end")));
        }
        rules.insert(at, rule);
        Ok(())
    })?;
    Ok(reply(StatusCode::CREATED, view))
}

async fn replace_rule(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    raw: Bytes,
) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::ReplaceRule)?;
    let req: RuleBody = body(&raw)?;
    let target = req.target.clone();
    let view = edit_rules(&state, &user, &id, &req, |rules, rule| {
        let rule = rule.ok_or_else(|| ApiError::invalid("missing rule: give `text` or `rule`"))?;
        let target = target.unwrap_or_else(|| rule.id.clone());
        let at = rules
            .iter()
            .position(|r| r.id == target)
            .ok_or_else(|| ApiError::not_found(format!("rule `{target}`")))?;
        if rule.id != target && rules.iter().any(|r| r.id == rule.id) {
            return Err(ApiError::conflict(format!("rule `{}` already exists", rule.id)));
        }
        rules[at] = rule;
        Ok(())
    })?;
    Ok(reply(StatusCode::OK, view))
}

async fn remove_rule(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::RemoveRule)?;
    let target = query
        .get("rule")
        .cloned()
        .ok_or_else(|| ApiError::invalid("missing `rule` query parameter"))?;
    let req = RuleBody {
        rulebase: query.get("rulebase").cloned(),
        text: None,
        rule: None,
        position: None,
        target: None,
        base_version: query_u64(&query, "base_version")?,
    };
    let view = edit_rules(&state, &user, &id, &req, |rules, _| {
        let at = rules
            .iter()
            .position(|r| r.id == target)
            .ok_or_else(|| ApiError::not_found(format!("rule `{target}`")))?;
        rules.remove(at);
        Ok(())
    })?;
    Ok(reply(StatusCode::OK, view))
}

#[derive(Deserialize)]
struct ValidateBody {
    text: Option<String>,
    kb: Option<Json>,
}

/// Dry-run validation for editors: always 200 when the body is readable.
async fn validate(State(state): State<AppState>, headers: HeaderMap, raw: Bytes) -> ApiResult {
    state.authorize(&headers, Endpoint::Validate)?;
    let req: ValidateBody = body(&raw)?;
    let diagnostics: Vec<DiagnosticView> = match read_kb(req.text.as_deref(), req.kb.as_ref()) {
        Ok((_, diagnostics)) => diagnostics.iter().map(DiagnosticView::from).collect(),
        Err(e) if e.status == StatusCode::UNPROCESSABLE_ENTITY && e.body.contains_key("diagnostics") => {
            serde_json::from_value(e.body["diagnostics"].clone()).expect("diagnostics round-trip")
        }
        Err(e) => return Err(e),
    };
    let valid = !diagnostics.iter().any(|d| d.severity == "error");
    Ok(reply(StatusCode::OK, json!({"valid": valid, "diagnostics": diagnostics})))
}

// sessions

#[derive(Serialize)]
struct SessionView<'a> {
    id: &'a str,
    kb: &'a str,
    kb_version: u64,
    mode: &'static str,
    goal: Option<&'a str>,
    status: &'a Status,
    answers: &'a [chainshell_core::engine::AnsweredQuestion],
    archived_case: Option<&'a str>,
    created_at: u64,
}

fn session_view(live: &Live) -> SessionView<'_> {
    let s = &live.session;
    SessionView {
        id: &live.id,
        kb: &live.kb_id,
        kb_version: s.kb_version(),
        mode: s.mode().name(),
        goal: s.mode().goal(),
        status: s.status(),
        answers: s.answers(),
        archived_case: live.archived_case.as_deref(),
        created_at: live.created_at,
    }
}

#[derive(Deserialize)]
struct CreateSessionBody {
    kb: String,
    /// Pins an older version; defaults to the latest.
    version: Option<u64>,
    mode: String,
    goal: Option<String>,
    #[serde(default)]
    facts: Vec<FactEntry>,
}

async fn create_session(State(state): State<AppState>, headers: HeaderMap, raw: Bytes) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::CreateSession)?;
    let req: CreateSessionBody = body(&raw)?;
    let mode = parse_mode(&req.mode, req.goal.as_deref()).map_err(ApiError::invalid)?;
    let (kb, _) = fetch_kb(&state, &req.kb, req.version)?;
    let session = start_session(kb, mode, &fact_pairs(&req.facts)).map_err(engine_error)?;
    let live = Live {
        id: random_hex(16),
        owner: user.id,
        kb_id: req.kb,
        session,
        archived_case: None,
        created_at: now_secs(),
    };
    if live.session.is_done() {
        state.store().put_session(&live.record())?;
    }
    let response = reply(StatusCode::CREATED, session_view(&live));
    let id = live.id.clone();
    lock(&state.inner.sessions).insert(id, Arc::new(tokio::sync::Mutex::new(live)));
    Ok(response)
}

async fn get_session(State(state): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::GetSession)?;
    let cell = state.session(&id)?;
    let live = cell.lock().await;
    owned(&live, &user)?;
    Ok(reply(StatusCode::OK, session_view(&live)))
}

#[derive(Deserialize)]
struct AnswerBody {
    /// The question being answered; a mismatch is a conflict, which
    /// protects against double submission.
    variable: Option<String>,
    value: Option<Value>,
    /// Raw text parsed against the allowed values.
    text: Option<String>,
    #[serde(default)]
    unknown: bool,
}

async fn answer(State(state): State<AppState>, headers: HeaderMap, Path(id): Path<String>, raw: Bytes) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::Answer)?;
    let cell = state.session(&id)?;
    let req: AnswerBody = body(&raw)?;
    let mut live = cell
        .try_lock()
        .map_err(|_| ApiError::conflict("session is busy with another request"))?;
    owned(&live, &user)?;
    let question = live
        .session
        .question()
        .cloned()
        .ok_or_else(|| ApiError::conflict("session is not waiting for an answer"))?;
    if let Some(var) = &req.variable {
        if *var != question.variable {
            return Err(ApiError::conflict(format!(
                "session is asking for `{}`, not `{var}`",
                question.variable
            )));
        }
    }
    let answer = match (req.value, req.text, req.unknown) {
        (Some(v), None, false) => Answer::Value(v),
        (None, Some(text), false) => Answer::Value(question.allowed.parse(&text).ok_or_else(|| {
            ApiError::invalid(format!(
                "invalid answer {text:?} for `{}`: expected {}",
                question.variable,
                question.allowed.describe()
            ))
        })?),
        (None, None, true) => Answer::Unknown,
        _ => return Err(ApiError::invalid("give exactly one of `value`, `text` and `unknown: true`")),
    };
    live.session = live.session.resume(answer).map_err(engine_error)?;
    if live.session.is_done() {
        state.store().put_session(&live.record())?;
    }
    Ok(reply(StatusCode::OK, session_view(&live)))
}

async fn why(State(state): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::Why)?;
    let cell = state.session(&id)?;
    let live = cell.lock().await;
    owned(&live, &user)?;
    let chain = explain_why(&live.session).map_err(engine_error)?;
    let text = render_explanation(&chain);
    Ok(reply(StatusCode::OK, json!({"chain": chain, "text": text})))
}

async fn how(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path((id, variable)): Path<(String, String)>,
) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::How)?;
    let cell = state.session(&id)?;
    let live = cell.lock().await;
    owned(&live, &user)?;
    let proof = explain_how(&live.session, &variable).map_err(|e| match e {
        EngineError::UnknownVariable(_) => ApiError::not_found(format!("variable `{variable}`")),
        e => engine_error(e),
    })?;
    let text = render_explanation(&proof);
    Ok(reply(StatusCode::OK, json!({"proof": proof, "text": text})))
}

async fn archive(State(state): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::Archive)?;
    let cell = state.session(&id)?;
    let mut live = cell.lock().await;
    owned(&live, &user)?;
    if let Some(case_id) = &live.archived_case {
        let case = state.store().case(case_id).cloned().ok_or_else(|| ApiError::not_found("case"))?;
        return Ok(reply(StatusCode::OK, case));
    }
    let outcome = live
        .session
        .outcome()
        .cloned()
        .ok_or_else(|| ApiError::conflict("only finished sessions can be archived"))?;
    let case = CaseRecord {
        id: random_hex(16),
        inputs: inputs_of(&live.kb_id, &live.session),
        outcome,
        trace: live.session.trace().to_vec(),
        session: live.id.clone(),
        created_by: user.username.clone(),
        created_at: now_secs(),
    };
    let mut store = state.store();
    store.put_case(case.clone())?;
    live.archived_case = Some(case.id.clone());
    store.put_session(&live.record())?;
    Ok(reply(StatusCode::CREATED, case))
}

// cases

fn may_see_case(user: &User, case: &CaseRecord) -> bool {
    user.role != Role::Practitioner || case.created_by == user.username
}

fn case_summary(case: &CaseRecord) -> Json {
    let (verdict, value) = match &case.outcome.verdict {
        Some(Verdict::Proven { value, .. }) => (Some("proven"), Some(value)),
        Some(Verdict::NotProven { .. }) => (Some("not_proven"), None),
        None => (None, None),
    };
    json!({
        "id": case.id,
        "kb": case.inputs.kb,
        "kb_version": case.inputs.kb_version,
        "mode": case.inputs.mode,
        "goal": case.inputs.goal,
        "verdict": verdict,
        "value": value,
        "recommendations": case.outcome.recommendations,
        "created_by": case.created_by,
        "created_at": case.created_at,
    })
}

async fn list_cases(State(state): State<AppState>, headers: HeaderMap) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::ListCases)?;
    let store = state.store();
    let cases: Vec<Json> = store
        .cases()
        .into_iter()
        .filter(|c| may_see_case(&user, c))
        .map(case_summary)
        .collect();
    Ok(reply(StatusCode::OK, json!({ "cases": cases })))
}

fn visible_case(state: &AppState, user: &User, id: &str) -> ApiResult<CaseRecord> {
    state
        .store()
        .case(id)
        .filter(|c| may_see_case(user, c))
        .cloned()
        .ok_or_else(|| ApiError::not_found("case"))
}

async fn get_case(State(state): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::GetCase)?;
    Ok(reply(StatusCode::OK, visible_case(&state, &user, &id)?))
}

/// Replays a stored case and compares its canonical outcome and trace
/// with the bytes on disk.
pub fn verify_case(store: &mut Store, id: &str) -> Result<bool, String> {
    let raw = store.raw_case(id).map_err(|e| e.to_string())?;
    let inputs: SessionInputs = serde_json::from_value(raw.clone()).map_err(|e| e.to_string())?;
    let kb = store
        .load_kb(&inputs.kb, inputs.kb_version)
        .map_err(|e| e.to_string())?
        .ok_or("knowledge-base version missing")?;
    let s = replay(kb, &inputs).map_err(|e| e.to_string())?;
    let outcome = s.outcome().ok_or("replay did not finish")?;
    Ok(canonical_json(&raw["outcome"]) == canonical_json(outcome)
        && canonical_json(&raw["trace"]) == canonical_json(s.trace()))
}

async fn replay_case(State(state): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult {
    let user = state.authorize(&headers, Endpoint::ReplayCase)?;
    visible_case(&state, &user, &id)?;
    let identical = verify_case(&mut state.store(), &id)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("replay failed: {e}")))?;
    Ok(reply(StatusCode::OK, json!({"id": id, "identical": identical})))
}
