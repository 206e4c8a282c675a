#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use chainshell_core::DEMO_CHEST_KB;
use chainshell_service::auth::Role;
use chainshell_service::permissions::Endpoint;
use chainshell_service::{router, AppState, Config};
use http_body_util::BodyExt;
use serde_json::{json, Value as Json};
use tower::ServiceExt;

pub const ADMIN_PASSWORD: &str = "admin-pw";

pub fn config(dir: &Path) -> Config {
    Config {
        data_dir: dir.to_path_buf(),
        admin_password: Some(ADMIN_PASSWORD.to_string()),
        ..Config::default()
    }
}

/// An in-process service: requests go straight to the router.
#[derive(Clone)]
pub struct Client {
    pub state: AppState,
    app: Router,
}

impl Client {
    pub fn open(dir: &Path) -> Client {
        Client::with_config(config(dir))
    }

    pub fn with_config(config: Config) -> Client {
        let state = AppState::open(config).expect("store opens");
        Client {
            app: router(state.clone()),
            state,
        }
    }

    pub async fn call(&self, method: &str, path: &str, token: Option<&str>, body: Option<Json>) -> (StatusCode, Json) {
        let mut req = Request::builder().method(Method::from_bytes(method.as_bytes()).unwrap()).uri(path);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(serde_json::to_vec(&b).unwrap())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let json = if bytes.is_empty() {
            Json::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Json::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, json)
    }

    pub async fn get(&self, path: &str, token: &str) -> (StatusCode, Json) {
        self.call("GET", path, Some(token), None).await
    }

    pub async fn post(&self, path: &str, token: &str, body: Json) -> (StatusCode, Json) {
        self.call("POST", path, Some(token), Some(body)).await
    }

    pub async fn login(&self, username: &str, password: &str) -> String {
        let (status, body) = self
            .call("POST", "/api/login", None, Some(json!({"username": username, "password": password})))
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        body["token"].as_str().unwrap().to_string()
    }

    pub async fn admin(&self) -> String {
        self.login("admin", ADMIN_PASSWORD).await
    }

    /// Creates a user and returns their token.
    pub async fn user(&self, admin: &str, username: &str, role: Role) -> String {
        let (status, body) = self
            .post(
                "/api/users",
                admin,
                json!({"username": username, "password": format!("{username}-pw"), "role": role}),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        self.login(username, &format!("{username}-pw")).await
    }

    pub async fn upload_text(&self, token: &str, id: &str, text: &str) -> (StatusCode, Json) {
        self.post("/api/kbs", token, json!({"id": id, "text": text})).await
    }

    pub async fn upload_demo(&self, token: &str, id: &str) -> Json {
        let (status, body) = self.upload_text(token, id, DEMO_CHEST_KB).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body
    }

    /// Creates a session and returns its view.
    pub async fn session(&self, token: &str, body: Json) -> Json {
        let (status, view) = self.post("/api/sessions", token, body).await;
        assert_eq!(status, StatusCode::CREATED, "{view}");
        view
    }

    pub async fn answer(&self, token: &str, session: &str, answer: Json) -> (StatusCode, Json) {
        self.post(&format!("/api/sessions/{session}/answers"), token, answer).await
    }

    /// Answers questions from `answers` (variable to typed value), refusing
    /// anything else, until the session is done.
    pub async fn drive(&self, token: &str, mut view: Json, answers: &BTreeMap<String, Json>) -> Json {
        let id = view["id"].as_str().unwrap().to_string();
        while view["status"]["state"] == "needs_answer" {
            let var = view["status"]["variable"].as_str().unwrap().to_string();
            let body = match answers.get(&var) {
                Some(v) => json!({"variable": var, "value": v}),
                None => json!({"variable": var, "unknown": true}),
            };
            let (status, next) = self.answer(token, &id, body).await;
            assert_eq!(status, StatusCode::OK, "{next}");
            view = next;
        }
        assert_eq!(view["status"]["state"], "done");
        view
    }
}

pub fn b(v: bool) -> Json {
    json!({"kind": "bool", "value": v})
}

pub fn sym(s: &str) -> Json {
    json!({"kind": "symbol", "value": s})
}

pub fn demo_answers(items: &[(&str, Json)]) -> BTreeMap<String, Json> {
    items.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// The golden demo answers: fever, cough, no wheezing, purulent sputum.
pub fn golden() -> BTreeMap<String, Json> {
    demo_answers(&[("fever", b(true)), ("cough", b(true)), ("wheezing", b(false)), ("sputum", sym("purulent"))])
}

// permission matrix

/// Callers of the matrix: the three roles and an anonymous client.
pub const CALLERS: [&str; 4] = ["admin", "knowledge_engineer", "practitioner", "anonymous"];

/// `(method, route) -> allowed per caller`, read from the README table.
pub fn documented_matrix() -> BTreeMap<(String, String), [bool; 4]> {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let mut header: Option<Vec<String>> = None;
    let mut out = BTreeMap::new();
    for line in readme.lines() {
        let cells: Vec<String> = line
            .trim()
            .trim_matches('|')
            .split('|')
            .map(|c| c.trim().trim_matches('`').to_string())
            .collect();
        if cells.len() < 2 {
            continue;
        }
        if cells[0] == "Method" && cells[1] == "Route" {
            header = Some(cells);
            continue;
        }
        let Some(h) = &header else { continue };
        if !cells[1].starts_with("/api/") {
            continue;
        }
        let mut allowed = [false; 4];
        for (i, caller) in CALLERS.iter().enumerate() {
            let col = h.iter().position(|c| c == caller).unwrap_or_else(|| panic!("no {caller} column"));
            allowed[i] = match cells[col].as_str() {
                "yes" => true,
                "no" => false,
                other => panic!("unexpected cell {other:?} in {line}"),
            };
        }
        out.insert((cells[0].clone(), cells[1].clone()), allowed);
    }
    assert!(!out.is_empty(), "README has no permission table");
    out
}

/// Per-caller fixtures so every allowed call can succeed.
struct Fixture {
    token: Option<String>,
    waiting: String,
    done: String,
    case: String,
}

/// Calls every endpoint as every caller and records whether the call was
/// let through. Allowed calls must succeed with a 2xx status; denied calls
/// must answer 403 (or 401 without a token).
pub async fn observed_matrix(dir: &Path) -> Result<BTreeMap<(String, String), [bool; 4]>, String> {
    let c = Client::open(dir);
    let admin = c.admin().await;
    c.upload_demo(&admin, "chest").await;
    let mut fixtures = Vec::new();
    for (i, caller) in CALLERS.iter().enumerate() {
        let token = match i {
            0 => Some(admin.clone()),
            1 => Some(c.user(&admin, "ke", Role::KnowledgeEngineer).await),
            2 => Some(c.user(&admin, "pr", Role::Practitioner).await),
            _ => None,
        };
        // sessions and cases owned by this caller (the admin's for anonymous)
        let owner = token.clone().unwrap_or_else(|| admin.clone());
        let start = json!({"kb": "chest", "mode": "backward", "goal": "diagnosis"});
        let waiting = c.session(&owner, start.clone()).await["id"].as_str().unwrap().to_string();
        let done_view = c.session(&owner, start).await;
        let done_view = c.drive(&owner, done_view, &golden()).await;
        let done = done_view["id"].as_str().unwrap().to_string();
        let (_, case) = c.post(&format!("/api/sessions/{done}/archive"), &owner, json!({})).await;
        let case = case["id"].as_str().unwrap().to_string();
        // targets of destructive calls
        c.upload_demo(&admin, &format!("tmp-{caller}")).await;
        c.upload_demo(&admin, &format!("del-{caller}")).await;
        c.user(&admin, &format!("victim-{caller}"), Role::Practitioner).await;
        fixtures.push(Fixture {
            token,
            waiting,
            done,
            case,
        });
    }

    let mut out = BTreeMap::new();
    for endpoint in Endpoint::ALL {
        let (method, route) = endpoint.route();
        let mut allowed = [false; 4];
        for (i, caller) in CALLERS.iter().enumerate() {
            let f = &fixtures[i];
            let kb = format!("tmp-{caller}");
            let (path, body) = match endpoint {
                Endpoint::Login => (
                    route.to_string(),
                    Some(json!({"username": "admin", "password": ADMIN_PASSWORD})),
                ),
                Endpoint::ListUsers | Endpoint::ListKbs | Endpoint::ListCases => (route.to_string(), None),
                Endpoint::CreateUser => (
                    route.to_string(),
                    Some(json!({"username": format!("new-{caller}"), "password": "x", "role": "practitioner"})),
                ),
                Endpoint::DeleteUser => (format!("/api/users?username=victim-{caller}"), None),
                Endpoint::UploadKb => (
                    route.to_string(),
                    Some(json!({"id": format!("up-{caller}"), "text": DEMO_CHEST_KB})),
                ),
                Endpoint::GetKb => ("/api/kbs/chest".to_string(), None),
                Endpoint::DeleteKb => (format!("/api/kbs/del-{caller}"), None),
                Endpoint::AddRule => (
                    format!("/api/kbs/{kb}/rules"),
                    Some(json!({"text": "rule R9: if fever = false then suspicion := respiratory_infection"})),
                ),
                Endpoint::ReplaceRule => (
                    format!("/api/kbs/{kb}/rules"),
                    Some(json!({"text": "rule R1: if fever = true then suspicion := respiratory_infection"})),
                ),
                Endpoint::RemoveRule => (format!("/api/kbs/{kb}/rules?rule=R2"), None),
                Endpoint::Validate => (route.to_string(), Some(json!({"text": DEMO_CHEST_KB}))),
                Endpoint::CreateSession => (
                    route.to_string(),
                    Some(json!({"kb": "chest", "mode": "backward", "goal": "diagnosis"})),
                ),
                Endpoint::GetSession => (format!("/api/sessions/{}", f.waiting), None),
                Endpoint::Answer => (
                    format!("/api/sessions/{}/answers", f.waiting),
                    Some(json!({"variable": "fever", "value": b(true)})),
                ),
                Endpoint::Why => (format!("/api/sessions/{}/why", f.waiting), None),
                Endpoint::How => (format!("/api/sessions/{}/how/diagnosis", f.done), None),
                Endpoint::Archive => (format!("/api/sessions/{}/archive", f.done), None),
                Endpoint::GetCase => (format!("/api/cases/{}", f.case), None),
                Endpoint::ReplayCase => (format!("/api/cases/{}/replay", f.case), None),
            };
            let (status, resp) = c.call(method, &path, f.token.as_deref(), body).await;
            let denied = if f.token.is_none() {
                StatusCode::UNAUTHORIZED
            } else {
                StatusCode::FORBIDDEN
            };
            if status == denied {
                allowed[i] = false;
            } else if status.is_success() {
                allowed[i] = true;
            } else {
                return Err(format!("{method} {path} as {caller}: unexpected {status} {resp}"));
            }
        }
        out.insert((method.to_string(), route.to_string()), allowed);
    }
    Ok(out)
}
