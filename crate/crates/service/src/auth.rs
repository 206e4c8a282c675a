use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use argon2::password_hash::phc::PasswordHash;
use argon2::password_hash::{PasswordHasher, PasswordVerifier};
use argon2::Argon2;
use rand::RngCore;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Admin,
    KnowledgeEngineer,
    Practitioner,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Admin, Role::KnowledgeEngineer, Role::Practitioner];

    pub fn name(self) -> &'static str {
        match self {
            Role::Admin => "admin",
            Role::KnowledgeEngineer => "knowledge_engineer",
            Role::Practitioner => "practitioner",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: String,
    pub username: String,
    /// Argon2id PHC string.
    pub password_hash: String,
    pub role: Role,
    pub created_at: u64,
}

pub fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// `bytes` random bytes as lowercase hex.
pub fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rand::rng().fill_bytes(&mut buf);
    buf.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_password(password: &str) -> String {
    Argon2::default()
        .hash_password(password.as_bytes())
        .expect("argon2 with default parameters accepts any password")
        .to_string()
}

pub fn verify_password(password: &str, hash: &str) -> bool {
    PasswordHash::new(hash).is_ok_and(|parsed| {
        Argon2::default()
            .verify_password(password.as_bytes(), &parsed)
            .is_ok()
    })
}

/// Spends the same work as a real check, so unknown users and wrong
/// passwords cannot be told apart by timing.
pub fn verify_against_dummy(password: &str) {
    static DUMMY: OnceLock<String> = OnceLock::new();
    let hash = DUMMY.get_or_init(|| hash_password("chainshell-dummy-password"));
    let _ = verify_password(password, hash);
}

#[derive(Debug, Clone)]
struct TokenInfo {
    user_id: String,
    expires_at: SystemTime,
}

/// Issued bearer tokens. Held in memory only: a restart logs everyone out.
#[derive(Debug, Default)]
pub struct Tokens {
    issued: HashMap<String, TokenInfo>,
}

impl Tokens {
    /// A fresh 256-bit token for `user_id` and its expiry in Unix seconds.
    pub fn issue(&mut self, user_id: &str, ttl: Duration) -> (String, u64) {
        let now = SystemTime::now();
        self.issued.retain(|_, t| t.expires_at > now);
        let token = random_hex(32);
        let expires_at = now + ttl;
        self.issued.insert(
            token.clone(),
            TokenInfo {
                user_id: user_id.to_string(),
                expires_at,
            },
        );
        let secs = expires_at.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        (token, secs)
    }

    /// The user a live token belongs to; expired tokens are dropped.
    pub fn user_of(&mut self, token: &str) -> Option<String> {
        let info = self.issued.get(token)?;
        if info.expires_at <= SystemTime::now() {
            self.issued.remove(token);
            return None;
        }
        Some(info.user_id.clone())
    }

    pub fn revoke_user(&mut self, user_id: &str) {
        self.issued.retain(|_, t| t.user_id != user_id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_are_salted_and_verify() {
        let a = hash_password("pw");
        let b = hash_password("pw");
        assert_ne!(a, b);
        assert!(a.starts_with("$argon2id$"));
        assert!(verify_password("pw", &a));
        assert!(!verify_password("pW", &a));
        assert!(!verify_password("pw", "not a hash"));
    }

    #[test]
    fn tokens_expire_and_revoke() {
        let mut t = Tokens::default();
        let (tok, _) = t.issue("u1", Duration::from_secs(60));
        assert_eq!(tok.len(), 64);
        assert_eq!(t.user_of(&tok).as_deref(), Some("u1"));
        assert_eq!(t.user_of("nope"), None);
        let (short, _) = t.issue("u2", Duration::from_millis(1));
        std::thread::sleep(Duration::from_millis(5));
        assert_eq!(t.user_of(&short), None);
        t.revoke_user("u1");
        assert_eq!(t.user_of(&tok), None);
    }

    #[test]
    fn role_names_match_serde() {
        for role in Role::ALL {
            assert_eq!(serde_json::to_value(role).unwrap(), role.name());
        }
    }
}
