//! Which roles may call which endpoint. Every handler checks its entry
//! here; the README table documents the same matrix.

use crate::auth::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Login,
    ListUsers,
    CreateUser,
    DeleteUser,
    ListKbs,
    UploadKb,
    GetKb,
    DeleteKb,
    AddRule,
    ReplaceRule,
    RemoveRule,
    Validate,
    CreateSession,
    GetSession,
    Answer,
    Why,
    How,
    Archive,
    ListCases,
    GetCase,
    ReplayCase,
}

/// Who may call an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Public,
    Roles(&'static [Role]),
}

const ANY: &[Role] = &[Role::Admin, Role::KnowledgeEngineer, Role::Practitioner];
const EDITORS: &[Role] = &[Role::Admin, Role::KnowledgeEngineer];
const ADMIN: &[Role] = &[Role::Admin];

impl Endpoint {
    pub const ALL: [Endpoint; 21] = [
        Endpoint::Login,
        Endpoint::ListUsers,
        Endpoint::CreateUser,
        Endpoint::DeleteUser,
        Endpoint::ListKbs,
        Endpoint::UploadKb,
        Endpoint::GetKb,
        Endpoint::DeleteKb,
        Endpoint::AddRule,
        Endpoint::ReplaceRule,
        Endpoint::RemoveRule,
        Endpoint::Validate,
        Endpoint::CreateSession,
        Endpoint::GetSession,
        Endpoint::Answer,
        Endpoint::Why,
        Endpoint::How,
        Endpoint::Archive,
        Endpoint::ListCases,
        Endpoint::GetCase,
        Endpoint::ReplayCase,
    ];

    /// Method and route template.
    pub fn route(self) -> (&'static str, &'static str) {
        match self {
            Endpoint::Login => ("POST", "/api/login"),
            Endpoint::ListUsers => ("GET", "/api/users"),
            Endpoint::CreateUser => ("POST", "/api/users"),
            Endpoint::DeleteUser => ("DELETE", "/api/users"),
            Endpoint::ListKbs => ("GET", "/api/kbs"),
            Endpoint::UploadKb => ("POST", "/api/kbs"),
            Endpoint::GetKb => ("GET", "/api/kbs/{id}"),
            Endpoint::DeleteKb => ("DELETE", "/api/kbs/{id}"),
            Endpoint::AddRule => ("POST", "/api/kbs/{id}/rules"),
            Endpoint::ReplaceRule => ("PUT", "/api/kbs/{id}/rules"),
            Endpoint::RemoveRule => ("DELETE", "/api/kbs/{id}/rules"),
            Endpoint::Validate => ("POST", "/api/validate"),
            Endpoint::CreateSession => ("POST", "/api/sessions"),
            Endpoint::GetSession => ("GET", "/api/sessions/{id}"),
            Endpoint::Answer => ("POST", "/api/sessions/{id}/answers"),
            Endpoint::Why => ("GET", "/api/sessions/{id}/why"),
            Endpoint::How => ("GET", "/api/sessions/{id}/how/{variable}"),
            Endpoint::Archive => ("POST", "/api/sessions/{id}/archive"),
            Endpoint::ListCases => ("GET", "/api/cases"),
            Endpoint::GetCase => ("GET", "/api/cases/{id}"),
            Endpoint::ReplayCase => ("POST", "/api/cases/{id}/replay"),
        }
    }

    pub fn access(self) -> Access {
        match self {
            Endpoint::Login => Access::Public,
            Endpoint::ListUsers | Endpoint::CreateUser | Endpoint::DeleteUser => Access::Roles(ADMIN),
            Endpoint::UploadKb
            | Endpoint::DeleteKb
            | Endpoint::AddRule
            | Endpoint::ReplaceRule
            | Endpoint::RemoveRule
            | Endpoint::Validate => Access::Roles(EDITORS),
            Endpoint::ListKbs
            | Endpoint::GetKb
            | Endpoint::CreateSession
            | Endpoint::GetSession
            | Endpoint::Answer
            | Endpoint::Why
            | Endpoint::How
            | Endpoint::Archive
            | Endpoint::ListCases
            | Endpoint::GetCase
            | Endpoint::ReplayCase => Access::Roles(ANY),
        }
    }

    pub fn allows(self, role: Role) -> bool {
        match self.access() {
            Access::Public => true,
            Access::Roles(roles) => roles.contains(&role),
        }
    }
}
