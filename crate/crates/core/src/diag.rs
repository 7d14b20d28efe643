//! Diagnostics shared by the checking passes.

use std::fmt;

use serde::Serialize;

use crate::ast::{NodeId, Span};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Note,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Stable machine-readable kind, e.g. `DelegationTooSlow`.
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

impl Diagnostic {
    pub fn error(kind: &str, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Error,
            kind: kind.to_string(),
            message: message.into(),
            method: None,
            node: None,
            span: None,
        }
    }

    pub fn note(kind: &str, message: impl Into<String>) -> Diagnostic {
        Diagnostic { severity: Severity::Note, ..Diagnostic::error(kind, message) }
    }

    pub fn at(mut self, node: NodeId, span: Span) -> Diagnostic {
        self.node = Some(node);
        self.span = Some(span);
        self
    }

    pub fn in_method(mut self, method: impl Into<String>) -> Diagnostic {
        self.method = Some(method.into());
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// `file:line:col: severity[kind]: message`
    pub fn render(&self, file: &str) -> String {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Note => "note",
        };
        match self.span {
            Some(s) => format!("{file}:{}:{}: {sev}[{}]: {}", s.line, s.col, self.kind, self.message),
            None => format!("{file}: {sev}[{}]: {}", self.kind, self.message),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render("<input>"))
    }
}
