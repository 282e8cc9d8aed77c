//! JSON output, error classification and exit codes.

use bbopt_core::Error;
use serde_json::{json, Value};
use std::io::IsTerminal;
use std::path::Path;
use std::process::ExitCode;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Usage = 1,
    Input = 2,
    Solve = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub name: &'static str,
    pub message: String,
    pub span: Option<bbopt_core::Span>,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Usage,
            name: "usage",
            message: msg.into(),
            span: None,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError {
            kind: Kind::Input,
            name: "io",
            message: format!("{}: {e}", path.display()),
            span: None,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "error": { "kind": self.name, "message": self.message, "exit_code": self.kind as u8 } });
        if let Some(s) = self.span {
            v["error"]["line"] = json!(s.line);
            v["error"]["col"] = json!(s.col);
        }
        v
    }

    /// Prints the structured error on stdout and a one-line summary on
    /// stderr, colored only on a terminal without `NO_COLOR`.
    pub fn emit(&self) -> ExitCode {
        println!(
            "{}",
            serde_json::to_string_pretty(&self.to_json()).expect("error JSON serializes")
        );
        let stderr = std::io::stderr();
        let color =
            stderr.is_terminal() && std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty());
        if color {
            eprintln!("\x1b[1;31merror\x1b[0m: {}", self.message);
        } else {
            eprintln!("error: {}", self.message);
        }
        ExitCode::from(self.kind as u8)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (kind, name, span) = match &e {
            Error::Syntax { span, .. } => (Kind::Input, "syntax", Some(*span)),
            Error::Type { span, .. } => (Kind::Input, "type", Some(*span)),
            Error::Desugar { span, .. } => (Kind::Input, "desugar", Some(*span)),
            Error::DuplicateBinding(_) => (Kind::Input, "duplicate_binding", None),
            Error::Undefined(_) => (Kind::Input, "undefined", None),
            Error::Invalid(_) => (Kind::Input, "invalid", None),
            Error::MissingPolicy(_) => (Kind::Input, "missing_policy", None),
            Error::ZeroEvidence(_) => (Kind::Solve, "zero_evidence", None),
            Error::TooLarge(_) => (Kind::Solve, "too_large", None),
            _ => (Kind::Solve, "internal", None),
        };
        CliError {
            kind,
            name,
            message: e.to_string(),
            span,
        }
    }
}

pub fn json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}
