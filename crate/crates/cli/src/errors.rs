//! Failure model shared by every command.
//!
//! A run either succeeds (exit 0) or fails with a list of errors printed to
//! stderr as JSON. Configuration and data problems exit 1, backend problems
//! exit 2; when both kinds are present the backend code wins so automation
//! retries the run instead of blaming its inputs.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Config,
    Data,
    Backend,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorItem {
    pub kind: ErrorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_id: Option<String>,
    pub message: String,
}

impl ErrorItem {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        ErrorItem {
            kind,
            target_id: None,
            message: message.into(),
        }
    }

    pub fn for_target(
        kind: ErrorKind,
        target_id: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        ErrorItem {
            kind,
            target_id: Some(target_id.into()),
            message: message.into(),
        }
    }
}

/// Aggregated failure of a command; always carries at least one item.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub errors: Vec<ErrorItem>,
}

impl Failure {
    pub fn new(errors: Vec<ErrorItem>) -> Self {
        debug_assert!(!errors.is_empty());
        Failure { errors }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Failure::new(vec![ErrorItem::new(ErrorKind::Config, message)])
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure::new(vec![ErrorItem::new(ErrorKind::Data, message)])
    }

    pub fn exit_code(&self) -> u8 {
        if self.errors.iter().any(|e| e.kind == ErrorKind::Backend) {
            2
        } else {
            1
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, item) in self.errors.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            match &item.target_id {
                Some(id) => write!(f, "[{:?}] {}: {}", item.kind, id, item.message)?,
                None => write!(f, "[{:?}] {}", item.kind, item.message)?,
            }
        }
        Ok(())
    }
}

impl std::error::Error for Failure {}

/// Maps an IO error on a named file to a data error.
pub fn io_failure(path: &std::path::Path, err: &std::io::Error) -> Failure {
    Failure::data(format!("{}: {err}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_errors_dominate_exit_code() {
        let f = Failure::new(vec![
            ErrorItem::new(ErrorKind::Data, "bad line"),
            ErrorItem::for_target(ErrorKind::Backend, "7", "connection refused"),
        ]);
        assert_eq!(f.exit_code(), 2);
        assert_eq!(Failure::config("x").exit_code(), 1);
        assert_eq!(Failure::data("x").exit_code(), 1);
    }

    #[test]
    fn serializes_to_error_list_with_optional_target() {
        let f = Failure::new(vec![ErrorItem::for_target(
            ErrorKind::Backend,
            "3",
            "timeout",
        )]);
        let json = serde_json::to_value(&f).unwrap();
        assert_eq!(json["errors"][0]["kind"], "backend");
        assert_eq!(json["errors"][0]["target_id"], "3");
        let bare = serde_json::to_value(Failure::config("no dataset")).unwrap();
        assert!(bare["errors"][0].get("target_id").is_none());
    }
}
