use thiserror::Error;

use crate::corpus::InstanceKey;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate instance key {0} (line {1})")]
    DuplicateKey(InstanceKey, usize),

    #[error("execution records reference unknown instances: {}", join_keys(.0))]
    DanglingKeys(Vec<InstanceKey>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("unsupported language `{0}`")]
    UnsupportedLanguage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("transform error: {0}")]
    Transform(String),

    #[error("embedding backend error: {0}")]
    Backend(String),

    #[error("malformed embedding file: {0}")]
    Format(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("{component}: {source}")]
    Component {
        component: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn within(self, component: &'static str) -> Self {
        Error::Component {
            component,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping component attribution wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Component { source, .. } => source.root(),
            other => other,
        }
    }
}

fn join_keys(keys: &[InstanceKey]) -> String {
    keys.iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, Error>;
