use thiserror::Error;

/// Errors raised by the numerical layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("point lies on the boundary curve (distance {distance:e})")]
    OnBoundary { distance: f64 },

    #[error("degree unstable: distance {distance:e} to boundary image below margin {margin:e}")]
    UnstableDegree { distance: f64, margin: f64 },

    #[error("degenerate boundary: skipped {skipped_fraction:.4} of the image box{}", context_suffix(.context))]
    DegenerateBoundary {
        skipped_fraction: f64,
        context: String,
    },

    #[error("map is not injective on samples: {0}")]
    NotInjective(String),

    #[error("inversion failed: {unresolved} of {interior} interior nodes unresolved")]
    InversionFailure { unresolved: usize, interior: usize },

    #[error("insufficient coverage: {0}")]
    Coverage(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

fn context_suffix(context: &str) -> String {
    if context.is_empty() {
        String::new()
    } else {
        format!(" ({context})")
    }
}

impl Error {
    /// Wraps the error with a stage label, e.g. `slice k=1 t=0.25 j=3`.
    pub fn at(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error after peeling stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
