use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration diverged at step {step} (t = {time:.6}): {reason}")]
    Diverged {
        step: usize,
        time: f64,
        reason: String,
    },

    #[error("ensemble failed: runs {failed:?} diverged (first: {first})")]
    EnsembleDiverged { failed: Vec<usize>, first: Box<Error> },

    #[error("step size dt = {dt} exceeds tau_c/10 = {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Domain(_) | Error::StepTooLarge { .. } => 2,
            Error::Diverged { .. } | Error::EnsembleDiverged { .. } => 3,
            Error::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
