use qwalkdec_core::Error as CoreError;

/// Runner failures, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("invalid config: {0}")]
    Parse(String),

    #[error("sweep has {size} points, above the cap of {cap}")]
    Cap { size: usize, cap: usize },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl RunError {
    pub fn core(context: impl Into<String>, source: CoreError) -> Self {
        RunError::Core {
            context: context.into(),
            source,
        }
    }

    /// 2: config invalid, 3: numerical contract violation, 4: resource cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } | RunError::Parse(_) => 2,
            RunError::Cap { .. } => 4,
            RunError::Io(_) => 1,
            RunError::Core { source, .. } => match source {
                CoreError::Size(_) => 4,
                CoreError::NotUnitary { .. } | CoreError::Contract(_) | CoreError::Integration { .. } => 3,
                _ => 2,
            },
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}
