use std::fmt;

/// Failures of a command-line run, each mapped to an exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("line {line}{}: {message}", key.as_ref().map(|k| format!(", key `{k}`")).unwrap_or_default())]
    Parse {
        line: usize,
        key: Option<String>,
        message: String,
    },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Core(#[from] noknow_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Machine-readable error category printed with every failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Numerical,
    Resource,
    Solver,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Numerical => 3,
            Category::Resource => 4,
            Category::Solver => 5,
            Category::Io => 1,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Config => "config",
            Category::Numerical => "numerical",
            Category::Resource => "resource",
            Category::Solver => "solver",
            Category::Io => "io",
        })
    }
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn category(&self) -> Category {
        use noknow_core::Error as E;
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => Category::Config,
            CliError::Io { .. } | CliError::Csv(_) => Category::Io,
            CliError::Core(e) => match e.root() {
                E::Numerical(_) | E::State(_) => Category::Numerical,
                E::Resource(_) => Category::Resource,
                E::Solver(_) => Category::Solver,
                _ => Category::Config,
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category().exit_code()
    }
}
