use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {cause}")]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("{stage}: {cause}")]
    Stage {
        stage: String,
        cause: lod_core::Error,
    },

    #[error(transparent)]
    Core(#[from] lod_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, cause: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, name: impl FnOnce() -> String) -> Result<T>;
}

impl<T> StageExt<T> for std::result::Result<T, lod_core::Error> {
    fn stage(self, name: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|cause| Error::Stage {
            stage: name(),
            cause,
        })
    }
}
