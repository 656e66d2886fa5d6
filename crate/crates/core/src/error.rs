use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no display record for participant {participant_id:?}, image {image_id:?}")]
    MissingDisplayRecord {
        participant_id: String,
        image_id: String,
    },

    #[error("group size {k} is larger than the {available} available participants")]
    GroupTooLarge { k: usize, available: usize },

    #[error("image {width}x{height} is smaller than the {patch}px patch")]
    ImageTooSmall { width: u32, height: u32, patch: u32 },

    #[error("no positive labels to train on")]
    NoPositiveLabels,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
