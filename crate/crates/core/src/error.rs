use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline stage named in experiment diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Split,
    Binarize,
    Detect,
    Reweight,
    Fit,
    Evaluate,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Split => "split",
            Stage::Binarize => "binarize",
            Stage::Detect => "detect",
            Stage::Reweight => "reweight",
            Stage::Fit => "fit",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column `{column}`: unparseable numeric cell `{value}`")]
    UnparseableNumber {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: label value outside declared pair: `{value}`")]
    LabelOutsidePair { row: usize, value: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("degenerate attribute `{0}`: one group is empty")]
    DegenerateAttribute(String),

    #[error("attribute `{0}` has an empty group")]
    EmptyGroup(String),

    #[error("attribute `{0}` has no privileged side set")]
    PrivilegedUnset(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("length mismatch: {what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{0} undefined")]
    UndefinedMetric(&'static str),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("unreachable cell: group {group}, label {label} has zero prior weight")]
    UnreachableCell { group: u32, label: u8 },

    #[error("invalid level weights: {0}")]
    InvalidLevelWeights(String),

    #[error("no group assignment for attribute `{0}`")]
    MissingAssignment(String),

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("model expects {expected} columns, data has {found}")]
    ColumnMismatch { expected: usize, found: usize },

    #[error("no detectable attributes: every candidate column is degenerate")]
    NoDetectableAttributes,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

/// Tags an error with the pipeline stage it came from, once.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
