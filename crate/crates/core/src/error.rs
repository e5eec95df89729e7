//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ── ingestion / data model ──
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column `{col}`: `{value}`")]
    NonNumericCell { row: usize, col: String, value: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateSampleId(String),
    #[error("non-finite value: {0}")]
    NonFiniteValue(String),
    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),
    #[error("unknown cohort `{0}`")]
    UnknownCohort(String),
    #[error("no score row for sample `{0}`")]
    MissingScoreForSample(String),
    #[error("invalid group split: {0}")]
    InvalidGroupSplit(String),

    // ── preprocessing ──
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("all features have zero variance")]
    AllFeaturesConstant,
    #[error("batch `{0}` has fewer than 2 samples")]
    BatchTooSmall(String),
    #[error("no batches present")]
    NoBatches,
    #[error("unknown batch `{0}`")]
    UnknownBatch(String),
    #[error("zero-variance feature: {0}")]
    ZeroVariance(String),
    #[error("fit fingerprint mismatch: {0}")]
    FingerprintMismatch(String),

    // ── labeling ──
    #[error("degenerate score distribution (all values equal)")]
    DegenerateDistribution,
    #[error("too few samples: {0}")]
    TooFewSamples(String),

    // ── feature selection / learners ──
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("design matrix is not standardized: {0}")]
    NonStandardizedDesign(String),
    #[error("labels contain a single class")]
    SingleClassLabels,
    #[error("class `{label}` has {count} members, fewer than {folds} folds")]
    ClassTooSmallForFolds { label: u8, count: usize, folds: usize },
    #[error("selected index out of range: {0}")]
    IndexOutOfRange(usize),
    #[error("chosen hyperparameter point is not in the declared grid")]
    ChosenPointNotInGrid,

    // ── evaluation ──
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("cohort leakage: {0}")]
    CohortLeakage(String),
    #[error("alignment error: {0}")]
    AlignmentError(String),

    // ── cohort statistics ──
    #[error("ANOVA needs at least 2 groups")]
    TooFewGroups,
    #[error("group {0} is empty or too small")]
    EmptyGroup(usize),
    #[error("expected cell count is zero at ({row}, {col})")]
    ZeroExpectedCell { row: usize, col: usize },
    #[error("log-rank test needs at least one event")]
    NoEvents,
    #[error("negative survival time: {0}")]
    NegativeTime(f64),

    // ── configuration / plumbing ──
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Exit-code classes used by the CLI: 2 validation, 3 data, 4 internal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Data,
    Internal,
}

impl Error {
    pub fn stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            ConfigInvalid(_) | InvalidGroupSplit(_) | ChosenPointNotInGrid => ErrorClass::Validation,
            Io(_) | Json(_) => ErrorClass::Internal,
            Stage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    pub fn kind(&self) -> &'static str {
        use Error::*;
        match self {
            MissingColumn(_) => "MissingColumn",
            NonNumericCell { .. } => "NonNumericCell",
            DuplicateSampleId(_) => "DuplicateSampleId",
            NonFiniteValue(_) => "NonFiniteValue",
            FeatureMismatch(_) => "FeatureMismatch",
            UnknownCohort(_) => "UnknownCohort",
            MissingScoreForSample(_) => "MissingScoreForSample",
            InvalidGroupSplit(_) => "InvalidGroupSplit",
            InsufficientSamples(_) => "InsufficientSamples",
            AllFeaturesConstant => "AllFeaturesConstant",
            BatchTooSmall(_) => "BatchTooSmall",
            NoBatches => "NoBatches",
            UnknownBatch(_) => "UnknownBatch",
            ZeroVariance(_) => "ZeroVariance",
            FingerprintMismatch(_) => "FingerprintMismatch",
            DegenerateDistribution => "DegenerateDistribution",
            TooFewSamples(_) => "TooFewSamples",
            DimensionMismatch(_) => "DimensionMismatch",
            NonStandardizedDesign(_) => "NonStandardizedDesign",
            SingleClassLabels => "SingleClassLabels",
            ClassTooSmallForFolds { .. } => "ClassTooSmallForFolds",
            IndexOutOfRange(_) => "IndexOutOfRange",
            ChosenPointNotInGrid => "ChosenPointNotInGrid",
            LengthMismatch { .. } => "LengthMismatch",
            EmptyInput => "EmptyInput",
            CohortLeakage(_) => "CohortLeakage",
            AlignmentError(_) => "AlignmentError",
            TooFewGroups => "TooFewGroups",
            EmptyGroup(_) => "EmptyGroup",
            ZeroExpectedCell { .. } => "ZeroExpectedCell",
            NoEvents => "NoEvents",
            NegativeTime(_) => "NegativeTime",
            ConfigInvalid(_) => "ConfigInvalid",
            Stage { source, .. } => source.kind(),
            Io(_) => "Io",
            Csv(_) => "Csv",
            Json(_) => "Json",
        }
    }
}
