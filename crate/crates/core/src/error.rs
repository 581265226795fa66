use alloc::string::String;

/// Errors raised by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("no term survives vocabulary filtering")]
    EmptyVocabulary,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("vocabulary of {vocab} terms cannot support {topics} topics")]
    DegenerateVocabulary { topics: usize, vocab: usize },
    #[error("topic mixture is not on the probability simplex (sum {sum})")]
    InvalidMixture { sum: f64 },
    #[error("training set spans fewer than two classes")]
    SingleClassTrainSet,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("document has no tokens")]
    EmptyDocument,
    #[error("document has no active topics")]
    NoActiveTopics,
    #[error("explanation kind does not match gold standard kind")]
    KindMismatch,
    #[error("balancing parameter {0} outside [0, 1]")]
    InvalidLambda(f64),
    #[error("manipulated topic mixture is all-zero and no fallback is available")]
    DegenerateMixture,
    #[error("unlabeled pool is empty")]
    EmptyPool,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no test instance has a non-empty local gold standard")]
    AllLocalGsEmpty,
    #[error("class {class} has fewer than 3 documents")]
    ClassTooSmall { class: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid correction: {0}")]
    InvalidCorrection(String),
}

pub type Result<T> = core::result::Result<T, Error>;
