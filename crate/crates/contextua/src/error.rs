//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    // distributions
    #[error("weights do not sum to one: total {total}")]
    NotNormalized { total: String },
    #[error("distribution has empty support")]
    EmptySupport,
    #[error("cannot renormalize: family sums to zero")]
    ZeroTotal,
    #[error("semiring {0} does not support renormalization")]
    NotNormalizable(&'static str),
    #[error("kernel undefined at support point {point}")]
    UndefinedKernel { point: String },
    #[error("weight {0} is not a valid element of the non-negative rational semiring")]
    NegativeWeight(String),
    #[error("cannot parse {0:?} as a semiring element")]
    BadWeight(String),

    // trees, posets, maps
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("nodes {x} and {y} are not comparable")]
    NotComparable { x: String, y: String },
    #[error("map is not a fibration: {0}")]
    NotAFibration(String),
    #[error("map is not order-preserving: {0}")]
    NotMonotone(String),
    #[error("not an embedding: {0}")]
    NotAnEmbedding(String),
    #[error("unknown node {0}")]
    UnknownNode(String),

    // weighted relations
    #[error("set mismatch: {0}")]
    Mismatch(String),
    #[error("relation is not entire: {src} has no successor")]
    NotEntire { src: String },
    #[error("support of the distribution at {src} is not contained in the relation image")]
    SupportEscapesRelation { src: String },
    #[error("fiber distribution at {src} does not live on the fiber")]
    FiberMismatch { src: String },
    #[error("map underlying the weighted map is not surjective onto {0}")]
    NotSurjective(String),
    #[error("surjections do not factor: {0}")]
    NotAFactorization(String),

    // presheaf-level structures
    #[error("clock legs are not synchronized: {0}")]
    NotSynchronized(String),
    #[error("missing external-choice weights at stage {0}")]
    MissingWeights(String),

    // scenarios and logic
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("empirical model violates no-signalling; run the no-signalling check for a witness")]
    SignallingInput,
    #[error("distribution is not a global section of the model: {0}")]
    NotASection(String),
    #[error("assignment is not support-consistent with every context table")]
    NotAWitness,
    #[error("formula set does not contain <i><e>T for maximal context {0}")]
    HypothesisViolated(String),
    #[error("formula is not legal for this scenario: {0}")]
    NotLegal(String),
    #[error("unknown transition label {0}")]
    UnknownLabel(String),
    #[error("unknown propositional letter {0}")]
    UnknownLetter(String),
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },

    // i/o surface
    #[error("schema error: {0}")]
    Schema(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
