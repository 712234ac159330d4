use thiserror::Error;

/// Errors raised by graph construction, geometry and certificate routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    AsymmetricInput { asymmetry: f64 },

    #[error("loop at vertex {vertex} has zero gain")]
    ZeroLoop { vertex: String },

    #[error("edge ({tail}, {head}, {gain:?}) duplicates an existing edge")]
    DuplicateEdge {
        tail: String,
        head: String,
        gain: Vec<i64>,
    },

    #[error("gain {gain:?} has length {got}, expected dimension {expected}")]
    GainDimensionMismatch {
        gain: Vec<i64>,
        expected: usize,
        got: usize,
    },

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("duplicate vertex name `{0}`")]
    DuplicateVertex(String),

    #[error("dimension must be positive")]
    ZeroDimension,

    #[error("graph has no vertices")]
    EmptyGraph,

    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("lattice is flat (|det L| = {det:.3e})")]
    FlatLattice { det: f64 },

    #[error("framework is not affinely spanning")]
    NotAffinelySpanning,

    #[error("weights are not a fixed-lattice equilibrium stress (residual {residual:.3e})")]
    NotFixedLatticeStress { residual: f64 },

    #[error("loop gains do not give a basis of symmetric matrices")]
    SingularGainBasis,

    #[error("stress-matrix ranks disagree: {0}")]
    RankMismatch(String),

    #[error("stress is not proper on edge {edge} ({marking}, weight {weight})")]
    ImproperStress {
        edge: usize,
        marking: &'static str,
        weight: f64,
    },

    #[error("edge {edge} has zero length")]
    DegenerateEdge { edge: usize },

    #[error("not a spiderweb: {0}")]
    NotSpiderweb(String),

    #[error("energy formulations disagree: {a} vs {b}")]
    FormMismatch { a: f64, b: f64 },

    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),

    #[error("kernel basis is degenerate: {0}")]
    DegenerateKernel(String),

    #[error("lattice volume is {volume}, expected 1")]
    VolumeNotOne { volume: f64 },

    #[error("vertex pairs violate the construction conditions: {0}")]
    PairConditionViolated(String),

    #[error("lattice vectors p(v_i) - p(u_i) are linearly dependent")]
    DependentLatticeVectors,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("finite framework is invalid: {0}")]
    InvalidFinite(String),

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("missing {0}")]
    Missing(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
