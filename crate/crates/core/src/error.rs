use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty set")]
    EmptySet,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point {point:?} lies outside the box")]
    OutsideBox { point: Vec<f64> },

    #[error("empty cube sample: cube does not contain any grid node")]
    EmptyCubeSample,

    #[error("cube is not a member of the decomposition")]
    NotInDecomposition,

    #[error("cube {inner} is not contained in cube {outer}")]
    NotNested { inner: String, outer: String },

    #[error("function is not {lipschitz}-Lipschitz on E: pair ({i}, {j}) has |f_i - f_j| = {diff} > L*d = {bound}")]
    NotLipschitz {
        lipschitz: f64,
        i: usize,
        j: usize,
        diff: f64,
        bound: f64,
    },

    #[error("graph is disconnected: node {0} is unreachable")]
    Disconnected(usize),

    #[error("degenerate metric: d(x, y) = 0 for x != y")]
    DegenerateMetric,

    #[error("duplicate points")]
    DuplicatePoints,

    #[error("cubes {0} and {1} overlap")]
    Overlap(usize, usize),

    #[error("pair for cube {0} lies outside the admissible region")]
    PairOutside(usize),

    #[error("cubes must have equal size (cube {0} differs)")]
    UnequalCubes(usize),

    #[error("grid too small: need at least {needed} nodes per axis, have {have}")]
    GridTooSmall { needed: usize, have: usize },

    #[error("point {0:?} is not a grid node")]
    NotANode(Vec<f64>),

    #[error("point is too close to the grid boundary for the derivative stencil")]
    StencilOutOfRange,

    #[error("mismatched point sets")]
    MismatchedSets,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
