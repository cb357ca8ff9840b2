use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("jet level {level} out of range (prolongation order is {max})")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("unknown jet coordinate: {0}")]
    UnknownCoordinate(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unknown role token `{0}`")]
    UnknownRole(String),

    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow { line: usize, expected: usize, found: usize },

    #[error("line {line}: cannot parse `{token}` as a number")]
    BadNumber { line: usize, token: String },

    #[error("duplicate rows: {}", format_pairs(.0))]
    DuplicateRows(Vec<(usize, usize)>),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("invalid sampling spec: {0}")]
    InvalidSpec(String),

    #[error("requested {k} neighbors but the cloud has only {n} points")]
    TooManyNeighbors { k: usize, n: usize },

    #[error("stencil size {k} too small: the chart fit needs k >= C(l+d, d) = {required} (l = {degree}, d = {dim})")]
    StencilTooSmall {
        k: usize,
        required: usize,
        degree: usize,
        dim: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate stencil at point {index}: neighbor differences have rank below {dim}")]
    DegenerateStencil { index: usize, dim: usize },

    #[error("rank-deficient Vandermonde matrix at point {index} (reciprocal condition {rcond:.3e})")]
    RankDeficient { index: usize, rcond: f64 },

    #[error("chain-rule matrix at point {index} has condition number {condition:.3e}")]
    IllConditioned { index: usize, condition: f64 },

    #[error("level exhausted: cloud is already at level {0}")]
    LevelExhausted(usize),

    #[error("{dropped} of {total} points degenerate, above the allowed fraction {limit}")]
    TooManyDegenerate { dropped: usize, total: usize, limit: f64 },

    #[error("empty normal space: manifold dimension {dim} equals ambient dimension")]
    EmptyNormalSpace { dim: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("all-zero system: every ansatz direction is a symmetry (degenerate input)")]
    ZeroSystem,

    #[error("subspace ranks differ: {0} vs {1}")]
    RankMismatch(usize, usize),

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("total derivative would exceed jet order {0}")]
    OrderOverflow(usize),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_pairs(pairs: &[(usize, usize)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("rows {a} and {b}"))
        .collect::<Vec<_>>()
        .join(", ")
}
