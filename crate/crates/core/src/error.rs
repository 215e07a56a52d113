use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("malformed word: {0}")]
    MalformedWord(String),

    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },

    #[error("inverse images are required for this operation; supply `invimages <gen> -> <word>` lines")]
    MissingInverseImages,

    #[error("inverse images do not invert the images: {0}")]
    BadInverseImages(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("edge {edge}: image path {detail}")]
    EndpointMismatch { edge: String, detail: String },

    #[error("unknown id `{0}`")]
    DanglingId(String),

    #[error("the map does not fix the basepoint; stabilize it first")]
    RequiresStabilization,

    #[error("vertex `{0}` is not in the basepoint component")]
    DifferentComponents(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("chain is not certified geometric: {0}")]
    NotGeometric(String),

    #[error("vertices {0} and {1} are not adjacent in the overlap graph")]
    NonAdjacent(String, String),

    #[error("{0} lies outside the built ball; enlarge the radius")]
    EnlargeBall(String),

    #[error("series needs at least one term")]
    ZeroTerms,

    #[error("matrix shape mismatch: {0}")]
    Shape(String),

    #[error("group contexts differ")]
    ContextMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
