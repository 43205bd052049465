use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LsysError {
    #[error("invalid symbol {ch:?} at position {position}")]
    InvalidSymbol { ch: char, position: usize },
    #[error("expansion of {len} symbols exceeds cap {cap}{}", depth.map(|d| format!(" at depth {d}")).unwrap_or_default())]
    CapExceeded { len: usize, cap: usize, depth: Option<u8> },
    #[error("position {index} is not a forward symbol (found {found:?})")]
    NotAForwardSymbol { index: usize, found: Option<char> },
    #[error("assignment has {found} entries, expected {expected}")]
    AssignmentLength { expected: usize, found: usize },
    #[error("f-rule has no forward symbol")]
    RuleWithoutForward,
    #[error("invalid angle {0}")]
    InvalidAngle(f64),
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("trajectory has no segments")]
    EmptyTrajectory,
    #[error("image dimensions {found:?} do not match {expected:?}")]
    DimensionMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("need at least {needed} reference renders, got {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("invalid ink parameters: {0}")]
    InvalidInk(String),
    #[error("malformed image file: {0}")]
    Format(String),
    #[error("{}: {source}", path.display())]
    File { path: std::path::PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("grammar is invalid: {0}")]
    Invalid(String),
    #[error("system is not in the support of the grammar: {0}")]
    NotInSupport(String),
    #[error("no sample satisfied the constraints after {attempts} attempts (last failure: {last_failure})")]
    RejectionLimitExceeded { attempts: usize, last_failure: String },
    #[error("support exceeds {limit} derivations")]
    SupportTooLarge { limit: usize },
    #[error("derivation exceeded {limit} nodes")]
    DerivationTooLarge { limit: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("distractor {index} renders identically to the true answer")]
    DegenerateDistractor { index: usize },
    #[error("distractors {0} and {1} render identically")]
    DuplicateDistractor(usize, usize),
    #[error("expected {expected} candidates, got {found}")]
    CandidateCount { expected: usize, found: usize },
    #[error("{found} segments is below the minimum of {min}")]
    TooFewSegments { found: usize, min: usize },
    #[error("{found} segments is above the maximum of {max}")]
    TooManySegments { found: usize, max: usize },
    #[error("image has no black pixels")]
    EmptyImage,
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("could not build suite: {0}")]
    Suite(String),
    #[error(transparent)]
    Lsys(#[from] LsysError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("no observed images")]
    NoObservations,
    #[error("observed depth {0} exceeds the maximum depth")]
    InvalidDepth(u8),
    #[error("depth {0} is observed more than once")]
    DuplicateDepth(u8),
    #[error("axiom of {len} symbols exceeds the symbol cap {cap}")]
    AxiomExceedsCap { len: usize, cap: usize },
    #[error("no candidates to score")]
    NoCandidates,
    #[error(transparent)]
    Render(#[from] RenderError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("{0}: {1}")]
    Parse(std::path::PathBuf, String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ConfigError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        ConfigError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("{0}: {1}")]
    Parse(std::path::PathBuf, String),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl FileError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        FileError::Io { path: path.to_path_buf(), source }
    }
}
