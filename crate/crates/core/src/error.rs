use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input weight {0} is outside [0, 1]")]
    InputWeight(f64),

    #[error("angle {0} is not finite")]
    NonFiniteAngle(f64),

    #[error("invalid joint table: {0}")]
    InvalidTable(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("conditioning event has zero probability: {0}")]
    ZeroProbability(String),

    #[error("settings grid for {0} is empty")]
    EmptyGrid(&'static str),

    #[error("event count must be at least 1")]
    NoEvents,

    #[error("setting index ({alpha_index}, {beta_index}) outside a {alphas}x{betas} grid")]
    SettingOutOfRange {
        alpha_index: usize,
        beta_index: usize,
        alphas: usize,
        betas: usize,
    },

    #[error("demon input weight {demon} disagrees with the experiment's input weight {experiment}")]
    DemonMismatch { demon: f64, experiment: f64 },

    #[error("sparse stratum: {0}")]
    SparseCells(String),

    #[error("variable `{0}` is constant")]
    DegenerateVariable(String),

    #[error("invalid statement: {0}")]
    InvalidStatement(String),

    #[error("significance level {0} is outside (0, 1)")]
    InvalidLevel(f64),

    #[error("only {found} events at setting pair ({alpha_index}, {beta_index}); need {required}")]
    InsufficientEvents {
        alpha_index: usize,
        beta_index: usize,
        found: u64,
        required: u64,
    },

    #[error("setting pair not present in the batch: {0}")]
    MissingSettingPair(String),

    #[error("batch has no `{0}` column")]
    MissingColumn(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("{found} nodes exceeds the enumeration budget of {limit}")]
    NodeBudget { found: usize, limit: usize },

    #[error("joint table would have {cells} cells (limit {limit})")]
    TableTooLarge { cells: usize, limit: usize },

    #[error("invalid conditional probability table: {0}")]
    InvalidCpt(String),

    #[error("parameter out of range: {0}")]
    ParameterRange(String),

    #[error("statement {0} does not hold in the unperturbed model")]
    NotIndependentAtBaseline(String),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("malformed batch: {0}")]
    MalformedBatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
