use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("weight sequence is empty")]
    EmptyWeights,
    #[error("weight m_{index} = {value} is not strictly positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("weights are not unimodal: strict valley at position {index}")]
    NotUnimodal { index: usize },
    #[error("unknown distribution family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("n = {0} is even; the bound machinery requires odd n")]
    EvenN(usize),
    #[error("theta = {0} is outside (0, 1)")]
    ThetaOutOfRange(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("state index {index} out of range for {states} states")]
    StateOutOfRange { index: usize, states: usize },
    #[error("mixing threshold not reached within {cap} steps (n = {n})")]
    CapExceeded { n: usize, cap: usize },
    #[error("minorization is vacuous (rho = 1) at m = {m}")]
    VacuousMinorization { m: usize },
    #[error("target assigns zero mass to state {0}")]
    ZeroMass(usize),
    #[error("enumeration needs up to {required} nodes, budget is {budget}")]
    BudgetExceeded { required: f64, budget: u64 },
    #[error("first-passage system is singular")]
    SingularSystem,
    #[error("chain with n = {0} has no excursion structure")]
    DegenerateChain(usize),
    #[error("conditioning event {event} has zero probability")]
    EmptyConditioningEvent { event: &'static str },
    #[error("c~ = {0} must exceed 4")]
    TildeCTooSmall(f64),
    #[error("invalid binomial arguments: {0}")]
    InvalidCombinatorics(String),
    #[error("rho = {0} is outside [0, 1]")]
    RhoOutOfRange(f64),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("kernel is not a {expected} kernel")]
    WrongKernel { expected: &'static str },
}
