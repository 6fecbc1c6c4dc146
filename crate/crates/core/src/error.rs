use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the domain (factor {factor})")]
    PointOutsideDomain { point: Vec<f64>, factor: usize },
    #[error("finite-difference step {h} leaves the domain at {point:?}")]
    StepTooLarge { point: Vec<f64>, h: f64 },
    #[error("symplectic check needs an even dimension, got {0}")]
    OddDimension(usize),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian at {0:?}")]
    SingularJacobian(Vec<f64>),
    #[error("a modulus lies within tolerance of 1: {0:?}")]
    NotHyperbolic(Vec<f64>),
    #[error("budget of {budget} cell visits exhausted")]
    BudgetExhausted { budget: usize },
    #[error("generator {0} lacks contraction metadata")]
    NoMetadata(usize),
    #[error("uncovered cell centered at {center:?}")]
    Uncovered { center: Vec<f64>, cell: Vec<i64> },
    #[error("contraction bound {0} outside (0,1)")]
    LambdaOutOfRange(f64),
    #[error("no word found within {max_steps} steps (analytic bound {bound})")]
    StepLimit { max_steps: usize, bound: usize },
    #[error("map {0} has no inverse")]
    NotInvertible(String),
    #[error("point is not fixed (residual {0:e})")]
    NotFixedPoint(f64),
    #[error("strong contraction {mu_ss} is not stronger than fiber bound {lambda}")]
    DominationViolated { mu_ss: f64, lambda: f64 },
    #[error("rectangles {0} and {1} overlap")]
    RectanglesOverlap(usize, usize),
    #[error("depth {depth} exhausted (analytic bound {bound})")]
    DepthExhausted { depth: usize, bound: usize },
    #[error("translation vector of norm {norm} does not fit between the inner and outer regions")]
    VectorTooLarge { norm: f64 },
    #[error("alphabet of {have} symbols is too small, need {need}")]
    ScheduleTooSmall { have: usize, need: usize },
    #[error("shear amplitude {0} pushes the annulus out of its domain")]
    DomainOverflow(f64),
    #[error("implicit solve diverged at time step {step}")]
    IntegratorDiverged { step: usize },
    #[error("no chain of invariant circles connects the two regions")]
    NoChain,
    #[error("horizon {horizon} exhausted at link {link}")]
    HorizonExhausted { horizon: usize, link: usize },
    #[error("invalid configuration at `{path}`: {reason}")]
    ConfigInvalid { path: String, reason: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
