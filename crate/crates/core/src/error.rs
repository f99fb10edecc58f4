use thiserror::Error;

/// Failures while constructing or evaluating a mechanical system.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("mass matrix is not symmetric positive definite")]
    MassNotSpd,
    #[error("system dimension must be at least 1")]
    EmptySystem,
    #[error("invalid system: {0}")]
    Invalid(String),
}

/// A query that left every reconstructed branch of a coordinate.
#[derive(Debug, Error, Clone, PartialEq)]
#[error(
    "coordinate {coord} left the reconstructed domain at q = {q} (branch {branch}, domain [{lo}, {hi}]{})",
    .nearest_branch.map(|b| format!(", nearest branch {b}")).unwrap_or_default()
)]
pub struct DomainExit {
    pub coord: usize,
    pub q: f64,
    pub branch: usize,
    pub lo: f64,
    pub hi: f64,
    pub nearest_branch: Option<usize>,
    pub t: Option<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("maximum number of steps ({0}) exceeded")]
    MaxSteps(usize),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("implicit stage solver did not converge after {iterations} iterations at t = {t}")]
    NoConvergence { t: f64, iterations: usize },
    #[error(transparent)]
    DomainExit(#[from] DomainExit),
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error("jacobian unavailable and finite differences disabled")]
    JacobianUnavailable,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructionError {
    #[error("coordinate {0} is constant along the trajectory; no monotone segment exists")]
    DegenerateCoordinate(usize),
    #[error("turning threshold {eps} leaves no monotone segment for coordinate {coord}")]
    Threshold { coord: usize, eps: f64 },
    #[error("trajectory has {0} samples; at least 2 are required")]
    ShortTrajectory(usize),
    #[error("segment has {got} samples; the inverse map needs at least {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("segment samples are not strictly monotone")]
    NotMonotone,
    #[error("anchor q = {q} lies outside the first branch of coordinate {coord}")]
    AnchorOutside { coord: usize, q: f64 },
    #[error("system has no damping matrix; equivalent stiffness needs the linear family")]
    NotLinear,
    #[error("division window empty for coordinate {0}: trajectory stays near q = 0")]
    EmptyDivisionWindow(usize),
    #[error("expected one work potential per coordinate ({expected}), got {got}")]
    PotentialCount { expected: usize, got: usize },
    #[error(transparent)]
    DomainExit(#[from] DomainExit),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("need at least {need} nodes, got {got}")]
    TooFewNodes { need: usize, got: usize },
    #[error("abscissae must be strictly monotone")]
    NotMonotone,
    #[error("length mismatch between abscissae ({0}) and ordinates ({1})")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("trajectories have disjoint time windows")]
    DisjointWindows,
    #[error("no in-domain sample states available")]
    NoSamples,
    #[error("perturbation {0} is zero")]
    ZeroPerturbation(usize),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Reconstruction(#[from] ReconstructionError),
    #[error(transparent)]
    DomainExit(#[from] DomainExit),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("damping coefficient must be positive, got {0}")]
    NonPositiveDamping(f64),
    #[error("initial velocities must satisfy vx0 + vy0 = 0, got {0}")]
    ConstraintViolated(f64),
    #[error("underdamped regime requires 0 < eta < omega (eta = {eta}, omega = {omega})")]
    NotUnderdamped { eta: f64, omega: f64 },
    #[error("matrix shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
