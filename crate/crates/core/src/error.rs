use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("cell counts must be positive (nx = {nx}, ny = {ny})")]
    ZeroCells { nx: usize, ny: usize },
    #[error("at least one Dirichlet side is required")]
    NoDirichletSides,
    #[error("domain rectangle has no interior")]
    EmptyDomain,
    #[error("element {element} references missing node {node}")]
    NodeIndex { element: usize, node: usize },
    #[error("element {element} is degenerate or clockwise (area {area:e})")]
    DegenerateTriangle { element: usize, area: f64 },
    #[error("edge ({a}, {b}) is not on the mesh boundary")]
    NotABoundaryEdge { a: usize, b: usize },
    #[error("boundary edge ({a}, {b}) tagged twice")]
    DuplicateBoundaryEdge { a: usize, b: usize },
    #[error("{missing} boundary edges carry no Dirichlet/Neumann tag")]
    UntaggedBoundary { missing: usize },
    #[error("the Dirichlet part of the boundary is empty")]
    NoDirichletBoundary,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("cumulation must be nonnegative, got {0}")]
    NegativeCumulation(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("expected {expected} values, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("entry {index} = {value:e} is positive; dissipation needs a nonpositive direction")]
    PositiveDirection { index: usize, value: f64 },
    #[error("ζ fields mix vector and scalar entries")]
    ZetaKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("equilibrium solve did not converge after {iterations} iterations (residual {residual:e})")]
    EquilibriumNotConverged { iterations: usize, residual: f64 },
    #[error("equilibrium operator is not positive definite")]
    EquilibriumIndefinite,
    #[error("invalid step input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error("invalid evolution setup: {0}")]
    Setup(String),
    #[error("time {t} lies outside [0, {t_final}]")]
    TimeOutOfRange { t: f64, t_final: f64 },
    #[error("invalid grid range {from}..{to} (trace has {steps} steps)")]
    Range { from: usize, to: usize, steps: usize },
    #[error("checkpoint does not match this problem: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RescaleError {
    #[error("norm exponent must be at least 2, got {0}")]
    Exponent(f64),
    #[error("trace has no steps")]
    EmptyTrace,
    #[error("sweep needs entries with a common configuration: {0}")]
    Incompatible(String),
    #[error("jump profile refused: {0}")]
    JumpProfile(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{0} free nodes exceed the enumeration limit of {1}")]
    TooLarge(usize, usize),
    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("bounds are inconsistent at index {0}")]
    Bounds(usize),
    #[error("no feasible Kuhn-Tucker point found")]
    NoKktPoint,
    #[error("oracle instances need the linear μ law")]
    NonlinearMu,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationError {
    #[error("sample times must be strictly increasing (index {0})")]
    Times(usize),
    #[error("sample {index} has {actual} entries, expected {expected}")]
    Shape {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("invalid sample range {from}..={to} for {len} samples")]
    Range { from: usize, to: usize, len: usize },
    #[error("ζ samples mix vector and scalar entries")]
    Kind,
}
