use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("potential of {family} is singular at x = {x}")]
    Domain { family: String, x: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh does not match operator: {0}")]
    MeshMismatch(String),

    #[error("mass at retained node {index} is not positive ({mass})")]
    NonPositiveMass { index: usize, mass: f64 },

    #[error("requested {requested} eigenvalues from a matrix of dimension {dimension}")]
    TooManyEigenvalues { requested: usize, dimension: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inverse iteration did not converge after {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },

    #[error("shift {shift} lies in a cluster of {count} eigenvalues")]
    Cluster { shift: f64, count: usize },

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("bracket ({a}, {b}) has no derivative sign change (derivatives {da:e}, {db:e})")]
    NoSignChange { a: f64, b: f64, da: f64, db: f64 },

    #[error("tau = {tau} is not a critical point (derivative {derivative:e})")]
    NotCritical { tau: f64, derivative: f64 },

    #[error("fit is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("solver failed at tau = {tau}: {source}")]
    AtTau {
        tau: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
