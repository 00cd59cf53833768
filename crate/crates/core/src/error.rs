use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("horizontal displacement between point and reference is zero")]
    DegenerateDirection,

    #[error("uncertainty radius {sigma} m is not smaller than the distance {distance} m")]
    UncertaintyTooLarge { sigma: f64, distance: f64 },

    #[error("dipoles at {a:?} and {b:?} intersect")]
    GeometryOverlap { a: [f64; 3], b: [f64; 3] },

    #[error("dipole length {0} m gives a zero input current for the sinusoidal model")]
    ResonantLength(f64),

    #[error("network matrix is singular (1-norm condition estimate {condition:e})")]
    SingularNetwork { condition: f64 },

    #[error("phase {0} rad lies inside the guard band around 0 mod 2pi")]
    PhaseAtBranchPoint(f64),

    #[error("reactance {0} is not finite")]
    NonFiniteReactance(f64),

    #[error("quadratic model is degenerate: {0}")]
    DegenerateModel(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateDirection => "DegenerateDirection",
            Error::UncertaintyTooLarge { .. } => "UncertaintyTooLarge",
            Error::GeometryOverlap { .. } => "GeometryOverlap",
            Error::ResonantLength(_) => "ResonantLength",
            Error::SingularNetwork { .. } => "SingularNetwork",
            Error::PhaseAtBranchPoint(_) => "PhaseAtBranchPoint",
            Error::NonFiniteReactance(_) => "NonFiniteReactance",
            Error::DegenerateModel(_) => "DegenerateModel",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Dimension(_) => "Dimension",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
