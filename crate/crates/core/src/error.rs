use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("lattice needs at least 2 sites, got {0}")]
    TooFewSites(usize),

    #[error("energy at site {site} is invalid: {value}")]
    InvalidEnergy { site: usize, value: f64 },

    #[error("total energy must be finite and positive, got {0}")]
    DegenerateTotal(f64),

    #[error("bond {bond} out of range 1..={max}")]
    BondOutOfRange { bond: usize, max: usize },

    #[error("splitting fraction {0} outside [0, 1]")]
    AlphaOutOfRange(f64),

    #[error("argument {name}={value} outside [0, 1]")]
    UnitIntervalArgument { name: &'static str, value: f64 },

    #[error("u-coordinates leave the simplex: site {site} would get energy {energy}")]
    OutsideSimplex { site: usize, energy: f64 },

    #[error("states live on different lattices ({0} vs {1} sites)")]
    SiteCountMismatch(usize, usize),

    #[error("states live on different simplices (total {0} vs {1})")]
    SimplexMismatch(f64, f64),

    #[error("negative energy argument {0}")]
    NegativeEnergy(f64),

    #[error("kernel has no density")]
    NoDensity,

    #[error("operation requires a state-independent kernel")]
    StateDependentKernel,

    #[error("operation requires constant rates and a state-independent kernel")]
    NotReferenceModel,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("observable has zero variance under the sampled law")]
    ZeroVariance,
}
