use crate::lattice::SiteCoord;

/// Errors raised by the simulator, the oracle and the estimation harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("operation requires a rhombus or elongated rhombus, got {0}")]
    NotRhombus(String),
    #[error("region has {sites} sites, above the enumeration cap of {cap}")]
    RegionTooLarge { sites: usize, cap: usize },
    #[error("site {0} is outside the region")]
    SiteOutsideRegion(SiteCoord),
    #[error("mixed boundary condition has no value for exterior site {0}")]
    MissingBoundarySpin(SiteCoord),
    #[error("mixed boundary condition assigns a value to {0}, which is not an exterior boundary site")]
    StrayBoundarySpin(SiteCoord),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown sampling method `{0}`")]
    UnknownMethod(String),
    #[error("requested time {until} lies beyond the schedule horizon {horizon}")]
    BeyondHorizon { until: f64, horizon: f64 },
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("set must be non-empty")]
    EmptySet,
    #[error("configuration region does not cover {needed}")]
    RegionTooSmall { needed: String },
    #[error("bad scales: {0}")]
    BadScales(String),
    #[error("constant check failed: {0}")]
    Constants(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
