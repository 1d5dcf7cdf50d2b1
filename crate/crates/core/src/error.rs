use thiserror::Error;

/// Every failure the laboratory can report. Variants mirror the validation
/// failures of the individual modules so the CLI can surface them verbatim.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("region escapes domain: ball of radius {radius} at {center:?} leaves the box of half-width {half_width}")]
    RegionEscapesDomain {
        center: Vec<f64>,
        radius: f64,
        half_width: f64,
    },

    #[error("unresolvable cutoff: transition band {band} is thinner than {min_band} (4h)")]
    UnresolvableCutoff { band: f64, min_band: f64 },

    #[error("misaligned step: {step} is not an integer multiple of the grid spacing {h}")]
    MisalignedStep { step: f64, h: f64 },

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("kernel under-resolved: epsilon {epsilon} < 2h = {min}")]
    KernelUnderResolved { epsilon: f64, min: f64 },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("stencil overflow: region comes within {order} nodes of the box boundary")]
    StencilOverflow { order: usize },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("not elliptic: symmetric part has eigenvalue {eigenvalue} <= 0 at node {node}")]
    NotElliptic { node: usize, eigenvalue: f64 },

    #[error("solver stagnation after {iterations} iterations (relative residual {residual:e})")]
    SolverStagnation { iterations: usize, residual: f64 },

    #[error("wrong variant: {0}")]
    WrongVariant(String),

    #[error("incompatible ensemble: {0}")]
    IncompatibleEnsemble(String),

    #[error("inadmissible exponents: {0}")]
    InadmissibleExponents(String),

    #[error("invalid exponents: {0}")]
    InvalidExponents(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("precondition failure: {0}")]
    PreconditionFailure(String),

    #[error("delta not calibrated: run calibration first")]
    DeltaUncalibrated,

    #[error("insufficient scales: {found} given, at least {required} required")]
    InsufficientScales { found: usize, required: usize },

    #[error("degree undetected: no derivative order up to {max_order} vanishes at every scale")]
    DegreeUndetected { max_order: usize },

    #[error("not harmonic parameters: {0}")]
    NotHarmonicParameters(String),

    #[error("data regularity missing: {0}")]
    DataRegularityMissing(String),

    #[error("no blow-up pair: {0}")]
    NoBlowupPair(String),

    #[error("insufficient shells: {found} found, at least 3 required")]
    InsufficientShells { found: usize },

    #[error("invalid scale: t = {0} must lie in (0, 1]")]
    InvalidScale(f64),

    #[error("nothing to plot in {0}")]
    NothingToPlot(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
