use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the analysis pipeline.
///
/// Variants are grouped by the stage that raises them; [`Error::stage`]
/// names that stage for reports.
#[derive(Debug, Error)]
pub enum Error {
    // differential parsing and critical points
    #[error("polynomial has no coefficients")]
    EmptyPolynomial,
    #[error("numerator vanishes identically")]
    ZeroDifferential,
    #[error("denominator vanishes identically")]
    ZeroDenominator,
    #[error("roots {numerator} (numerator) and {denominator} (denominator) are {distance:e} apart: neither distinct nor a common factor")]
    UnreducibleWithinTolerance {
        numerator: String,
        denominator: String,
        distance: f64,
    },
    #[error("root finding did not converge (residual {residual:e})")]
    RootFindingFailure { residual: f64 },
    #[error("point {0} is not a pole of order 2")]
    NotDoublePole(String),
    #[error("point {0} is not a finite critical point")]
    NotFiniteCritical(String),
    #[error("invalid differential document: {0}")]
    InvalidDocument(String),
    #[error("cannot parse polynomial expression at byte {pos}: {msg}")]
    Expression { pos: usize, msg: String },

    // trajectory tracing
    #[error("seed {0} is a critical point")]
    SeedAtCriticalPoint(String),
    #[error("step size underflow near {0}")]
    StepSizeUnderflow(String),
    #[error("branch of the square root could not be continued near {0}")]
    BranchContinuationFailure(String),
    #[error("direction is not horizontal at the seed (misfit {0:e} rad)")]
    NotHorizontalDirection(f64),

    // graphs
    #[error("segments {0} and {1} share endpoints but are different curves")]
    GluingAmbiguity(usize, usize),
    #[error("trajectory from critical point {0} did not terminate within the budget")]
    TraceIncomplete(usize),
    #[error("no finite critical points: the trajectory structure is a closed-form cylinder")]
    NoFiniteCritical,
    #[error("the point at infinity must be a pole of order >= 2 for trajectory analysis (order {0})")]
    UnsupportedInfinity(i32),
    #[error("recurrent trajectories detected (segments {0:?}): differential looks chaotic")]
    ChaoticInput(Vec<usize>),
    #[error("probes of one domain disagree: {0}")]
    ProbeInconsistency(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    // classification
    #[error("Reeb graph has {0} edges; at most 30 supported")]
    TooLarge(usize),
    #[error("orientation is not a gradient orientation: cycle sum {0:e}")]
    InconsistentCocycle(f64),
    #[error("indeterminate infinity (inf - inf)")]
    IndeterminateInfinity,
    #[error("zero-length Reeb edge {0}")]
    ZeroLengthEdge(usize),
    #[error("critical graph is not planar: {0}")]
    NonPlanarInput(String),

    // measures
    #[error("orientation is not a gradient orientation")]
    NotGradientOrientation,
    #[error("edge {0} has infinite length and nonzero density")]
    InfiniteDensityEdge(usize),
    #[error("contour touches the support of the measure near {0}")]
    ContourTouchesSupport(String),
    #[error("point {point} is {distance:e} from the support (minimum {minimum:e})")]
    PointTooCloseToSupport {
        point: String,
        distance: f64,
        minimum: f64,
    },
    #[error("degree mismatch: deg U2 - deg U1 = {0}, expected 2")]
    DegreeMismatch(i64),
    #[error("differential is not a Strebel differential of the form -U1 dz^2/U2: {0}")]
    NotStrebelForm(String),

    // Heine-Stieltjes
    #[error("Newton iteration did not converge from any start")]
    NoConvergence,
    #[error("roots of S collided")]
    RootCollision,
    #[error("start budget exhausted: found {found} of {expected} solutions")]
    BudgetExhausted { found: usize, expected: usize },
    #[error("chain of Van Vleck polynomials does not converge: {0}")]
    NonConvergingChain(String),
    #[error("invalid Heine-Stieltjes problem: {0}")]
    InvalidProblem(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Name of the pipeline stage the error belongs to.
    pub fn stage(&self) -> &'static str {
        use Error::*;
        match self {
            EmptyPolynomial
            | ZeroDifferential
            | ZeroDenominator
            | UnreducibleWithinTolerance { .. }
            | RootFindingFailure { .. }
            | NotDoublePole(_)
            | NotFiniteCritical(_)
            | InvalidDocument(_)
            | Expression { .. } => "qd-core",
            SeedAtCriticalPoint(_)
            | StepSizeUnderflow(_)
            | BranchContinuationFailure(_)
            | NotHorizontalDirection(_) => "tracer",
            GluingAmbiguity(..)
            | TraceIncomplete(_)
            | NoFiniteCritical
            | UnsupportedInfinity(_)
            | ChaoticInput(_)
            | ProbeInconsistency(_)
            | InvalidGraph(_) => "topology",
            TooLarge(_)
            | InconsistentCocycle(_)
            | IndeterminateInfinity
            | ZeroLengthEdge(_)
            | NonPlanarInput(_) => "classify",
            NotGradientOrientation
            | InfiniteDensityEdge(_)
            | ContourTouchesSupport(_)
            | PointTooCloseToSupport { .. }
            | DegreeMismatch(_)
            | NotStrebelForm(_) => "measures",
            NoConvergence
            | RootCollision
            | BudgetExhausted { .. }
            | NonConvergingChain(_)
            | InvalidProblem(_) => "heine-stieltjes",
            Json(_) => "io",
        }
    }
}
