use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes across the crate. `Validation` variants signal bad inputs,
/// the rest signal numerical trouble detected mid-computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be >= 2, got {0}")]
    BadDimension(usize),

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is numerically singular (pivot {pivot:.3e})")]
    Singular { pivot: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("not a valid state: {0}")]
    InvalidState(String),

    #[error("time grid invalid: {0}")]
    BadTimeGrid(String),

    #[error("factor series invalid: {0}")]
    BadFactors(String),

    #[error("missing factor for positive root index {0}")]
    MissingRootFactor(usize),

    #[error(
        "map is not pure dephasing in this basis: off-diagonal residual {residual:.3e} \
         at time index {time_index} (threshold {threshold:.1e})"
    )]
    NotPureDephasing {
        residual: f64,
        time_index: usize,
        threshold: f64,
    },

    #[error("grids are incompatible: {0}")]
    GridMismatch(String),

    #[error(
        "factor has not decayed at the end of the time grid (|phi(T)| = {tail:.3e}, \
         threshold {threshold:.1e}); extend the grid or request a tail window"
    )]
    InsufficientDecay { tail: f64, threshold: f64 },

    #[error("distribution mass {mass} differs from 1 beyond tolerance")]
    Unnormalized { mass: f64 },

    #[error("grid has {cells} cells, above the LP solver cap of {cap}")]
    LpCapExceeded { cells: usize, cap: usize },

    #[error("LP solver failed: {0}")]
    LpFailed(String),

    #[error("quadrature failed to converge at t = {t} (error estimate {estimate:.3e})")]
    QuadratureFailed { t: f64, estimate: f64 },

    #[error(
        "Fock-space truncation leaks {leakage:.3e} population; raise the cutoff to \
         at least {suggested_cutoff}"
    )]
    FockLeakage {
        leakage: f64,
        suggested_cutoff: usize,
    },

    #[error("trajectory is degenerate (points nearly collinear); cannot fit a plane")]
    DegenerateTrajectory,

    #[error("no inversion strategy for this factor structure: {0}")]
    NoInversionStrategy(String),

    #[error("schema violation at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("unsupported format version {found:?}, this build reads {expected:?}")]
    FormatVersion { found: String, expected: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid input rather than numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::QuadratureFailed { .. }
                | Error::FockLeakage { .. }
                | Error::LpFailed(_)
                | Error::DegenerateTrajectory
                | Error::Singular { .. }
                | Error::EigenNoConvergence { .. }
        )
    }
}
