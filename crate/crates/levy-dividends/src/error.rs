//! Error type shared by the whole crate.

use thiserror::Error;

/// Everything that can go wrong while building models, engines, or running
/// the solver and simulator.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The process is the negative of a subordinator (no diffusion part and
    /// non-positive drift), so first passage upward never happens and none of
    /// the barrier quantities are defined.
    #[error("monotone paths: sigma = 0 requires drift_c > 0 (got drift_c = {drift_c})")]
    MonotonePaths { drift_c: f64 },

    /// The phase-type parameters do not describe a proper distribution.
    #[error("invalid phase-type distribution: {0}")]
    InvalidPhaseType(String),

    /// The jump distribution has a non-finite mean, so the Laplace exponent
    /// has no finite derivative at the origin.
    #[error("jump distribution has non-finite mean")]
    InfiniteMean,

    /// `theta I - T` was numerically singular while evaluating the
    /// phase-type Laplace transform or its derivatives.
    #[error("singular resolvent at theta = {theta}")]
    SingularResolvent { theta: f64 },

    /// An iteration (root polish, inversion of psi, ...) failed to reach its
    /// tolerance.
    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    /// Two roots of psi = s are closer than the partial-fraction expansion
    /// can resolve; the scale-function representation would be unreliable.
    #[error("near-multiple roots of psi = {level}: |{a} - {b}| < {tol:e}")]
    NearMultipleRoots {
        level: f64,
        a: num_complex::Complex<f64>,
        b: num_complex::Complex<f64>,
        tol: f64,
    },

    /// A ratio in the probabilistic form of the slope function lost all
    /// significance; the analytic form should be used instead.
    #[error("degenerate denominator in probabilistic slope at b = {b}: |{value:e}| below tolerance")]
    DegenerateDenominator { b: f64, value: f64 },

    /// Bracketing for the optimal barrier ran away without finding a sign
    /// change of the slope function.
    #[error("bracket failure: slope still {g} at b = {b}")]
    BracketFailure { b: f64, g: f64 },

    /// Adaptive quadrature could not certify the requested tolerance.
    #[error("quadrature failure on [{a}, {b}]: estimated error {estimate:e} exceeds tolerance {tol:e}")]
    QuadratureFailure { a: f64, b: f64, estimate: f64, tol: f64 },

    /// A variational-inequality check found a point where the candidate value
    /// function violates one of the inequalities.
    #[error("variational inequality violated at x = {x}: {kind} residual {residual:e} exceeds {tol:e}")]
    ViolationFound { x: f64, kind: String, residual: f64, tol: f64 },

    /// A parameter or configuration value is outside its admissible range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
