use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("shooting never bracketed the ground state amplitude ({0})")]
    NoBracket(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("tail plateau drift {drift:.3e} exceeds tolerance {tol:.3e}; increase r_max")]
    TailNotResolved { drift: f64, tol: f64 },

    #[error("argument {value:e} outside admitted range {range}")]
    OutOfRange { value: f64, range: String },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("quadrature failed: {0}")]
    QuadratureFail(String),

    #[error("modulation basis ill-conditioned (condition number {cond:.3e} > {cap:.1e})")]
    IllConditioned { cond: f64, cap: f64 },

    #[error("modulation fit not converged after {iterations} iterations (gradient {gradient:.3e})")]
    NotConverged { iterations: usize, gradient: f64 },

    #[error("modulation fit left the basin of the initial configuration (distance {from:.3e} -> {to:.3e})")]
    LeftBasin { from: f64, to: f64 },

    #[error("linear solver stalled at relative residual {residual:.3e} (target {target:.1e})")]
    SolverStalled { residual: f64, target: f64 },

    #[error("fixed-point iteration not contracting (ratio {ratio:.3})")]
    NotContracting { ratio: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("radial discretization inadequate: {0}")]
    Discretization(String),

    #[error("sweep infeasible: {0}")]
    SweepInfeasible(String),

    #[error("phase restriction violated at threshold c = {c}")]
    PhaseRestrictionViolated { c: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
