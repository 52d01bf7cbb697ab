//! Numerical toolkit for the steady-state and bifurcation analysis of a
//! two-species bacteria-nutrient reaction-diffusion system.
//!
//! The crate covers the full analysis pipeline for the rescaled model
//!
//! ```text
//!   du/dt = g(u,v) +       lap u
//!   dv/dt = h(u,v) + delta lap v
//! ```
//!
//! on rectangular domains with zero-flux boundaries:
//!
//! - [`kinetics`]: reaction terms, analytic derivatives through third order,
//!   and the symmetric bilinear/trilinear forms of the Taylor expansion.
//! - [`homogeneous`]: homogeneous steady states via a reduced cubic, stability
//!   classification, dispersion relations, neutral and critical wavenumbers,
//!   and full parameter-plane scans.
//! - [`landau`]: hexagonal-lattice amplitude (Landau) reduction, closed-form
//!   stripe/hexagon/mixed-mode amplitudes, their amplitude-level stability,
//!   and field reconstruction for continuation initial guesses.
//! - [`pde`]: finite-difference discretization, residual/Jacobian assembly,
//!   domain-averaged norms, depth profiles, and transverse stability operators.
//! - [`continuation`]: damped Newton, pseudo-arclength continuation, leading
//!   spectra, fold/bifurcation localization, and branch switching.
//! - [`timestep`]: semi-implicit time integration and pattern classification.
//! - [`cli`]: the command-line front end binding everything together.
//!
//! Most numerical entry points take a [`kinetics::ParameterSet`]; the
//! examples directory demonstrates one capability per file.

pub mod cli;
pub mod continuation;
pub mod homogeneous;
pub mod kinetics;
pub mod landau;
pub mod linalg;
pub mod pde;
pub mod timestep;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// State outside the guarded evaluation domain (poles of the kinetics).
    #[error("state (u={u}, v={v}) outside the evaluation domain")]
    OutOfDomain { u: f64, v: f64 },
    /// Parameter combination that makes a formula singular.
    #[error("singular parameter set: {0}")]
    SingularParameters(String),
    /// A bracketed search found no sign change.
    #[error("no sign change in bracket [{lo}, {hi}]")]
    BracketFailed { lo: f64, hi: f64 },
    /// Requested wavenumbers do not exist (complex radicand).
    #[error("no real neutral wavenumbers at sigma={sigma}")]
    NoNeutralWavenumbers { sigma: f64 },
    /// Eigenvalue multiplicity prevents a unique eigenpair.
    #[error("degenerate eigenvalue problem: {0}")]
    Degenerate(String),
    /// A quadratic-correction solve hit a near-singular operator.
    #[error("resonant wavenumber: |det L({kappa})| = {det:.3e}")]
    Resonance { kappa: f64, det: f64 },
    /// Iterative method did not reach its tolerance.
    #[error("{method} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// Field or amplitude data incompatible with the requested domain.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    /// Numerical failure that is not a plain tolerance miss.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Invalid run configuration or malformed input file.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
