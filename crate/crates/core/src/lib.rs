//! One-dimensional kinetic plasma toolkit built around the quasilinear
//! approximation of the Vlasov equation.
//!
//! The crate provides:
//!
//! * phase-space grids on the periodic slab `[0, L) x [-v_max, v_max]` with
//!   exact spectral free-streaming and an FFT Poisson solver
//!   ([`phase_space`]),
//! * synthesis of stationary stochastic electric fields with prescribed
//!   per-mode correlation functions, plus deterministic oscillatory test
//!   fields ([`stochastic`]),
//! * a Strang-split semi-Lagrangian integrator for the rescaled Liouville /
//!   Vlasov-Poisson equation ([`vlasov`]),
//! * analytic and empirical velocity-space diffusion coefficients, the Fick
//!   flux estimator and a conservative solver for the limiting diffusion
//!   equation ([`diffusion`]),
//! * linear theory: the dispersion kernel, root finding by argument
//!   principle plus Newton, Penrose-type stability margins and decay-rate
//!   fitting for Landau-damping experiments ([`dispersion`]),
//! * a short-time quasilinear integrator driven by unstable dispersion roots
//!   ([`quasilinear`]),
//! * Monte Carlo ensemble orchestration and convergence studies
//!   ([`ensemble`]).
//!
//! All operations are deterministic given their inputs; randomness enters
//! only through explicit 64-bit seeds fed to a counter-based generator.

pub mod config;
pub mod diffusion;
pub mod dispersion;
pub mod ensemble;
pub mod fft;
pub mod phase_space;
pub mod quadrature;
pub mod quasilinear;
pub mod rng;
pub mod spline;
pub mod stats;
pub mod stochastic;
pub mod vlasov;




pub use diffusion::{BarProfile, DiffusionField};
pub use dispersion::{DispersionRoot, ProfileG};
pub use phase_space::{Distribution, FieldOnGrid, PhaseSpaceGrid, VelocityGrid, VelocityProfile};

pub use vlasov::{FieldSource, SolverParams, SolverState, TrajectoryRecord};
pub use stochastic::{AnsatzSpec, CorrelationSpec, FieldRealization};


use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("mass defect {defect:e} exceeds neutrality tolerance {tol:e}")]
    MassDefect { defect: f64, tol: f64 },
    #[error("invalid correlation spec: {0}")]
    InvalidSpec(String),
    #[error("time grid under-resolved: {0}")]
    UnderResolved(String),
    #[error("compact support breached: |f| = {value:e} at v = {v} exceeds floor {floor:e}")]
    SupportBreach { value: f64, v: f64, floor: f64 },
    #[error("time step violates advection constraint: {0}")]
    StepConstraint(String),
    #[error("positivity clip would change mass by {relative:e} (limit {limit:e})")]
    ClipMassLoss { relative: f64, limit: f64 },
    #[error("{0} outside the analyticity strip of the profile")]
    OutsideStrip(String),
    #[error("winding count {winding} disagrees with {newton} converged Newton roots")]
    RootCountMismatch { winding: usize, newton: usize },
    #[error("Newton iteration diverged; last iterate {last_re}+{last_im}i, residual {residual:e}")]
    NewtonDiverged {
        last_re: f64,
        last_im: f64,
        residual: f64,
    },
    #[error("no admissible exponential-decay window: {0}")]
    NoDecayWindow(String),
    #[error("quasilinear mode {index} has Re lambda = {re} <= 0 but is still active")]
    InactiveGrowthRate { index: usize, re: f64 },
    #[error("realization does not cover requested time: need {needed}, have {available}")]
    InsufficientCoverage { needed: f64, available: f64 },
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("ensemble member {index} (seed {seed}) failed: {source}")]
    Member {
        index: usize,
        seed: u64,
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
