//! Geodesic flows, curve shortening and Birkhoff sections on analytic
//! surfaces.

pub mod csf;
pub mod finder;
pub mod flow;
pub mod geom;
pub mod linalg;
pub mod section;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({u}, {v}) lies outside the chart")]
    PointOutsideChart { u: f64, v: f64 },
    #[error("operation requires a surface of different genus")]
    WrongGenus,
    #[error("orbit entered the polar cap at t = {t}")]
    PoleTransit { t: f64 },
    #[error("integrator step failure at t = {t}")]
    StepFailure { t: f64 },
    #[error("curve does not close: gap {gap:e}")]
    NotClosed { gap: f64 },
    #[error("closed geodesic is not hyperbolic")]
    NotHyperbolic,
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("curve lost embeddedness at step {step}")]
    EmbeddednessLost { step: usize },
    #[error("flow left the convex region at step {step}")]
    ConvexityViolation { step: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("curve collapsed to a point at step {step}")]
    FlowCollapsed { step: usize },
    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("sweepout degenerated: {0}")]
    SweepoutDegenerated(String),
    #[error("intersection pattern failed: {0}")]
    IntersectionPatternFailed(String),
    #[error("Birkhoff property failed: {0}")]
    NotBirkhoff(String),
}

pub type Result<T> = std::result::Result<T, Error>;
