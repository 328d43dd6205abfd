use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which half of a decoupled or monolithic step failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubStep {
    /// Elliptic (displacement) solve with `A`.
    Elastic,
    /// Parabolic (flow) solve with `ξ₀/τ·C + B`.
    Flow,
    /// Outer Schur-complement iteration of the monolithic step.
    Schur,
    /// Application of `M = D A⁻¹ Dᵀ`.
    Coupling,
}

impl fmt::Display for SubStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubStep::Elastic => "elastic",
            SubStep::Flow => "flow",
            SubStep::Schur => "schur",
            SubStep::Coupling => "coupling",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported order {order}: supported range is {min}..={max}")]
    UnsupportedOrder { order: usize, min: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no real solution for k={k} at mu={mu}: coupling threshold is {threshold}")]
    NoRealSolution { k: usize, mu: f64, threshold: f64 },

    #[error("nonlinear solver failed at mu={mu} after {iterations} iterations (residual {residual:e})")]
    SolverFailure {
        mu: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("iterative solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("conjugate gradient breakdown at iteration {iteration}: operator is not positive definite")]
    Breakdown { iteration: usize },

    #[error("{stage} solve failed: {source}")]
    StepSolve {
        stage: SubStep,
        #[source]
        source: Box<Error>,
    },

    #[error("at mu={mu}: {source}")]
    AtGridPoint {
        mu: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("run k={k}, delta={delta}, tau={tau}: {source}")]
    Run {
        k: usize,
        delta: usize,
        tau: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("problem has no exact solution attached")]
    MissingExact,

    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),
}

impl Error {
    pub(crate) fn in_stage(self, stage: SubStep) -> Error {
        Error::StepSolve {
            stage,
            source: Box::new(self),
        }
    }
}
