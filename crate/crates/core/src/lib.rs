//! Compile Bayesian-network models into data-parallel MCMC samplers.
//!
//! The pipeline is: [`dsl`] parses and checks a model, [`ir`] lowers it to a
//! symbolic joint density, [`rewrite`] derives full conditionals and picks a
//! sampling strategy per variable, and [`runtime`] executes the resulting
//! plan on a worker pool.

pub mod dist;
pub mod dsl;
pub mod exec;
pub mod expr;
pub mod ir;
pub mod rewrite;
pub mod rng;
pub mod runtime;
pub mod zoo;

use thiserror::Error;

pub use dsl::{compile_model, parse_model, validate_model, CheckedModel, ModelAst};
pub use exec::Executor;
pub use ir::{lower, JointDensity};
pub use rewrite::{plan_inference, Method, SamplerPlan};
pub use runtime::{HyperValues, ParamStore, SamplerConfig, Trace};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] dsl::ParseError),
    #[error(transparent)]
    Validation(#[from] dsl::ValidationError),
    #[error(transparent)]
    Dist(#[from] dist::DistError),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Eval(String),
}

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn eval(msg: impl Into<String>) -> Self {
        Error::Eval(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
