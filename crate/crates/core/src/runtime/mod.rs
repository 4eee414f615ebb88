//! Executing sampler plans: storage, initialization, sweeps and traces.

mod sampler;
mod store;
mod trace;

use std::time::Instant;

pub use sampler::{Sampler, ACCEPT_STREAM};
pub use store::*;
pub use trace::{State, Trace, Values};

use crate::dsl::CheckedModel;
use crate::exec::Executor;
use crate::ir::lower;
use crate::rewrite::{plan_inference_with, Method, SamplerPlan};
use crate::rng::INIT_SWEEP;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    pub threads: usize,
    /// Keep every `thin`-th sample.
    pub thin: usize,
    /// Sweeps run and discarded before recording.
    pub burnin: usize,
    /// Random-walk proposal standard deviation.
    pub mh_scale: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { seed: 0, threads: 1, thin: 1, burnin: 0, mh_scale: 0.5 }
    }
}

/// Draw every variable that is not observed from its prior, parents first.
pub fn initialize(model: &CheckedModel, store: &mut ParamStore, seed: u64) -> Result<()> {
    sampler::ancestral(model, store, seed, INIT_SWEEP, &Executor::new(1))
}

fn check_store(model: &CheckedModel, hyper: &HyperValues, store: &ParamStore) -> Result<()> {
    let fresh = ParamStore::new(model, hyper)?;
    if fresh.vars.len() != store.vars.len() {
        return Err(Error::data("store does not match the model"));
    }
    for (a, b) in fresh.vars.iter().zip(&store.vars) {
        if a.name != b.name || a.values.len() != b.values.len() {
            return Err(Error::data(format!(
                "array {} has length {}, expected {}",
                a.name,
                b.values.len(),
                a.values.len()
            )));
        }
    }
    Ok(())
}

/// Plan for `method`, treating variables marked observed in `store` or
/// listed in `observe_extra` as fixed.
pub fn plan_for_store(
    model: &CheckedModel,
    hyper: &HyperValues,
    store: &ParamStore,
    method: Method,
    observe_extra: &[String],
) -> Result<SamplerPlan> {
    let mut fixed: Vec<String> = observe_extra.to_vec();
    fixed.extend(store.vars.iter().filter(|v| v.observed).map(|v| v.name.clone()));
    plan_inference_with(model, &lower(model), method, hyper, &fixed)
}

/// Run `n` recorded sweeps (after `config.burnin` discarded ones) from
/// `init`.
pub fn sample(
    model: &CheckedModel,
    hyper: &HyperValues,
    init: &ParamStore,
    n: usize,
    method: Method,
    config: &SamplerConfig,
) -> Result<Trace> {
    sample_with(model, hyper, init, n, method, &[], config).map(|(t, _)| t)
}

/// As [`sample`], with extra observed variables; also returns the final
/// store.
pub fn sample_with(
    model: &CheckedModel,
    hyper: &HyperValues,
    init: &ParamStore,
    n: usize,
    method: Method,
    observe_extra: &[String],
    config: &SamplerConfig,
) -> Result<(Trace, ParamStore)> {
    if n == 0 {
        return Err(Error::data("number of samples must be at least 1"));
    }
    check_store(model, hyper, init)?;
    let plan = plan_for_store(model, hyper, init, method, observe_extra)?;
    run_plan(model, &plan, init.clone(), n, config)
}

/// Execute an existing plan.
pub fn run_plan(
    model: &CheckedModel,
    plan: &SamplerPlan,
    init: ParamStore,
    n: usize,
    config: &SamplerConfig,
) -> Result<(Trace, ParamStore)> {
    let latent: Vec<usize> =
        plan.blocks.iter().flat_map(|b| b.vars.iter()).map(|v| init.id(v)).collect::<Result<Vec<_>>>()?;
    let mut latent = latent;
    latent.sort_unstable();
    let mut sampler = Sampler::new(model, plan, init, config)?;
    let thin = config.thin.max(1);
    let mut trace = Trace::new(plan.method, config.seed);
    let mut best = f64::NEG_INFINITY;
    let total = config.burnin + n;
    for it in 0..total {
        let start = Instant::now();
        let lj = sampler.sweep(it as u32)?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        let Some(k) = it.checked_sub(config.burnin) else { continue };
        trace.log_joint.push(lj);
        trace.timing_ms.push(elapsed);
        if k % thin == 0 {
            trace.samples.push(State::capture(sampler.store(), &latent));
        }
        if lj > best || trace.log_joint.len() == 1 {
            best = lj;
            trace.map_state = State::capture(sampler.store(), &latent);
        }
    }
    Ok((trace, sampler.into_store()))
}

/// Maximum-a-posteriori search: sample with `observe_extra` fixed and
/// overwrite `store` with the visited state of highest log joint.
pub fn map(
    model: &CheckedModel,
    observe_extra: &[String],
    hyper: &HyperValues,
    store: &mut ParamStore,
    n: usize,
    method: Method,
    config: &SamplerConfig,
) -> Result<()> {
    let (trace, _) = sample_with(model, hyper, store, n, method, observe_extra, config)?;
    trace.map_state.apply(store)
}
