use std::fmt;
use std::str::FromStr;

use super::{derive_conditional, detect_conjugacy, ConditionalForm, ConjugateDraw};
use crate::dsl::CheckedModel;
use crate::ir::JointDensity;
use crate::runtime::HyperValues;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Mh,
    Gibbs,
    Mwg,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mh => "mh",
            Method::Gibbs => "gibbs",
            Method::Mwg => "mwg",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mh" => Ok(Method::Mh),
            "gibbs" => Ok(Method::Gibbs),
            "mwg" => Ok(Method::Mwg),
            _ => Err(Error::data(format!("unknown method {s} (expected mh, gibbs or mwg)"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    Conjugate(ConjugateDraw),
    /// Enumerate the finite support and draw from the normalized pmf.
    ExactDiscrete,
    /// Gaussian random-walk Metropolis-Hastings.
    MhStep,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Conjugate(_) => "ConjugateDraw",
            Strategy::ExactDiscrete => "ExactDiscrete",
            Strategy::MhStep => "MHStep",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Conjugate(d) => write!(f, "ConjugateDraw {}", d.recipe()),
            Strategy::ExactDiscrete => write!(f, "ExactDiscrete"),
            Strategy::MhStep => write!(f, "MHStep(random walk)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub vars: Vec<String>,
    pub strategy: Strategy,
    /// Elements of the block can be updated simultaneously.
    pub parallel: bool,
    /// Elements are updated one at a time, each against the current state.
    pub single_site: bool,
    /// Absent for the joint MH block.
    pub conditional: Option<ConditionalForm>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerPlan {
    pub method: Method,
    pub blocks: Vec<Block>,
    pub diagnostics: Vec<String>,
    pub joint: JointDensity,
}

impl SamplerPlan {
    /// Total size of the symbolic terms the plan holds.
    pub fn ir_node_count(&self) -> usize {
        let mut n = self.joint.expr.node_count();
        for b in &self.blocks {
            if let Some(c) = &b.conditional {
                n += c.numerator.node_count() + c.normalizer.node_count();
            }
        }
        n
    }

    pub fn block_of(&self, var: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.vars.iter().any(|v| v == var))
    }

    /// Text report: the joint, then one section per block.
    pub fn describe(&self) -> String {
        let mut out = format!("method: {}\njoint: {}\n", self.method, self.joint.expr);
        for b in &self.blocks {
            out.push_str(&format!("\nblock [{}]\n", b.vars.join(", ")));
            if let Some(c) = &b.conditional {
                out.push_str(&format!("  conditional: {c}\n"));
            }
            out.push_str(&format!("  strategy: {}\n", b.strategy));
            let schedule = match (b.parallel, b.single_site) {
                (true, _) => "parallel",
                (false, true) => "sequential",
                (false, false) => "joint",
            };
            out.push_str(&format!("  schedule: {schedule}\n"));
        }
        for d in &self.diagnostics {
            out.push_str(&format!("\ndiagnostic: {d}"));
        }
        if !self.diagnostics.is_empty() {
            out.push('\n');
        }
        out
    }
}

/// Choose a sampling strategy for every unobserved random variable.
pub fn plan_inference(model: &CheckedModel, joint: &JointDensity, method: Method, hyper: &HyperValues) -> Result<SamplerPlan> {
    plan_inference_with(model, joint, method, hyper, &[])
}

/// As [`plan_inference`], additionally treating `observe_extra` as observed.
pub fn plan_inference_with(
    model: &CheckedModel,
    joint: &JointDensity,
    method: Method,
    hyper: &HyperValues,
    observe_extra: &[String],
) -> Result<SamplerPlan> {
    hyper.check(model)?;
    plan_symbolic(model, joint, method, observe_extra)
}

/// Planning that does not need hyperparameter values; used to describe a
/// model before data is available.
pub fn plan_symbolic(model: &CheckedModel, joint: &JointDensity, method: Method, observe_extra: &[String]) -> Result<SamplerPlan> {
    for name in observe_extra {
        if !model.is_random(name) {
            return Err(Error::data(format!("cannot observe {name}: not a random variable")));
        }
    }
    let latent: Vec<String> = model
        .vars
        .iter()
        .filter(|v| !v.observed && !observe_extra.contains(&v.name))
        .map(|v| v.name.clone())
        .collect();
    let mut plan = SamplerPlan { method, blocks: Vec::new(), diagnostics: Vec::new(), joint: joint.clone() };
    if latent.is_empty() {
        return Ok(plan);
    }
    if method == Method::Mh {
        plan.blocks.push(Block {
            vars: latent,
            strategy: Strategy::MhStep,
            parallel: false,
            single_site: false,
            conditional: None,
        });
        return Ok(plan);
    }
    let mut fallback = Vec::new();
    for name in latent {
        let var = model.var(&name).expect("latent variables come from the model");
        let cond = derive_conditional(model, joint, &name);
        let parallel = cond.is_parallelizable();
        let strategy = match parallel.then(|| detect_conjugacy(&cond)).flatten() {
            Some(draw) => Strategy::Conjugate(draw),
            None if var.is_discrete() => Strategy::ExactDiscrete,
            None => {
                fallback.push(name.clone());
                Strategy::MhStep
            }
        };
        let (parallel, single_site) = match (&strategy, method) {
            (Strategy::MhStep, Method::Mwg) => (false, true),
            (Strategy::ExactDiscrete, _) => (parallel, !parallel),
            _ => (parallel, false),
        };
        plan.blocks.push(Block { vars: vec![name], strategy, parallel, single_site, conditional: Some(cond) });
    }
    for name in fallback {
        plan.diagnostics.push(format!("{name}: no conjugacy, MH fallback"));
    }
    Ok(plan)
}
