use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::rewrite::Method;
use crate::Result;

/// Flat values of one variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    Int(Vec<i64>),
    Real(Vec<f64>),
}

impl Values {
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Values::Int(v) => v.iter().map(|&x| x as f64).collect(),
            Values::Real(v) => v.clone(),
        }
    }
}

/// Values of the sampled variables, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(pub IndexMap<String, Values>);

impl State {
    pub fn capture(store: &ParamStore, vars: &[usize]) -> State {
        let mut m = IndexMap::new();
        for &id in vars {
            let v = &store.vars[id];
            let values = if v.int_valued {
                Values::Int(v.values.iter().map(|&x| x as i64).collect())
            } else {
                Values::Real(v.values.clone())
            };
            m.insert(v.name.clone(), values);
        }
        State(m)
    }

    pub fn get(&self, name: &str) -> Option<Vec<f64>> {
        self.0.get(name).map(Values::to_f64)
    }

    /// Copy these values into `store`.
    pub fn apply(&self, store: &mut ParamStore) -> Result<()> {
        for (name, v) in &self.0 {
            store.set(name, v.to_f64())?;
        }
        Ok(())
    }
}

/// Result of a sampling run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub model: String,
    pub method: String,
    pub seed: u64,
    /// Thinned states after burn-in.
    pub samples: Vec<State>,
    /// Log joint after every recorded sweep.
    pub log_joint: Vec<f64>,
    /// Recorded state with the highest log joint.
    pub map_state: State,
    pub timing_ms: Vec<f64>,
}

impl Trace {
    pub fn new(method: Method, seed: u64) -> Self {
        Trace {
            model: String::new(),
            method: method.name().to_string(),
            seed,
            samples: Vec::new(),
            log_joint: Vec::new(),
            map_state: State::default(),
            timing_ms: Vec::new(),
        }
    }

    pub fn map_log_joint(&self) -> f64 {
        self.log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Posterior mean of every component of `name` over the samples.
    pub fn mean(&self, name: &str) -> Option<Vec<f64>> {
        let mut acc: Option<Vec<f64>> = None;
        for s in &self.samples {
            let v = s.get(name)?;
            match &mut acc {
                None => acc = Some(v),
                Some(a) => a.iter_mut().zip(&v).for_each(|(a, b)| *a += b),
            }
        }
        let n = self.samples.len() as f64;
        acc.map(|a| a.into_iter().map(|x| x / n).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("traces serialize")
    }

    /// JSON without wall-clock timings, for comparing runs.
    pub fn to_json_untimed(&self) -> String {
        let mut t = self.clone();
        t.timing_ms.clear();
        t.to_json()
    }
}
