//! JSON data files: `{"hyper": {...}, "arrays": {...}}`.

use std::collections::BTreeMap;
use std::path::Path;

use bayesc_core::runtime::{initialize, HyperValues, ParamStore, Values};
use bayesc_core::CheckedModel;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFile {
    pub hyper: HyperValues,
    /// Flat values per variable; ragged plates are concatenated row by row.
    #[serde(default)]
    pub arrays: BTreeMap<String, Values>,
}

impl DataFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("bad data file: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical form: compact JSON with sorted keys and a trailing newline.
    pub fn to_canonical(&self) -> String {
        let mut s = serde_json::to_string(self).expect("data files serialize");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_canonical())
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
    }

    pub fn set_ints(&mut self, name: &str, v: Vec<i64>) {
        self.arrays.insert(name.to_string(), Values::Int(v));
    }

    pub fn set_reals(&mut self, name: &str, v: Vec<f64>) {
        self.arrays.insert(name.to_string(), Values::Real(v));
    }

    pub fn array(&self, name: &str) -> Option<Vec<f64>> {
        self.arrays.get(name).map(Values::to_f64)
    }

    /// Build a store: arrays in the file are copied in, variables observed
    /// in the model or listed in `observe` must be present, and everything
    /// else is drawn from the prior using `seed`.
    pub fn to_store(&self, model: &CheckedModel, observe: &[String], seed: u64) -> Result<ParamStore, CliError> {
        let mut store = ParamStore::new(model, &self.hyper)?;
        for (name, values) in &self.arrays {
            if !model.is_random(name) {
                return Err(CliError::Input(format!("array {name} is not a random variable of the model")));
            }
            store.set(name, values.to_f64())?;
        }
        for v in &model.vars {
            let needed = v.observed || observe.contains(&v.name);
            if needed && !self.arrays.contains_key(&v.name) {
                return Err(CliError::Input(format!("missing array {}", v.name)));
            }
        }
        let flags: Vec<bool> = store.vars.iter().map(|v| v.observed).collect();
        for v in &mut store.vars {
            v.observed |= self.arrays.contains_key(&v.name);
        }
        initialize(model, &mut store, seed)?;
        for (v, f) in store.vars.iter_mut().zip(flags) {
            v.observed = f;
        }
        Ok(store)
    }
}
