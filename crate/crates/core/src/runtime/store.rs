use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dsl::{CheckedModel, HyperType};
use crate::expr::Expr;
use crate::ir::compile_expr;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Int(i64),
    Real(f64),
    IntArray(Vec<i64>),
}

impl HyperValue {
    fn kind(&self) -> &'static str {
        match self {
            HyperValue::Int(_) => "int",
            HyperValue::Real(_) => "real",
            HyperValue::IntArray(_) => "int[]",
        }
    }
}

/// Values for a model's hyperparameters, keyed by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperValues(pub BTreeMap<String, HyperValue>);

impl HyperValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: HyperValue) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn int(self, name: &str, v: i64) -> Self {
        self.with(name, HyperValue::Int(v))
    }

    pub fn real(self, name: &str, v: f64) -> Self {
        self.with(name, HyperValue::Real(v))
    }

    pub fn ints(self, name: &str, v: Vec<i64>) -> Self {
        self.with(name, HyperValue::IntArray(v))
    }

    pub fn get(&self, name: &str) -> Option<&HyperValue> {
        self.0.get(name)
    }

    /// Check that every hyperparameter of `model` has a value of the right
    /// type. Integers are accepted where reals are expected.
    pub fn check(&self, model: &CheckedModel) -> Result<()> {
        for h in &model.ast.hyperparams {
            let v = self.get(&h.name).ok_or_else(|| Error::data(format!("missing hyperparameter {}", h.name)))?;
            let ok = matches!(
                (h.ty, v),
                (HyperType::Int, HyperValue::Int(_))
                    | (HyperType::Real, HyperValue::Real(_) | HyperValue::Int(_))
                    | (HyperType::IntArray, HyperValue::IntArray(_))
            );
            if !ok {
                return Err(Error::data(format!(
                    "hyperparameter {} should be {}, found {}",
                    h.name,
                    h.ty.keyword(),
                    v.kind()
                )));
            }
        }
        Ok(())
    }
}

/// Mapping from plate index tuples to flat element positions.
///
/// Level 0 is dense. Deeper levels may be ragged: `starts[l - 1][p]` is the
/// first flat position at level `l` below prefix element `p`, with one
/// trailing sentinel.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub dims: usize,
    pub level0: usize,
    pub starts: Vec<Vec<usize>>,
    pub elements: usize,
    /// Values stored per element (vector length for Dirichlet variables).
    pub event_len: usize,
}

impl Layout {
    pub fn scalar() -> Layout {
        Layout { dims: 0, level0: 1, starts: Vec::new(), elements: 1, event_len: 1 }
    }

    /// Flat element position of `idx`, or `None` when out of range.
    #[inline]
    pub fn flat(&self, idx: &[usize]) -> Option<usize> {
        if idx.is_empty() {
            return Some(0);
        }
        let mut f = idx[0];
        if f >= self.level0 {
            return None;
        }
        for (l, &i) in idx.iter().enumerate().skip(1) {
            let s = &self.starts[l - 1];
            let (a, b) = (s[f], s[f + 1]);
            if i >= b - a {
                return None;
            }
            f = a + i;
        }
        Some(f)
    }

    /// Inverse of [`Layout::flat`].
    pub fn unflatten(&self, mut flat: usize, out: &mut Vec<usize>) {
        out.clear();
        out.resize(self.dims, 0);
        for l in (1..self.dims).rev() {
            let s = &self.starts[l - 1];
            let p = s.partition_point(|&x| x <= flat) - 1;
            out[l] = flat - s[p];
            flat = p;
        }
        if self.dims > 0 {
            out[0] = flat;
        }
    }

    /// Number of stored values.
    pub fn len(&self) -> usize {
        self.elements * self.event_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn to_index(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
        Ok(v as usize)
    } else {
        Err(Error::data(format!("{what} evaluates to {v}, expected a nonnegative integer")))
    }
}

/// Compute the layout of a variable whose plates have the given bounds.
/// Bound `k` may refer to the indices of plates `0..k` by name.
pub fn build_layout(plates: &[(String, Expr)], event_len: Option<&Expr>, hyper: &HyperValues) -> Result<Layout> {
    let names: Vec<String> = plates.iter().map(|(n, _)| n.clone()).collect();
    let event_len = match event_len {
        Some(e) => to_index(compile_expr(e, &[], hyper)?.eval_const()?, "vector length")?,
        None => 1,
    };
    if plates.is_empty() {
        return Ok(Layout { event_len, ..Layout::scalar() });
    }
    let bounds = plates
        .iter()
        .enumerate()
        .map(|(k, (_, b))| compile_expr(b, &names[..k], hyper))
        .collect::<Result<Vec<_>>>()?;
    let level0 = to_index(bounds[0].eval_const()?, "plate bound")?;
    let mut starts = Vec::new();
    // index tuples of the previous level in flat order, `width` per tuple
    let mut prev: Vec<usize> = (0..level0).collect();
    let mut width = 1;
    let mut elements = level0;
    let mut locals = Vec::new();
    for (l, bound) in bounds.iter().enumerate().skip(1) {
        let last = l + 1 == bounds.len();
        let mut s = Vec::with_capacity(elements + 1);
        let mut next = Vec::new();
        let mut total = 0;
        for tuple in prev.chunks(width) {
            s.push(total);
            locals.clear();
            locals.extend(tuple.iter().map(|&i| i as f64));
            let n = to_index(bound.eval_locals(&mut locals)?, "plate bound")?;
            if !last {
                for i in 0..n {
                    next.extend_from_slice(tuple);
                    next.push(i);
                }
            }
            total += n;
        }
        s.push(total);
        starts.push(s);
        prev = next;
        width += 1;
        elements = total;
    }
    Ok(Layout { dims: plates.len(), level0, starts, elements, event_len })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarData {
    pub name: String,
    /// Flat values; integer-valued variables hold exact integers.
    pub values: Vec<f64>,
    pub layout: Layout,
    pub int_valued: bool,
    pub observed: bool,
}

impl VarData {
    #[inline]
    pub fn row(&self, flat: usize) -> &[f64] {
        let n = self.layout.event_len;
        &self.values[flat * n..(flat + 1) * n]
    }
}

/// Flat storage for every random variable of a model, plus the
/// hyperparameter values that size it.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    pub hyper: HyperValues,
    pub vars: Vec<VarData>,
}

impl ParamStore {
    /// Zero-filled storage sized by `hyper`. Variables observed in the model
    /// are marked observed.
    pub fn new(model: &CheckedModel, hyper: &HyperValues) -> Result<Self> {
        hyper.check(model)?;
        let mut vars = Vec::with_capacity(model.vars.len());
        for v in &model.vars {
            let plates: Vec<(String, Expr)> = v.plates.iter().map(|p| (p.index.clone(), p.bound.clone())).collect();
            let layout = build_layout(&plates, v.event_len.as_ref(), hyper)?;
            vars.push(VarData {
                name: v.name.clone(),
                values: vec![0.0; layout.len()],
                layout,
                int_valued: v.is_discrete(),
                observed: v.observed,
            });
        }
        Ok(ParamStore { hyper: hyper.clone(), vars })
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.vars.iter().position(|v| v.name == name).ok_or_else(|| Error::data(format!("unknown variable {name}")))
    }

    pub fn var(&self, name: &str) -> Option<&VarData> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.var(name).map(|v| v.values.as_slice())
    }

    /// Replace a variable's values; the length must match its layout.
    pub fn set(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        let id = self.id(name)?;
        let v = &mut self.vars[id];
        if values.len() != v.values.len() {
            return Err(Error::data(format!(
                "array {name} has length {}, expected {}",
                values.len(),
                v.values.len()
            )));
        }
        if v.int_valued && values.iter().any(|x| x.fract() != 0.0) {
            return Err(Error::data(format!("array {name} must hold integers")));
        }
        v.values = values;
        Ok(())
    }

    pub fn set_observed(&mut self, name: &str, observed: bool) -> Result<()> {
        let id = self.id(name)?;
        self.vars[id].observed = observed;
        Ok(())
    }

    pub fn is_observed(&self, name: &str) -> bool {
        self.var(name).is_some_and(|v| v.observed)
    }

    /// Fail if any value is NaN.
    pub fn check_finite(&self) -> Result<()> {
        for v in &self.vars {
            if v.values.iter().any(|x| x.is_nan()) {
                return Err(Error::eval(format!("variable {} contains NaN", v.name)));
            }
        }
        Ok(())
    }
}
