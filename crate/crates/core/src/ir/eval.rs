//! Numeric evaluation of densities.
//!
//! Terms are first compiled against a model and its hyperparameter values:
//! names become slot numbers or variable ids and hyperparameters become
//! constants. The compiled form is evaluated in log space.

use std::sync::Arc;

use super::{Atom, Cond, Density};
use crate::dist::{density, Family};
use crate::dsl::CheckedModel;
use crate::exec::Executor;
use crate::expr::{BinOp, Expr, Func};
use crate::runtime::{HyperValue, HyperValues, ParamStore};
use crate::{Error, Result};

/// Most plate levels a variable may have.
pub const MAX_DIMS: usize = 8;

#[derive(Clone, Debug)]
pub(crate) enum CExpr {
    Const(f64),
    Slot(usize),
    HyperAt(Arc<[f64]>, Box<CExpr>),
    /// Scalar read; `comp` selects a component of a vector variable.
    Var { var: usize, idx: Vec<CExpr>, comp: Option<Box<CExpr>> },
    Neg(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
    Call(Func, Vec<CExpr>),
    Sum { slot: usize, bound: Box<CExpr>, body: Box<CExpr> },
}

#[derive(Clone, Debug)]
pub(crate) enum CVec {
    Fill { len: CExpr, fill: CExpr },
    Row { var: usize, idx: Vec<CExpr> },
}

#[derive(Clone, Debug)]
pub(crate) enum CArg {
    Scalar(CExpr),
    Vector(CVec),
}

#[derive(Clone, Debug)]
pub(crate) struct CAtom {
    pub var: usize,
    pub idx: Vec<CExpr>,
    pub family: Family,
    pub args: Vec<CArg>,
}

#[derive(Clone, Debug)]
pub(crate) struct CCond {
    pub pairs: Vec<(CExpr, usize)>,
    pub eq: bool,
}

#[derive(Clone, Debug)]
pub(crate) enum CDensity {
    Atom(CAtom),
    Product(Vec<CDensity>),
    Indexed { slot: usize, bound: CExpr, body: Box<CDensity> },
    Guarded { conds: Vec<CCond>, body: Box<CDensity> },
    Recip(Box<CDensity>),
}

/// Replaces part of the store during evaluation.
#[derive(Clone, Copy, Debug)]
pub enum Override<'a> {
    None,
    /// One element (a value, or a row for vector variables).
    Element { var: usize, flat: usize, values: &'a [f64] },
    /// All values of one variable.
    Var { var: usize, values: &'a [f64] },
}

#[derive(Clone, Copy, Debug)]
pub struct EvalCtx<'a> {
    pub store: &'a ParamStore,
    pub ov: Override<'a>,
}

impl<'a> EvalCtx<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        EvalCtx { store, ov: Override::None }
    }

    pub fn with(self, ov: Override<'a>) -> Self {
        EvalCtx { store: self.store, ov }
    }

    #[inline]
    fn row(&self, var: usize, flat: usize) -> &'a [f64] {
        match self.ov {
            Override::Element { var: v, flat: f, values } if v == var && f == flat => values,
            Override::Var { var: v, values } if v == var => {
                let n = self.store.vars[var].layout.event_len;
                &values[flat * n..(flat + 1) * n]
            }
            _ => self.store.vars[var].row(flat),
        }
    }
}

#[inline]
fn as_index(x: f64) -> Option<usize> {
    (x >= 0.0 && x < 9.0e15).then_some(x as usize)
}

impl CExpr {
    #[inline]
    pub(crate) fn eval(&self, ctx: &EvalCtx, loc: &mut [f64]) -> f64 {
        match self {
            CExpr::Const(v) => *v,
            CExpr::Slot(s) => loc[*s],
            CExpr::HyperAt(arr, i) => match as_index(i.eval(ctx, loc)).and_then(|i| arr.get(i)) {
                Some(v) => *v,
                None => f64::NAN,
            },
            CExpr::Var { var, idx, comp } => {
                let Some(flat) = element(*var, idx, ctx, loc) else { return f64::NAN };
                let row = ctx.row(*var, flat);
                match comp {
                    None => row[0],
                    Some(c) => match as_index(c.eval(ctx, loc)).and_then(|k| row.get(k)) {
                        Some(v) => *v,
                        None => f64::NAN,
                    },
                }
            }
            CExpr::Neg(e) => -e.eval(ctx, loc),
            CExpr::Bin(op, a, b) => {
                let (x, y) = (a.eval(ctx, loc), b.eval(ctx, loc));
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                }
            }
            CExpr::Call(f, args) => {
                let x = args[0].eval(ctx, loc);
                let y = args[1].eval(ctx, loc);
                match f {
                    Func::Pow => x.powf(y),
                    Func::Max => x.max(y),
                    Func::Min => x.min(y),
                }
            }
            CExpr::Sum { slot, bound, body } => {
                let Some(n) = as_index(bound.eval(ctx, loc)) else { return f64::NAN };
                let mut acc = 0.0;
                for i in 0..n {
                    loc[*slot] = i as f64;
                    acc += body.eval(ctx, loc);
                }
                acc
            }
        }
    }
}

/// Flat element position of `var[idx]`, `None` when out of range.
#[inline]
pub(crate) fn element(var: usize, idx: &[CExpr], ctx: &EvalCtx, loc: &mut [f64]) -> Option<usize> {
    let mut buf = [0usize; MAX_DIMS];
    for (k, e) in idx.iter().enumerate() {
        buf[k] = as_index(e.eval(ctx, loc))?;
    }
    ctx.store.vars[var].layout.flat(&buf[..idx.len()])
}

pub(crate) enum VecView<'a> {
    Fill(usize, f64),
    Slice(&'a [f64]),
}

impl VecView<'_> {
    #[inline]
    pub(crate) fn get(&self, k: usize) -> f64 {
        match self {
            VecView::Fill(n, v) => {
                if k < *n {
                    *v
                } else {
                    f64::NAN
                }
            }
            VecView::Slice(s) => s.get(k).copied().unwrap_or(f64::NAN),
        }
    }

    pub(crate) fn len(&self) -> usize {
        match self {
            VecView::Fill(n, _) => *n,
            VecView::Slice(s) => s.len(),
        }
    }
}

impl CVec {
    pub(crate) fn view<'a>(&self, ctx: &EvalCtx<'a>, loc: &mut [f64]) -> Option<VecView<'a>> {
        match self {
            CVec::Fill { len, fill } => Some(VecView::Fill(as_index(len.eval(ctx, loc))?, fill.eval(ctx, loc))),
            CVec::Row { var, idx } => Some(VecView::Slice(ctx.row(*var, element(*var, idx, ctx, loc)?))),
        }
    }
}

impl CArg {
    #[inline]
    pub(crate) fn scalar(&self, ctx: &EvalCtx, loc: &mut [f64]) -> f64 {
        match self {
            CArg::Scalar(e) => e.eval(ctx, loc),
            CArg::Vector(_) => f64::NAN,
        }
    }

    pub(crate) fn vector<'a>(&self, ctx: &EvalCtx<'a>, loc: &mut [f64]) -> Option<VecView<'a>> {
        match self {
            CArg::Vector(v) => v.view(ctx, loc),
            CArg::Scalar(_) => None,
        }
    }
}

impl CAtom {
    /// Log density of `value` (a row for vector variables) under this
    /// atom's distribution.
    pub(crate) fn log_density_of(&self, value: &[f64], ctx: &EvalCtx, loc: &mut [f64]) -> f64 {
        let s = |k: usize, loc: &mut [f64]| self.args[k].scalar(ctx, loc);
        match self.family {
            Family::Dirichlet => match self.args[1].vector(ctx, loc) {
                Some(alpha) if alpha.len() == value.len() => density::dirichlet_with(value, |k| alpha.get(k)),
                Some(_) => f64::NEG_INFINITY,
                None => f64::NAN,
            },
            Family::Categorical => {
                let x = value[0];
                match self.args[1].vector(ctx, loc) {
                    Some(p) => match as_index(x) {
                        Some(i) if i < p.len() => {
                            let v = p.get(i);
                            if v.is_nan() {
                                v
                            } else {
                                v.ln()
                            }
                        }
                        _ if x.is_nan() => f64::NAN,
                        _ => f64::NEG_INFINITY,
                    },
                    None => f64::NAN,
                }
            }
            Family::Gaussian => density::gaussian(value[0], s(0, loc), s(1, loc)),
            Family::InverseGamma => density::inverse_gamma(value[0], s(0, loc), s(1, loc)),
            Family::Gamma => density::gamma(value[0], s(0, loc), s(1, loc)),
            Family::Beta => density::beta(value[0], s(0, loc), s(1, loc)),
            Family::Uniform => density::uniform(value[0], s(0, loc), s(1, loc)),
            Family::Bernoulli => {
                let x = value[0];
                if x.is_nan() {
                    f64::NAN
                } else if x == 0.0 || x == 1.0 {
                    density::bernoulli(x as i64, s(0, loc))
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    #[inline]
    pub(crate) fn eval(&self, ctx: &EvalCtx, loc: &mut [f64]) -> f64 {
        let Some(flat) = element(self.var, &self.idx, ctx, loc) else { return f64::NAN };
        let value = ctx.row(self.var, flat);
        self.log_density_of(value, ctx, loc)
    }
}

impl CCond {
    #[inline]
    pub(crate) fn holds(&self, ctx: &EvalCtx, loc: &mut [f64]) -> bool {
        let all = self.pairs.iter().all(|(e, k)| e.eval(ctx, loc) == loc[*k]);
        all == self.eq
    }
}

impl CDensity {
    pub(crate) fn eval(&self, ctx: &EvalCtx, loc: &mut [f64]) -> f64 {
        match self {
            CDensity::Atom(a) => a.eval(ctx, loc),
            CDensity::Product(items) => items.iter().map(|d| d.eval(ctx, loc)).sum(),
            CDensity::Indexed { slot, bound, body } => {
                let Some(n) = as_index(bound.eval(ctx, loc)) else { return f64::NAN };
                let mut acc = 0.0;
                for i in 0..n {
                    loc[*slot] = i as f64;
                    acc += body.eval(ctx, loc);
                }
                acc
            }
            CDensity::Guarded { conds, body } => {
                if conds.iter().all(|c| c.holds(ctx, loc)) {
                    body.eval(ctx, loc)
                } else {
                    0.0
                }
            }
            CDensity::Recip(body) => -body.eval(ctx, loc),
        }
    }
}

/// A density compiled for evaluation. Slots `0..targets` hold the target
/// element's indices.
#[derive(Clone, Debug)]
pub struct CompiledDensity {
    pub(crate) root: CDensity,
    pub(crate) slots: usize,
    pub(crate) targets: usize,
}

impl CompiledDensity {
    pub fn slots(&self) -> usize {
        self.slots
    }

    pub(crate) fn locals(&self, target: &[usize]) -> Vec<f64> {
        let mut loc = vec![0.0; self.slots.max(1)];
        for (k, &t) in target.iter().enumerate() {
            loc[k] = t as f64;
        }
        loc
    }

    /// Sequential evaluation at one target element.
    pub fn eval_at(&self, ctx: &EvalCtx, target: &[usize]) -> f64 {
        debug_assert_eq!(target.len(), self.targets);
        let mut loc = self.locals(target);
        self.root.eval(ctx, &mut loc)
    }

    /// Evaluation with the outermost plate of each top-level factor split
    /// into fixed chunks on the executor. The sum is taken in a fixed order,
    /// so the result does not depend on the number of workers.
    pub fn eval_parallel(&self, ctx: &EvalCtx, exec: &Executor) -> f64 {
        let items = match &self.root {
            CDensity::Product(items) => items.as_slice(),
            other => std::slice::from_ref(other),
        };
        let mut total = 0.0;
        for item in items {
            total += match item {
                CDensity::Indexed { slot, bound, body } => {
                    let mut loc = self.locals(&[]);
                    let Some(n) = as_index(bound.eval(ctx, &mut loc)) else { return f64::NAN };
                    exec.sum_chunks(n, |range| {
                        let mut loc = self.locals(&[]);
                        let mut acc = 0.0;
                        for i in range {
                            loc[*slot] = i as f64;
                            acc += body.eval(ctx, &mut loc);
                        }
                        acc
                    })
                }
                other => other.eval(ctx, &mut self.locals(&[])),
            };
        }
        total
    }
}

/// Compile-time name resolution.
pub(crate) struct Compiler<'a> {
    pub model: Option<&'a CheckedModel>,
    pub hyper: &'a HyperValues,
    pub targets: usize,
    pub names: Vec<String>,
    pub max_slots: usize,
}

impl<'a> Compiler<'a> {
    pub(crate) fn new(model: Option<&'a CheckedModel>, hyper: &'a HyperValues, targets: usize) -> Self {
        Compiler { model, hyper, targets, names: Vec::new(), max_slots: targets }
    }

    pub(crate) fn push(&mut self, name: &str) -> usize {
        self.names.push(name.to_string());
        let slot = self.targets + self.names.len() - 1;
        self.max_slots = self.max_slots.max(slot + 1);
        slot
    }

    pub(crate) fn pop(&mut self) {
        self.names.pop();
    }

    fn slot_of(&self, name: &str) -> Option<usize> {
        self.names.iter().rposition(|n| n == name).map(|p| self.targets + p)
    }

    fn var_id(&self, name: &str) -> Option<usize> {
        self.model.and_then(|m| m.var_id(name))
    }

    pub(crate) fn expr(&mut self, e: &Expr) -> Result<CExpr> {
        Ok(match e {
            Expr::Int(v) => CExpr::Const(*v as f64),
            Expr::Real(v) => CExpr::Const(*v),
            Expr::Target(k) if *k < self.targets => CExpr::Slot(*k),
            Expr::Target(k) => return Err(Error::eval(format!("target index @{k} out of scope"))),
            Expr::Neg(x) => match self.expr(x)? {
                CExpr::Const(v) => CExpr::Const(-v),
                x => CExpr::Neg(Box::new(x)),
            },
            Expr::Bin(op, a, b) => CExpr::Bin(*op, Box::new(self.expr(a)?), Box::new(self.expr(b)?)),
            Expr::Call(f, args) => CExpr::Call(*f, args.iter().map(|a| self.expr(a)).collect::<Result<_>>()?),
            Expr::Sum { index, bound, body } => {
                let bound = Box::new(self.expr(bound)?);
                let slot = self.push(index);
                let body = self.expr(body);
                self.pop();
                CExpr::Sum { slot, bound, body: Box::new(body?) }
            }
            Expr::Vector { .. } => return Err(Error::eval(format!("vector `{e}` used as a scalar"))),
            Expr::Ref { name, index } => {
                if let Some(slot) = self.slot_of(name) {
                    return Ok(CExpr::Slot(slot));
                }
                if let Some(h) = self.hyper.get(name) {
                    return Ok(match (h, index.len()) {
                        (HyperValue::Int(v), 0) => CExpr::Const(*v as f64),
                        (HyperValue::Real(v), 0) => CExpr::Const(*v),
                        (HyperValue::IntArray(a), 1) => {
                            let arr: Arc<[f64]> = a.iter().map(|&x| x as f64).collect();
                            CExpr::HyperAt(arr, Box::new(self.expr(&index[0])?))
                        }
                        _ => return Err(Error::eval(format!("bad use of hyperparameter {name}"))),
                    });
                }
                let Some(var) = self.var_id(name) else {
                    return Err(Error::eval(format!("no value for {name}")));
                };
                let dims = self.model.unwrap().vars[var].plates.len();
                if index.len() < dims || index.len() > dims + 1 {
                    return Err(Error::eval(format!("`{e}` is not a scalar element")));
                }
                let idx = index[..dims].iter().map(|i| self.expr(i)).collect::<Result<Vec<_>>>()?;
                let comp = match index.get(dims) {
                    Some(c) => Some(Box::new(self.expr(c)?)),
                    None if self.model.unwrap().vars[var].event_len.is_some() => {
                        return Err(Error::eval(format!("vector `{e}` used as a scalar")))
                    }
                    None => None,
                };
                CExpr::Var { var, idx, comp }
            }
        })
    }

    fn vector(&mut self, e: &Expr) -> Result<CVec> {
        match e {
            Expr::Vector { len, fill } => Ok(CVec::Fill { len: self.expr(len)?, fill: self.expr(fill)? }),
            Expr::Ref { name, index } => {
                let var = self.var_id(name).ok_or_else(|| Error::eval(format!("`{e}` is not a vector")))?;
                let v = &self.model.unwrap().vars[var];
                if v.event_len.is_none() || index.len() != v.plates.len() {
                    return Err(Error::eval(format!("`{e}` is not a vector")));
                }
                Ok(CVec::Row { var, idx: index.iter().map(|i| self.expr(i)).collect::<Result<_>>()? })
            }
            _ => Err(Error::eval(format!("`{e}` is not a vector"))),
        }
    }

    pub(crate) fn atom(&mut self, a: &Atom) -> Result<CAtom> {
        let var = self.var_id(&a.var).ok_or_else(|| Error::eval(format!("unknown variable {}", a.var)))?;
        if a.index.len() > MAX_DIMS {
            return Err(Error::eval(format!("{} has more than {MAX_DIMS} plates", a.var)));
        }
        let idx = a.index.iter().map(|i| self.expr(i)).collect::<Result<Vec<_>>>()?;
        let mut args = Vec::with_capacity(a.args.len());
        for (k, arg) in a.args.iter().enumerate() {
            args.push(if a.family.vector_arg() == Some(k) { CArg::Vector(self.vector(arg)?) } else { CArg::Scalar(self.expr(arg)?) });
        }
        Ok(CAtom { var, idx, family: a.family, args })
    }

    pub(crate) fn cond(&mut self, c: &Cond) -> Result<CCond> {
        let pairs = c.pairs.iter().map(|(e, k)| Ok((self.expr(e)?, *k))).collect::<Result<_>>()?;
        Ok(CCond { pairs, eq: c.eq })
    }

    pub(crate) fn density(&mut self, d: &Density) -> Result<CDensity> {
        Ok(match d {
            Density::Atom(a) => CDensity::Atom(self.atom(a)?),
            Density::Product(items) => CDensity::Product(items.iter().map(|x| self.density(x)).collect::<Result<_>>()?),
            Density::Indexed { index, bound, body } => {
                let bound = self.expr(bound)?;
                let slot = self.push(index);
                let body = self.density(body);
                self.pop();
                CDensity::Indexed { slot, bound, body: Box::new(body?) }
            }
            Density::Guarded { conds, body } => CDensity::Guarded {
                conds: conds.iter().map(|c| self.cond(c)).collect::<Result<_>>()?,
                body: Box::new(self.density(body)?),
            },
            Density::Recip(body) => CDensity::Recip(Box::new(self.density(body)?)),
            Density::Integral { var, .. } => {
                return Err(Error::eval(format!(
                    "integral over {var} has no closed form and cannot be evaluated numerically"
                )))
            }
        })
    }
}

/// Compile a density for evaluation. `targets` is the number of target
/// index slots (`@0`, `@1`, ...) the term may use.
pub fn compile(d: &Density, model: &CheckedModel, hyper: &HyperValues, targets: usize) -> Result<CompiledDensity> {
    let mut c = Compiler::new(Some(model), hyper, targets);
    let root = c.density(d)?;
    Ok(CompiledDensity { root, slots: c.max_slots, targets })
}

/// A compiled index or bound expression over hyperparameters and named
/// slots.
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    root: CExpr,
    slots: usize,
}

impl CompiledExpr {
    pub fn eval_const(&self) -> Result<f64> {
        self.eval_locals(&mut Vec::new())
    }

    /// Evaluate with slot values `locals` (extended as needed).
    pub fn eval_locals(&self, locals: &mut Vec<f64>) -> Result<f64> {
        if locals.len() < self.slots {
            locals.resize(self.slots, 0.0);
        }
        let empty = ParamStore { hyper: HyperValues::default(), vars: Vec::new() };
        let v = self.root.eval(&EvalCtx::new(&empty), locals);
        if v.is_nan() {
            Err(Error::eval("expression is undefined (index out of range?)"))
        } else {
            Ok(v)
        }
    }
}

/// Compile an expression over hyperparameters and the named indices
/// `scope` (slot `k` holds `scope[k]`).
pub fn compile_expr(e: &Expr, scope: &[String], hyper: &HyperValues) -> Result<CompiledExpr> {
    let mut c = Compiler::new(None, hyper, 0);
    for n in scope {
        c.push(n);
    }
    let root = c.expr(e)?;
    Ok(CompiledExpr { root, slots: c.max_slots })
}

/// Log of `expr` at the state in `store`, with `@k` bound to `target[k]`.
/// Out-of-support values give `-inf`; NaN values are an error.
pub fn log_density_at(
    expr: &Density,
    model: &CheckedModel,
    store: &ParamStore,
    target: &[usize],
) -> Result<f64> {
    let c = compile(expr, model, &store.hyper, target.len())?;
    let v = c.eval_at(&EvalCtx::new(store), target);
    if v.is_nan() {
        Err(Error::eval("log density is NaN"))
    } else {
        Ok(v)
    }
}

/// Evaluate a joint density in parallel with a worker-count independent
/// reduction order.
pub fn eval_log_joint(joint: &CompiledDensity, store: &ParamStore, exec: &Executor) -> Result<f64> {
    let v = joint.eval_parallel(&EvalCtx::new(store), exec);
    if v.is_nan() {
        store.check_finite()?;
        Err(Error::eval("log joint is NaN (index out of range or invalid parameters)"))
    } else {
        Ok(v)
    }
}
