//! Symbolic probability densities.
//!
//! A [`Density`] is built from atoms `p(x | Family(args))`, products, indexed
//! products `prod(i in 0..N, P)`, reciprocals, integrals and guarded terms
//! `{P}[c]`. Lowering a checked model gives its joint density; the rewrite
//! engine manipulates these terms to derive full conditionals.

mod eval;

use std::collections::BTreeSet;
use std::fmt;

pub use eval::{
    compile, compile_expr, eval_log_joint, log_density_at, CompiledDensity, CompiledExpr, EvalCtx, Override, MAX_DIMS,
};
pub(crate) use eval::{element, CAtom, CCond, CExpr, Compiler};

use crate::dist::Family;
use crate::dsl::CheckedModel;
use crate::expr::Expr;

/// `p(var[index] | family(args))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub var: String,
    pub index: Vec<Expr>,
    pub family: Family,
    pub args: Vec<Expr>,
}

impl Atom {
    pub fn value_ref(&self) -> Expr {
        Expr::indexed(self.var.clone(), self.index.clone())
    }
}

/// `(e_0, .., e_n) = (@k_0, .., @k_n)` or its negation. `pairs` holds
/// `(e, k)`; an empty equality is true and an empty inequality is false.
#[derive(Clone, Debug, PartialEq)]
pub struct Cond {
    pub pairs: Vec<(Expr, usize)>,
    pub eq: bool,
}

impl Cond {
    pub fn negate(&self) -> Cond {
        Cond { pairs: self.pairs.clone(), eq: !self.eq }
    }

    /// Whether this condition compares exactly `index` (positionally) with
    /// the target.
    pub fn matches(&self, index: &[Expr]) -> bool {
        self.pairs.len() == index.len() && self.pairs.iter().enumerate().all(|(k, (e, t))| *t == k && *e == index[k])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Density {
    Atom(Atom),
    Product(Vec<Density>),
    Indexed { index: String, bound: Expr, body: Box<Density> },
    Recip(Box<Density>),
    /// `integral(body, d var)`; `var` is the integrated element reference.
    Integral { var: Expr, body: Box<Density> },
    /// `{body}[conds]`, contributing only where every condition holds.
    Guarded { conds: Vec<Cond>, body: Box<Density> },
}

impl Density {
    pub fn one() -> Density {
        Density::Product(Vec::new())
    }

    pub fn indexed(index: impl Into<String>, bound: Expr, body: Density) -> Density {
        Density::Indexed { index: index.into(), bound, body: Box::new(body) }
    }

    pub fn guarded(conds: Vec<Cond>, body: Density) -> Density {
        Density::Guarded { conds, body: Box::new(body) }
    }

    pub fn recip(body: Density) -> Density {
        Density::Recip(Box::new(body))
    }

    /// Visit every node, outermost first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Density)) {
        f(self);
        match self {
            Density::Atom(_) => {}
            Density::Product(items) => items.iter().for_each(|d| d.walk(f)),
            Density::Indexed { body, .. }
            | Density::Recip(body)
            | Density::Integral { body, .. }
            | Density::Guarded { body, .. } => body.walk(f),
        }
    }

    /// Every expression in the term: atom indices and arguments, bounds,
    /// guard expressions and integration variables.
    pub fn exprs<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        self.walk(&mut |d| match d {
            Density::Atom(a) => {
                a.index.iter().for_each(&mut *f);
                a.args.iter().for_each(&mut *f);
            }
            Density::Indexed { bound, .. } => f(bound),
            Density::Integral { var, .. } => f(var),
            Density::Guarded { conds, .. } => conds.iter().flat_map(|c| &c.pairs).for_each(|(e, _)| f(e)),
            Density::Product(_) | Density::Recip(_) => {}
        });
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.walk(&mut |d| {
            if let Density::Atom(a) = d {
                out.push(a);
            }
        });
        out
    }

    /// Number of nodes, counting expression nodes.
    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        self.exprs(&mut |e| n += e.size());
        n
    }

    /// Rebuild the term with every expression passed through `f`.
    pub fn map_exprs(&self, f: &mut dyn FnMut(&Expr) -> Expr) -> Density {
        match self {
            Density::Atom(a) => Density::Atom(Atom {
                var: a.var.clone(),
                index: a.index.iter().map(&mut *f).collect(),
                family: a.family,
                args: a.args.iter().map(&mut *f).collect(),
            }),
            Density::Product(items) => Density::Product(items.iter().map(|d| d.map_exprs(f)).collect()),
            Density::Indexed { index, bound, body } => {
                Density::indexed(index.clone(), f(bound), body.map_exprs(f))
            }
            Density::Recip(body) => Density::recip(body.map_exprs(f)),
            Density::Integral { var, body } => Density::Integral { var: f(var), body: Box::new(body.map_exprs(f)) },
            Density::Guarded { conds, body } => Density::guarded(
                conds
                    .iter()
                    .map(|c| Cond { pairs: c.pairs.iter().map(|(e, k)| (f(e), *k)).collect(), eq: c.eq })
                    .collect(),
                body.map_exprs(f),
            ),
        }
    }

    /// Whether `name` occurs anywhere in the term.
    pub fn mentions(&self, name: &str) -> bool {
        let mut found = false;
        self.walk(&mut |d| {
            if let Density::Atom(a) = d {
                found |= a.var == name;
            }
        });
        self.exprs(&mut |e| found |= e.mentions(name));
        found
    }
}

/// The random variables occurring in `expr`, including those that appear
/// only in arguments, subscripts or guards. `vars` lists the model's random
/// variable names.
pub fn free_vars<S: AsRef<str>>(expr: &Density, vars: &[S]) -> BTreeSet<String> {
    vars.iter().map(|v| v.as_ref()).filter(|v| expr.mentions(v)).map(str::to_string).collect()
}

/// The joint density of a model: one indexed product of atoms per random
/// variable, in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDensity {
    pub expr: Density,
    pub var_order: Vec<String>,
}

impl JointDensity {
    /// The factor of `var` (its atom wrapped in its plates).
    pub fn factor(&self, var: &str) -> Option<&Density> {
        let Density::Product(items) = &self.expr else { return None };
        items.iter().find(|d| d.atoms().first().is_some_and(|a| a.var == var))
    }

    pub fn free_vars(&self, expr: &Density) -> BTreeSet<String> {
        free_vars(expr, &self.var_order)
    }
}

/// Lower a checked model to its joint density.
pub fn lower(model: &CheckedModel) -> JointDensity {
    let mut factors = Vec::with_capacity(model.vars.len());
    for v in &model.vars {
        let atom = Density::Atom(Atom {
            var: v.name.clone(),
            index: v.plates.iter().map(|p| Expr::var(p.index.clone())).collect(),
            family: v.family,
            args: v.args.clone(),
        });
        let nest = v.plates.iter().rev().fold(atom, |body, p| Density::indexed(p.index.clone(), p.bound.clone(), body));
        factors.push(nest);
    }
    JointDensity { expr: Density::Product(factors), var_order: model.vars.iter().map(|v| v.name.clone()).collect() }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.eq { "=" } else { "!=" };
        if self.pairs.len() == 1 {
            let (e, k) = &self.pairs[0];
            return write!(f, "{e} {op} @{k}");
        }
        let lhs: Vec<String> = self.pairs.iter().map(|(e, _)| e.to_string()).collect();
        let rhs: Vec<String> = self.pairs.iter().map(|(_, k)| format!("@{k}")).collect();
        write!(f, "({}) {op} ({})", lhs.join(", "), rhs.join(", "))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
        write!(f, "p({} | {}({}))", self.value_ref(), self.family.name(), args.join(", "))
    }
}

/// Canonical single-line rendering, used by golden tests and `describe`.
impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Atom(a) => write!(f, "{a}"),
            Density::Product(items) if items.is_empty() => write!(f, "1"),
            Density::Product(items) => {
                for (i, d) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " * ")?;
                    }
                    write!(f, "{d}")?;
                }
                Ok(())
            }
            Density::Indexed { index, bound, body } => write!(f, "prod({index} in 0..{bound}, {body})"),
            Density::Recip(body) => write!(f, "1 / ({body})"),
            Density::Integral { var, body } => write!(f, "integral({body}, d {var})"),
            Density::Guarded { conds, body } => {
                write!(f, "{{{body}}}[")?;
                for (i, c) in conds.iter().enumerate() {
                    if i > 0 {
                        write!(f, " && ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "]")
            }
        }
    }
}
