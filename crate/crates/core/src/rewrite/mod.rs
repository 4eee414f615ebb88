//! Derivation of full conditionals by term rewriting, conjugacy detection
//! and sampler planning.
//!
//! A conditional starts as `joint / integral(joint, d x)` and is rewritten
//! to a fixpoint with these rules, highest priority first:
//!
//! * cancel: `P * 1/P => 1`;
//! * partition: `prod(i, P) => prod(i, {P}[e = @]) * prod(i, {P}[e != @])`
//!   where `P` refers to the target variable at an index `e` that depends
//!   on a plate index or a random variable;
//! * pull-out: `integral(P * Q, dx) => P * integral(Q, dx)` when `P` does
//!   not depend on `x`.
//!
//! Between rule applications the term is normalized: products are
//! flattened, plates and guards are distributed over products, and a plate
//! index that a guard pins to the target index is substituted away.

mod conjugacy;
mod plan;

use std::fmt;

pub use conjugacy::{detect_conjugacy, ConjugateDraw, LikelihoodTerm, StatKind};
pub use plan::{plan_inference, plan_inference_with, plan_symbolic, Block, Method, SamplerPlan, Strategy};

use crate::dsl::CheckedModel;
use crate::expr::Expr;
use crate::ir::{Cond, Density, JointDensity};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Introduce the normalizing integral (applied once, at the start).
    ProductSum,
    Cancel,
    Partition,
    PullOut,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::ProductSum => "product-sum",
            Rule::Cancel => "cancel",
            Rule::Partition => "partition-product",
            Rule::PullOut => "pull-out-of-integral",
        }
    }
}

/// `numerator / normalizer`, the full conditional of one element of
/// `target`, written `target[@0][@1]...`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalForm {
    pub target: String,
    pub target_ref: Expr,
    pub dims: usize,
    pub numerator: Density,
    pub normalizer: Density,
    /// Rules in the order they fired.
    pub steps: Vec<Rule>,
    /// Whether the step cap stopped the rewriting early.
    pub hit_cap: bool,
}

impl ConditionalForm {
    /// Top-level factors of the numerator.
    pub fn factors(&self) -> &[Density] {
        match &self.numerator {
            Density::Product(items) => items,
            other => std::slice::from_ref(other),
        }
    }

    /// True when the numerator refers to the target variable only at the
    /// target element, so all elements can be resampled independently.
    pub fn is_parallelizable(&self) -> bool {
        let t = TargetInfo { name: &self.target, dims: self.dims, bounds: Vec::new(), random: &[] };
        let mut ok = true;
        for f in self.factors() {
            scan_nest(f, &t, &mut |class| ok &= class == RefClass::At);
        }
        ok
    }
}

impl fmt::Display for ConditionalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}", self.numerator, self.normalizer)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RefClass {
    /// The target element itself.
    At,
    /// Provably a different element.
    Excluded,
    /// Some element; splittable by partitioning on the index.
    Unresolved,
    /// Some element, with an index the rules cannot split on.
    Opaque,
}

struct TargetInfo<'a> {
    name: &'a str,
    dims: usize,
    /// Plate bounds of the target, written over `@0..`.
    bounds: Vec<Expr>,
    random: &'a [String],
}

fn target_expr(dims: usize) -> Vec<Expr> {
    (0..dims).map(Expr::Target).collect()
}

fn classify(index: &[Expr], t: &TargetInfo, loops: &[String], sums: &[String], conds: &[Cond]) -> RefClass {
    let index = &index[..t.dims.min(index.len())];
    if index.iter().enumerate().all(|(k, e)| *e == Expr::Target(k)) {
        return RefClass::At;
    }
    if conds.iter().any(|c| c.eq && c.matches(index)) {
        return RefClass::At;
    }
    if conds.iter().any(|c| !c.eq && c.matches(index)) {
        return RefClass::Excluded;
    }
    let names: Vec<String> = index.iter().flat_map(|e| e.names()).collect();
    if names.iter().any(|n| sums.contains(n)) {
        return RefClass::Opaque;
    }
    if names.iter().any(|n| loops.contains(n) || t.random.contains(n)) {
        RefClass::Unresolved
    } else {
        RefClass::Opaque
    }
}

/// Find references to the target inside `e`, tracking summation binders.
fn scan_expr(e: &Expr, t: &TargetInfo, loops: &[String], sums: &mut Vec<String>, conds: &[Cond], f: &mut dyn FnMut(RefClass, &[Expr])) {
    match e {
        Expr::Ref { name, index } => {
            if name == t.name {
                f(classify(index, t, loops, sums, conds), index);
            }
            index.iter().for_each(|i| scan_expr(i, t, loops, sums, conds, f));
        }
        Expr::Int(_) | Expr::Real(_) | Expr::Target(_) => {}
        Expr::Neg(x) => scan_expr(x, t, loops, sums, conds, f),
        Expr::Bin(_, a, b) => {
            scan_expr(a, t, loops, sums, conds, f);
            scan_expr(b, t, loops, sums, conds, f);
        }
        Expr::Call(_, args) => args.iter().for_each(|a| scan_expr(a, t, loops, sums, conds, f)),
        Expr::Sum { index, bound, body } => {
            scan_expr(bound, t, loops, sums, conds, f);
            sums.push(index.clone());
            scan_expr(body, t, loops, sums, conds, f);
            sums.pop();
        }
        Expr::Vector { len, fill } => {
            scan_expr(len, t, loops, sums, conds, f);
            scan_expr(fill, t, loops, sums, conds, f);
        }
    }
}

/// Classify every reference to the target in a factor. Guards apply to
/// everything below them.
fn scan_nest_with(d: &Density, t: &TargetInfo, f: &mut dyn FnMut(RefClass, &[Expr])) {
    fn go(
        d: &Density,
        t: &TargetInfo,
        loops: &mut Vec<String>,
        conds: &mut Vec<Cond>,
        f: &mut dyn FnMut(RefClass, &[Expr]),
    ) {
        let mut sums = Vec::new();
        match d {
            Density::Atom(a) => {
                if a.var == t.name {
                    f(classify(&a.index, t, loops, &sums, conds), &a.index);
                }
                for e in a.index.iter().chain(&a.args) {
                    scan_expr(e, t, loops, &mut sums, conds, f);
                }
            }
            Density::Product(items) => items.iter().for_each(|x| go(x, t, loops, conds, f)),
            Density::Indexed { index, bound, body } => {
                scan_expr(bound, t, loops, &mut sums, conds, f);
                loops.push(index.clone());
                go(body, t, loops, conds, f);
                loops.pop();
            }
            Density::Guarded { conds: cs, body } => {
                let n = conds.len();
                conds.extend(cs.iter().cloned());
                for c in cs {
                    for (e, _) in &c.pairs {
                        scan_expr(e, t, loops, &mut sums, conds, f);
                    }
                }
                go(body, t, loops, conds, f);
                conds.truncate(n);
            }
            Density::Recip(body) => go(body, t, loops, conds, f),
            // the integration variable is a binder, not a use
            Density::Integral { body, .. } => go(body, t, loops, conds, f),
        }
    }
    go(d, t, &mut Vec::new(), &mut Vec::new(), f)
}

fn scan_nest(d: &Density, t: &TargetInfo, f: &mut dyn FnMut(RefClass)) {
    scan_nest_with(d, t, &mut |c, _| f(c));
}

fn depends(d: &Density, t: &TargetInfo) -> bool {
    let mut dep = false;
    scan_nest(d, t, &mut |c| dep |= c != RefClass::Excluded);
    dep
}

fn first_unresolved(d: &Density, t: &TargetInfo) -> Option<Vec<Expr>> {
    let mut found = None;
    scan_nest_with(d, t, &mut |c, index| {
        if c == RefClass::Unresolved && found.is_none() {
            found = Some(index[..t.dims.min(index.len())].to_vec());
        }
    });
    found
}

/// Add `cond` at the innermost level of a plate nest.
fn guard_innermost(d: &Density, cond: Cond) -> Density {
    match d {
        Density::Indexed { index, bound, body } => Density::indexed(index.clone(), bound.clone(), guard_innermost(body, cond)),
        Density::Guarded { conds, body } => {
            let mut conds = conds.clone();
            conds.push(cond);
            Density::guarded(conds, (**body).clone())
        }
        other => Density::guarded(vec![cond], other.clone()),
    }
}

fn is_nest(d: &Density) -> bool {
    matches!(d, Density::Atom(_) | Density::Indexed { .. } | Density::Guarded { .. })
}

fn rule_partition(d: &Density, t: &TargetInfo) -> Option<Density> {
    match d {
        Density::Product(items) => {
            for (i, item) in items.iter().enumerate() {
                let replacement = if is_nest(item) {
                    first_unresolved(item, t).map(|index| {
                        let cond = Cond { pairs: index.into_iter().enumerate().map(|(k, e)| (e, k)).collect(), eq: true };
                        Density::Product(vec![guard_innermost(item, cond.clone()), guard_innermost(item, cond.negate())])
                    })
                } else {
                    rule_partition(item, t)
                };
                if let Some(r) = replacement {
                    let mut items = items.clone();
                    items[i] = r;
                    return Some(Density::Product(items));
                }
            }
            None
        }
        Density::Recip(body) => rule_partition(body, t).map(Density::recip),
        Density::Integral { var, body } => {
            rule_partition(body, t).map(|b| Density::Integral { var: var.clone(), body: Box::new(b) })
        }
        _ => None,
    }
}

fn rule_cancel(d: &Density) -> Option<Density> {
    match d {
        Density::Product(items) => {
            for (i, a) in items.iter().enumerate() {
                if matches!(a, Density::Recip(_)) {
                    continue;
                }
                let hit = items.iter().position(|b| matches!(b, Density::Recip(inner) if **inner == *a));
                if let Some(j) = hit {
                    let rest = items.iter().enumerate().filter(|(k, _)| *k != i && *k != j).map(|(_, x)| x.clone());
                    return Some(Density::Product(rest.collect()));
                }
            }
            for (i, item) in items.iter().enumerate() {
                if let Some(r) = rule_cancel(item) {
                    let mut items = items.clone();
                    items[i] = r;
                    return Some(Density::Product(items));
                }
            }
            None
        }
        Density::Recip(body) => rule_cancel(body).map(Density::recip),
        Density::Integral { var, body } => rule_cancel(body).map(|b| Density::Integral { var: var.clone(), body: Box::new(b) }),
        _ => None,
    }
}

fn rule_pull_out(d: &Density, t: &TargetInfo) -> Option<Density> {
    match d {
        Density::Integral { var, body } => {
            let items = match &**body {
                Density::Product(items) => items.clone(),
                other => vec![other.clone()],
            };
            let i = items.iter().position(|x| !depends(x, t))?;
            let mut rest = items;
            let out = rest.remove(i);
            Some(Density::Product(vec![out, Density::Integral { var: var.clone(), body: Box::new(Density::Product(rest)) }]))
        }
        Density::Product(items) => {
            for (i, item) in items.iter().enumerate() {
                if let Some(r) = rule_pull_out(item, t) {
                    let mut items = items.clone();
                    items[i] = r;
                    return Some(Density::Product(items));
                }
            }
            None
        }
        Density::Recip(body) => rule_pull_out(body, t).map(Density::recip),
        _ => None,
    }
}

fn simplify_conds(conds: &[Cond]) -> Option<Vec<Cond>> {
    let mut out = Vec::new();
    for c in conds {
        let pairs: Vec<(Expr, usize)> = c.pairs.iter().filter(|(e, k)| *e != Expr::Target(*k)).cloned().collect();
        match (pairs.is_empty(), c.eq) {
            (true, true) => {}
            // an inequality between equal tuples never holds
            (true, false) => return None,
            _ => {
                let c = Cond { pairs, eq: c.eq };
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
    }
    Some(out)
}

/// Substitute a pinned plate index when a guard fixes it to the target
/// index and its range is exactly the target's.
fn pin(d: &Density, t: &TargetInfo) -> Option<Density> {
    let Density::Indexed { index, bound, body } = d else { return None };
    let innermost_conds = {
        let mut cur = &**body;
        loop {
            match cur {
                Density::Indexed { body, .. } => cur = body,
                Density::Guarded { conds, .. } => break conds.clone(),
                _ => break Vec::new(),
            }
        }
    };
    let var = Expr::var(index.clone());
    for c in innermost_conds.iter().filter(|c| c.eq) {
        for (e, k) in &c.pairs {
            if *e == var && t.bounds.get(*k) == Some(bound) {
                let with = Expr::Target(*k);
                return Some(body.map_exprs(&mut |x| x.substitute(index, &with)));
            }
        }
    }
    // try deeper levels
    pin(body, t).map(|b| Density::indexed(index.clone(), bound.clone(), b))
}

fn normalize(d: &Density, t: &TargetInfo) -> Density {
    match d {
        Density::Atom(_) => d.clone(),
        Density::Product(items) => {
            let mut out = Vec::new();
            for x in items {
                match normalize(x, t) {
                    Density::Product(inner) => out.extend(inner),
                    other => out.push(other),
                }
            }
            Density::Product(out)
        }
        Density::Indexed { index, bound, body } => match normalize(body, t) {
            Density::Product(items) => Density::Product(
                items.into_iter().map(|x| normalize(&Density::indexed(index.clone(), bound.clone(), x), t)).collect(),
            ),
            body => {
                let nest = Density::indexed(index.clone(), bound.clone(), body);
                match pin(&nest, t) {
                    Some(p) => normalize(&p, t),
                    None => nest,
                }
            }
        },
        Density::Guarded { conds, body } => {
            let Some(conds) = simplify_conds(conds) else { return Density::one() };
            match normalize(body, t) {
                Density::Product(items) => Density::Product(
                    items.into_iter().map(|x| normalize(&Density::guarded(conds.clone(), x), t)).collect(),
                ),
                Density::Guarded { conds: inner, body } => {
                    let mut all = conds;
                    all.extend(inner);
                    normalize(&Density::guarded(all, *body), t)
                }
                body if conds.is_empty() => body,
                body => Density::guarded(conds, body),
            }
        }
        Density::Recip(body) => match normalize(body, t) {
            Density::Product(items) => {
                Density::Product(items.into_iter().map(|x| normalize(&Density::recip(x), t)).collect())
            }
            Density::Recip(inner) => *inner,
            body => Density::recip(body),
        },
        Density::Integral { var, body } => {
            let body = match normalize(body, t) {
                p @ Density::Product(_) => p,
                other => Density::Product(vec![other]),
            };
            Density::Integral { var: var.clone(), body: Box::new(body) }
        }
    }
}

/// Derive the full conditional of one element of `target`.
///
/// Rewriting is deterministic. It stops at a fixpoint or after a step cap
/// that is linear in the size of the joint (`hit_cap` records the latter).
pub fn derive_conditional(model: &CheckedModel, joint: &JointDensity, target: &str) -> ConditionalForm {
    let var = model.var(target).unwrap_or_else(|| panic!("{target} is not a random variable of the model"));
    let dims = var.plates.len();
    let names: Vec<String> = var.plates.iter().map(|p| p.index.clone()).collect();
    let bounds = var
        .plates
        .iter()
        .map(|p| {
            names.iter().enumerate().fold(p.bound.clone(), |b, (k, n)| b.substitute(n, &Expr::Target(k)))
        })
        .collect();
    let t = TargetInfo { name: target, dims, bounds, random: &joint.var_order };
    let target_ref = Expr::indexed(target, target_expr(dims));

    let start = Density::Product(vec![
        joint.expr.clone(),
        Density::recip(Density::Integral { var: target_ref.clone(), body: Box::new(joint.expr.clone()) }),
    ]);
    let mut d = normalize(&start, &t);
    let mut steps = vec![Rule::ProductSum];
    let cap = 64 + 8 * joint.expr.node_count();
    let mut hit_cap = false;
    loop {
        if steps.len() > cap {
            hit_cap = true;
            break;
        }
        let (rule, next) = if let Some(x) = rule_cancel(&d) {
            (Rule::Cancel, x)
        } else if let Some(x) = rule_partition(&d, &t) {
            (Rule::Partition, x)
        } else if let Some(x) = rule_pull_out(&d, &t) {
            (Rule::PullOut, x)
        } else {
            break;
        };
        steps.push(rule);
        d = normalize(&next, &t);
    }

    let items = match d {
        Density::Product(items) => items,
        other => vec![other],
    };
    let mut numerator = Vec::new();
    let mut normalizer = None;
    for item in items {
        match item {
            Density::Recip(inner) if matches!(*inner, Density::Integral { .. }) && normalizer.is_none() => {
                normalizer = Some(*inner)
            }
            other => numerator.push(other),
        }
    }
    let numerator = Density::Product(numerator);
    let normalizer = normalizer
        .unwrap_or_else(|| Density::Integral { var: target_ref.clone(), body: Box::new(numerator.clone()) });
    ConditionalForm { target: target.to_string(), target_ref, dims, numerator, normalizer, steps, hit_cap }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::compile_model;
    use crate::ir::lower;

    #[test]
    fn other_priors_cancel() {
        let m = compile_model("model() { x = Gaussian(0, 1).sample(); y = Gaussian(x, 1).sample() }").unwrap();
        let j = lower(&m);
        let c = derive_conditional(&m, &j, "y");
        assert_eq!(c.numerator.to_string(), "p(y | Gaussian(x, 1))");
        assert_eq!(c.normalizer.to_string(), "integral(p(y | Gaussian(x, 1)), d y)");
        assert!(!c.hit_cap);
    }

    #[test]
    fn plate_element_is_pinned() {
        let m = compile_model(
            "model(N: int) { m = Gaussian(0, 1).sample(N); for i in 0..N { x = Gaussian(m[i], 1).sample() } }",
        )
        .unwrap();
        let c = derive_conditional(&m, &lower(&m), "m");
        assert_eq!(c.numerator.to_string(), "p(m[@0] | Gaussian(0, 1)) * p(x[@0] | Gaussian(m[@0], 1))");
        assert!(c.is_parallelizable());
    }
}
