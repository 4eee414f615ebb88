use std::fmt;

use super::{classify, ConditionalForm, RefClass, TargetInfo};
use crate::dist::Family;
use crate::expr::{BinOp, Expr, Func};
use crate::ir::{Atom, Cond, Density};

/// Which conjugate pair was recognized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatKind {
    /// Dirichlet prior, Categorical likelihood: value counts.
    Counts,
    /// Beta prior, Bernoulli likelihood: (sum, count).
    BetaBernoulli,
    /// Gaussian prior on a Gaussian mean with known variance:
    /// (sum of precisions, precision-weighted sum).
    NormalMean,
    /// InverseGamma prior on a Gaussian variance with known mean:
    /// (count, sum of squared deviations).
    InverseGammaVariance,
    /// Gamma prior on a Gaussian precision with known mean.
    GammaPrecision,
}

impl StatKind {
    pub fn posterior(self) -> Family {
        match self {
            StatKind::Counts => Family::Dirichlet,
            StatKind::BetaBernoulli => Family::Beta,
            StatKind::NormalMean => Family::Gaussian,
            StatKind::InverseGammaVariance => Family::InverseGamma,
            StatKind::GammaPrecision => Family::Gamma,
        }
    }

    /// Statistics per target element (`event_len` is the Dirichlet
    /// dimension).
    pub fn width(self, event_len: usize) -> usize {
        match self {
            StatKind::Counts => event_len,
            _ => 2,
        }
    }
}

/// One likelihood factor of a conjugate conditional.
#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodTerm {
    /// Plates (outermost first) as written in the conditional.
    pub loops: Vec<(String, Expr)>,
    pub conds: Vec<Cond>,
    pub atom: Atom,
    /// The likelihood argument that does not involve the target (variance
    /// or mean), if the statistic needs it.
    pub other: Option<Expr>,
    /// Tally all target elements in one pass, keyed by this condition's
    /// expressions, instead of enumerating per element.
    pub scatter_key: Option<Vec<Expr>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConjugateDraw {
    pub kind: StatKind,
    pub prior: Atom,
    pub terms: Vec<LikelihoodTerm>,
}

impl ConjugateDraw {
    /// Human-readable posterior update.
    pub fn recipe(&self) -> String {
        let a = &self.prior.args;
        let over: Vec<String> = self.terms.iter().map(term_set).collect();
        let over = over.join(" + ");
        match self.kind {
            StatKind::Counts => {
                let set = self
                    .terms
                    .iter()
                    .map(|t| set_with(t, &format!("{} = v", t.atom.value_ref())))
                    .collect::<Vec<_>>()
                    .join(" + ");
                format!("Dirichlet({} + c) with c[v] = {set}", a[1])
            }
            StatKind::BetaBernoulli => format!(
                "Beta({} + s, {} + n - s) with s = sum {}, n = count over {over}",
                a[0],
                a[1],
                value_of(&self.terms)
            ),
            StatKind::NormalMean => format!(
                "Gaussian(m, v) with 1/v = 1/{} + sum 1/{}, m = v * ({}/{} + sum {}/{}) over {over}",
                paren(&a[1]),
                paren(&other_of(&self.terms)),
                paren(&a[0]),
                paren(&a[1]),
                value_of(&self.terms),
                paren(&other_of(&self.terms))
            ),
            StatKind::InverseGammaVariance => format!(
                "InverseGamma({} + n/2, {} + ss/2) with n = count, ss = sum ({} - {})^2 over {over}",
                a[0],
                a[1],
                value_of(&self.terms),
                paren(&other_of(&self.terms))
            ),
            StatKind::GammaPrecision => format!(
                "Gamma({} + n/2, 1/(1/{} + ss/2)) with n = count, ss = sum ({} - {})^2 over {over}",
                a[0],
                paren(&a[1]),
                value_of(&self.terms),
                paren(&other_of(&self.terms))
            ),
        }
    }
}

impl fmt::Display for ConjugateDraw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.recipe())
    }
}

fn paren(e: &Expr) -> String {
    match e {
        Expr::Bin(..) | Expr::Neg(_) | Expr::Sum { .. } => format!("({e})"),
        _ => e.to_string(),
    }
}

fn value_of(terms: &[LikelihoodTerm]) -> String {
    terms.first().map(|t| t.atom.value_ref().to_string()).unwrap_or_else(|| "x".into())
}

fn other_of(terms: &[LikelihoodTerm]) -> Expr {
    terms.first().and_then(|t| t.other.clone()).unwrap_or(Expr::Int(0))
}

fn set_with(t: &LikelihoodTerm, extra: &str) -> String {
    let loops: Vec<String> = t.loops.iter().map(|(i, b)| format!("{i} in 0..{b}")).collect();
    let mut conds: Vec<String> = vec![extra.to_string()];
    conds.extend(t.conds.iter().map(|c| c.to_string()));
    format!("#{{{} : {}}}", loops.join(", "), conds.join(" && "))
}

fn term_set(t: &LikelihoodTerm) -> String {
    let loops: Vec<String> = t.loops.iter().map(|(i, b)| format!("{i} in 0..{b}")).collect();
    let conds: Vec<String> = t.conds.iter().map(|c| c.to_string()).collect();
    if conds.is_empty() {
        format!("{{{}}}", loops.join(", "))
    } else {
        format!("{{{} : {}}}", loops.join(", "), conds.join(" && "))
    }
}

fn unpack(d: &Density) -> Option<(Vec<(String, Expr)>, Vec<Cond>, &Atom)> {
    let mut loops = Vec::new();
    let mut conds = Vec::new();
    let mut cur = d;
    loop {
        match cur {
            Density::Indexed { index, bound, body } => {
                loops.push((index.clone(), bound.clone()));
                cur = body;
            }
            Density::Guarded { conds: cs, body } => {
                conds.extend(cs.iter().cloned());
                cur = body;
            }
            Density::Atom(a) => return Some((loops, conds, a)),
            _ => return None,
        }
    }
}

/// Whether `e` is a reference to the target element in this context.
fn is_target_at(e: &Expr, t: &TargetInfo, loops: &[String], conds: &[Cond]) -> bool {
    match e {
        Expr::Ref { name, index } if name == t.name && index.len() == t.dims => {
            classify(index, t, loops, &[], conds) == RefClass::At
        }
        _ => false,
    }
}

/// `t^-1` or `1 / t`.
fn precision_of(e: &Expr) -> Option<&Expr> {
    match e {
        Expr::Call(Func::Pow, args) if matches!(args[1], Expr::Int(-1)) || args[1] == Expr::Real(-1.0) => Some(&args[0]),
        Expr::Bin(BinOp::Div, one, t) if matches!(**one, Expr::Int(1)) || **one == Expr::Real(1.0) => Some(t),
        _ => None,
    }
}

fn match_term(kind: StatKind, atom: &Atom, t: &TargetInfo, loops: &[String], conds: &[Cond]) -> Option<Option<Expr>> {
    let slot = match (kind, atom.family) {
        (StatKind::Counts, Family::Categorical) => 1,
        (StatKind::BetaBernoulli, Family::Bernoulli) => 0,
        (StatKind::NormalMean, Family::Gaussian) => 0,
        (StatKind::InverseGammaVariance | StatKind::GammaPrecision, Family::Gaussian) => 1,
        _ => return None,
    };
    let target_arg = match kind {
        StatKind::GammaPrecision => precision_of(&atom.args[1])?,
        _ => &atom.args[slot],
    };
    if atom.var == t.name || !is_target_at(target_arg, t, loops, conds) {
        return None;
    }
    let mentions = |e: &Expr| e.mentions(t.name);
    if atom.index.iter().any(mentions) || atom.args.iter().enumerate().any(|(k, a)| k != slot && mentions(a)) {
        return None;
    }
    if conds.iter().any(|c| c.pairs.iter().any(|(e, _)| mentions(e))) {
        return None;
    }
    Some((atom.family == Family::Gaussian).then(|| atom.args[1 - slot].clone()))
}

fn prior_kind(family: Family) -> Option<StatKind> {
    Some(match family {
        Family::Dirichlet => StatKind::Counts,
        Family::Beta => StatKind::BetaBernoulli,
        Family::Gaussian => StatKind::NormalMean,
        Family::InverseGamma => StatKind::InverseGammaVariance,
        Family::Gamma => StatKind::GammaPrecision,
        _ => return None,
    })
}

/// Key expressions for single-pass tallying: an equality condition that
/// fixes every target index, with no plate bound depending on the target.
fn scatter_key(loops: &[(String, Expr)], conds: &[Cond], dims: usize) -> Option<Vec<Expr>> {
    if dims == 0 || loops.iter().any(|(_, b)| b.has_target()) {
        return None;
    }
    let c = conds.iter().find(|c| c.eq && c.pairs.len() == dims && c.pairs.iter().enumerate().all(|(k, (_, t))| *t == k))?;
    if c.pairs.iter().any(|(e, _)| e.has_target()) {
        return None;
    }
    Some(c.pairs.iter().map(|(e, _)| e.clone()).collect())
}

/// Recognize a closed-form posterior for a conditional.
///
/// The numerator must be one prior atom for the target element plus
/// likelihood nests in which the target appears only as the conjugate
/// parameter. The conjugacy table is tried in a fixed order: Dirichlet,
/// Beta, Gaussian mean, InverseGamma variance, Gamma precision.
pub fn detect_conjugacy(cond: &ConditionalForm) -> Option<ConjugateDraw> {
    let t = TargetInfo { name: &cond.target, dims: cond.dims, bounds: Vec::new(), random: &[] };
    let exact: Vec<Expr> = (0..cond.dims).map(Expr::Target).collect();
    let mut prior = None;
    let mut rest = Vec::new();
    for f in cond.factors() {
        match f {
            Density::Atom(a) if a.var == cond.target && a.index == exact && prior.is_none() => prior = Some(a),
            other => rest.push(other),
        }
    }
    let prior = prior?;
    if prior.args.iter().any(|a| a.mentions(&cond.target)) {
        return None;
    }
    let kind = prior_kind(prior.family)?;
    let mut terms = Vec::new();
    for f in rest {
        let (loops, conds, atom) = unpack(f)?;
        let names: Vec<String> = loops.iter().map(|(n, _)| n.clone()).collect();
        let other = match_term(kind, atom, &t, &names, &conds)?;
        let scatter = scatter_key(&loops, &conds, cond.dims);
        terms.push(LikelihoodTerm { loops, conds, atom: atom.clone(), other, scatter_key: scatter });
    }
    Some(ConjugateDraw { kind, prior: prior.clone(), terms })
}
