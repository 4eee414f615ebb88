use crate::dist::{sample, sample_dirichlet_batch, BatchSpec, BatchStrategy, Concentration, Distribution, Family};
use crate::dsl::CheckedModel;
use crate::exec::{Executor, CHUNK};
use crate::expr::Expr;
use crate::ir::{compile, element, Atom, CAtom, CCond, CExpr, CompiledDensity, Compiler, Density, EvalCtx, Override};
use crate::rewrite::{Block, ConjugateDraw, LikelihoodTerm, SamplerPlan, StatKind, Strategy};
use crate::rng::{RngStream, StreamKey};
use crate::runtime::{ParamStore, SamplerConfig};
use crate::{Error, Result};

/// Stream id reserved for block-level accept decisions.
pub const ACCEPT_STREAM: u16 = u16::MAX;

/// A variable's own prior atom, compiled over its plate indices.
pub(crate) struct VarInfo {
    pub id: usize,
    pub family: Family,
    pub dims: usize,
    pub atom: CAtom,
    pub slots: usize,
}

impl VarInfo {
    pub fn new(model: &CheckedModel, store: &ParamStore, id: usize) -> Result<Self> {
        let v = &model.vars[id];
        let dims = v.plates.len();
        let sub = |e: &Expr| {
            v.plates.iter().enumerate().fold(e.clone(), |e, (k, p)| e.substitute(&p.index, &Expr::Target(k)))
        };
        let atom = Atom {
            var: v.name.clone(),
            index: (0..dims).map(Expr::Target).collect(),
            family: v.family,
            args: v.args.iter().map(sub).collect(),
        };
        let mut c = Compiler::new(Some(model), &store.hyper, dims);
        let atom = c.atom(&atom)?;
        Ok(VarInfo { id, family: v.family, dims, atom, slots: c.max_slots.max(1) })
    }

    fn locals(&self, store: &ParamStore, flat: usize) -> Vec<f64> {
        let mut loc = vec![0.0; self.slots];
        set_target(store, self.id, flat, &mut loc);
        loc
    }

    /// Number of values of a discrete variable.
    fn support(&self, ctx: &EvalCtx, loc: &mut [f64]) -> usize {
        match self.family {
            Family::Bernoulli => 2,
            _ => {
                let k = self.atom.args[0].scalar(ctx, loc);
                if k >= 1.0 {
                    k as usize
                } else {
                    1
                }
            }
        }
    }

    /// Symmetric random-walk proposal for one element.
    fn propose(&self, ctx: &EvalCtx, loc: &mut [f64], cur: &[f64], rng: &mut RngStream, scale: f64, out: &mut [f64]) {
        out.copy_from_slice(cur);
        match self.family {
            Family::Categorical => out[0] = rng.below(self.support(ctx, loc) as u64) as f64,
            Family::Bernoulli => out[0] = 1.0 - cur[0],
            Family::Dirichlet => {
                let n = out.len();
                if n >= 2 {
                    let a = rng.below(n as u64) as usize;
                    let mut b = rng.below(n as u64 - 1) as usize;
                    if b >= a {
                        b += 1;
                    }
                    let eps = scale * sample::normal(rng);
                    out[a] += eps;
                    out[b] -= eps;
                }
            }
            _ => out[0] = cur[0] + scale * sample::normal(rng),
        }
    }
}

/// Write the plate indices of element `flat` of `var` into slots `0..dims`.
fn set_target(store: &ParamStore, var: usize, flat: usize, loc: &mut [f64]) {
    let layout = &store.vars[var].layout;
    let mut idx = Vec::with_capacity(layout.dims);
    layout.unflatten(flat, &mut idx);
    for (k, i) in idx.into_iter().enumerate() {
        loc[k] = i as f64;
    }
}

/// Draw every unobserved element from its prior, in declaration order.
pub(crate) fn ancestral(model: &CheckedModel, store: &mut ParamStore, seed: u64, sweep: u32, exec: &Executor) -> Result<()> {
    for id in 0..model.vars.len() {
        if store.vars[id].observed {
            continue;
        }
        let info = VarInfo::new(model, store, id)?;
        let width = store.vars[id].layout.event_len;
        let elements = store.vars[id].layout.elements;
        let name = &model.vars[id].name;
        if model.vars[id].args.iter().any(|a| a.mentions(name)) {
            // chains read earlier elements of themselves: draw in order
            for flat in 0..elements {
                let ctx = EvalCtx::new(store);
                let mut loc = info.locals(store, flat);
                let stream = |c: usize| RngStream::new(seed, id as u16, (flat * width + c) as u64, sweep);
                let row = draw_prior(&info, &ctx, &mut loc, width, stream)?;
                store.vars[id].values[flat * width..(flat + 1) * width].copy_from_slice(&row);
            }
            continue;
        }
        let rows = {
            let st: &ParamStore = store;
            let ctx = EvalCtx::new(st);
            exec.map(elements, |flat| {
                let mut loc = info.locals(st, flat);
                let stream = |c: usize| RngStream::new(seed, id as u16, (flat * width + c) as u64, sweep);
                draw_prior(&info, &ctx, &mut loc, width, stream)
            })
        };
        let values = &mut store.vars[id].values;
        for (flat, row) in rows.into_iter().enumerate() {
            values[flat * width..(flat + 1) * width].copy_from_slice(&row?);
        }
    }
    Ok(())
}

fn draw_prior(
    info: &VarInfo,
    ctx: &EvalCtx,
    loc: &mut [f64],
    width: usize,
    stream: impl Fn(usize) -> RngStream,
) -> Result<Vec<f64>> {
    let a = &info.atom.args;
    let s = |k: usize, loc: &mut [f64]| a[k].scalar(ctx, loc);
    let mut rng = stream(0);
    let name = &ctx.store.vars[info.id].name;
    let fail = |e: crate::dist::DistError| Error::eval(format!("cannot initialize {name}: {e}"));
    Ok(match info.family {
        Family::Dirichlet => {
            let alpha = a[1].vector(ctx, loc).ok_or_else(|| Error::eval(format!("cannot initialize {name}")))?;
            let alpha: Vec<f64> = (0..width).map(|k| alpha.get(k)).collect();
            Distribution::dirichlet(alpha.clone()).map_err(fail)?;
            let mut row = vec![0.0; width];
            sample::dirichlet_into(&mut row, |k| alpha[k], stream);
            row
        }
        Family::Categorical => {
            let p = a[1].vector(ctx, loc).ok_or_else(|| Error::eval(format!("cannot initialize {name}")))?;
            let p: Vec<f64> = (0..p.len()).map(|k| p.get(k)).collect();
            let d = Distribution::categorical(p).map_err(fail)?;
            vec![value_f64(d.draw(&mut rng))]
        }
        family => {
            let d = match family {
                Family::Gaussian => Distribution::gaussian(s(0, loc), s(1, loc)),
                Family::InverseGamma => Distribution::inverse_gamma(s(0, loc), s(1, loc)),
                Family::Gamma => Distribution::gamma(s(0, loc), s(1, loc)),
                Family::Beta => Distribution::beta(s(0, loc), s(1, loc)),
                Family::Bernoulli => Distribution::bernoulli(s(0, loc)),
                _ => Distribution::uniform(s(0, loc), s(1, loc)),
            }
            .map_err(fail)?;
            vec![value_f64(d.draw(&mut rng))]
        }
    })
}

fn value_f64(v: crate::dist::Value) -> f64 {
    match v {
        crate::dist::Value::Int(i) => i as f64,
        crate::dist::Value::Real(x) => x,
        crate::dist::Value::Vector(_) => f64::NAN,
    }
}

/// Compiled likelihood nest of a conjugate block.
struct CTerm {
    loops: Vec<(usize, CExpr)>,
    conds: Vec<CCond>,
    var: usize,
    idx: Vec<CExpr>,
    other: Option<CExpr>,
    key: Option<Vec<CExpr>>,
    slots: usize,
}

impl CTerm {
    fn new(model: &CheckedModel, store: &ParamStore, dims: usize, t: &LikelihoodTerm) -> Result<Self> {
        let mut c = Compiler::new(Some(model), &store.hyper, dims);
        let mut loops = Vec::new();
        for (name, bound) in &t.loops {
            let b = c.expr(bound)?;
            loops.push((c.push(name), b));
        }
        let conds = t.conds.iter().map(|x| c.cond(x)).collect::<Result<_>>()?;
        let atom = c.atom(&t.atom)?;
        let other = t.other.as_ref().map(|e| c.expr(e)).transpose()?;
        let key = t.key_exprs().map(|k| k.iter().map(|e| c.expr(e)).collect::<Result<Vec<_>>>()).transpose()?;
        Ok(CTerm { loops, conds, var: atom.var, idx: atom.idx, other, key, slots: c.max_slots.max(1) })
    }

    fn visit(&self, level: usize, ctx: &EvalCtx, loc: &mut [f64], f: &mut dyn FnMut(&mut [f64])) {
        if level == self.loops.len() {
            f(loc);
            return;
        }
        let (slot, bound) = &self.loops[level];
        let n = bound.eval(ctx, loc);
        let n = if n >= 0.0 { n as usize } else { 0 };
        for i in 0..n {
            loc[*slot] = i as f64;
            self.visit(level + 1, ctx, loc, f);
        }
    }

    fn holds(&self, ctx: &EvalCtx, loc: &mut [f64]) -> bool {
        self.conds.iter().all(|c| c.holds(ctx, loc))
    }

    /// Add this leaf's statistics to `stat`.
    fn accumulate(&self, kind: StatKind, ctx: &EvalCtx, loc: &mut [f64], stat: &mut [f64]) {
        let Some(flat) = element(self.var, &self.idx, ctx, loc) else { return };
        let x = ctx.store.vars[self.var].row(flat)[0];
        match kind {
            StatKind::Counts => {
                if x >= 0.0 && (x as usize) < stat.len() {
                    stat[x as usize] += 1.0;
                }
            }
            StatKind::BetaBernoulli => {
                stat[0] += x;
                stat[1] += 1.0;
            }
            StatKind::NormalMean => {
                let v = self.other.as_ref().map_or(1.0, |o| o.eval(ctx, loc));
                stat[0] += 1.0 / v;
                stat[1] += x / v;
            }
            StatKind::InverseGammaVariance | StatKind::GammaPrecision => {
                let m = self.other.as_ref().map_or(0.0, |o| o.eval(ctx, loc));
                stat[0] += 1.0;
                stat[1] += (x - m) * (x - m);
            }
        }
    }
}

impl LikelihoodTerm {
    fn key_exprs(&self) -> Option<&[Expr]> {
        self.scatter_key.as_deref()
    }
}

enum Step {
    /// Random-walk MH on all elements of `vars` at once.
    Joint { vars: Vec<usize>, density: CompiledDensity },
    /// Per-element MH against the element's conditional.
    Element { var: usize, num: CompiledDensity, parallel: bool },
    Discrete { var: usize, num: CompiledDensity, parallel: bool },
    Conjugate { var: usize, kind: StatKind, terms: Vec<CTerm> },
}

/// Executes a plan sweep by sweep over an owned store.
pub struct Sampler<'m> {
    model: &'m CheckedModel,
    pub(crate) store: ParamStore,
    infos: Vec<VarInfo>,
    steps: Vec<Step>,
    joint: CompiledDensity,
    exec: Executor,
    config: SamplerConfig,
}

impl<'m> Sampler<'m> {
    pub fn new(model: &'m CheckedModel, plan: &SamplerPlan, store: ParamStore, config: &SamplerConfig) -> Result<Self> {
        let exec = Executor::new(config.threads);
        let joint = compile(&plan.joint.expr, model, &store.hyper, 0)?;
        let infos = (0..model.vars.len()).map(|id| VarInfo::new(model, &store, id)).collect::<Result<Vec<_>>>()?;
        let mut steps = Vec::new();
        for b in &plan.blocks {
            steps.push(Self::compile_block(model, plan, &store, b)?);
        }
        Ok(Sampler { model, store, infos, steps, joint, exec, config: config.clone() })
    }

    fn compile_block(model: &CheckedModel, plan: &SamplerPlan, store: &ParamStore, b: &Block) -> Result<Step> {
        let ids: Vec<usize> = b.vars.iter().map(|v| store.id(v)).collect::<Result<_>>()?;
        let var = ids[0];
        let dims = model.vars[var].plates.len();
        let numerator = |b: &Block| -> Result<CompiledDensity> {
            let c = b.conditional.as_ref().expect("per-variable blocks carry a conditional");
            compile(&c.numerator, model, &store.hyper, dims)
        };
        Ok(match &b.strategy {
            Strategy::Conjugate(draw) => Self::compile_conjugate(model, store, var, dims, draw)?,
            Strategy::ExactDiscrete => Step::Discrete { var, num: numerator(b)?, parallel: b.parallel },
            Strategy::MhStep if b.conditional.is_some() && (b.parallel || b.single_site) => {
                Step::Element { var, num: numerator(b)?, parallel: b.parallel }
            }
            Strategy::MhStep => {
                let items = match &plan.joint.expr {
                    Density::Product(items) => items.clone(),
                    other => vec![other.clone()],
                };
                let relevant: Vec<Density> =
                    items.into_iter().filter(|f| b.vars.iter().any(|v| f.mentions(v))).collect();
                Step::Joint { vars: ids, density: compile(&Density::Product(relevant), model, &store.hyper, 0)? }
            }
        })
    }

    fn compile_conjugate(model: &CheckedModel, store: &ParamStore, var: usize, dims: usize, d: &ConjugateDraw) -> Result<Step> {
        let terms = d.terms.iter().map(|t| CTerm::new(model, store, dims, t)).collect::<Result<_>>()?;
        Ok(Step::Conjugate { var, kind: d.kind, terms })
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn into_store(self) -> ParamStore {
        self.store
    }

    pub fn executor(&self) -> &Executor {
        &self.exec
    }

    pub fn log_joint(&self) -> Result<f64> {
        crate::ir::eval_log_joint(&self.joint, &self.store, &self.exec)
    }

    /// One full sweep; returns the log joint of the new state.
    pub fn sweep(&mut self, sweep: u32) -> Result<f64> {
        for i in 0..self.steps.len() {
            self.run_step(i, sweep)?;
        }
        self.log_joint()
    }

    fn run_step(&mut self, i: usize, sweep: u32) -> Result<()> {
        let seed = self.config.seed;
        match &self.steps[i] {
            Step::Joint { vars, density } => {
                let vars = vars.clone();
                let density = density.clone();
                self.joint_mh(&vars, &density, seed, sweep)
            }
            Step::Element { var, num, parallel } => {
                let (var, parallel) = (*var, *parallel);
                let num = num.clone();
                self.element_update(var, &num, parallel, seed, sweep, false);
                Ok(())
            }
            Step::Discrete { var, num, parallel } => {
                let (var, parallel) = (*var, *parallel);
                let num = num.clone();
                self.element_update(var, &num, parallel, seed, sweep, true);
                Ok(())
            }
            Step::Conjugate { .. } => self.conjugate(i, seed, sweep),
        }
    }

    fn joint_mh(&mut self, vars: &[usize], density: &CompiledDensity, seed: u64, sweep: u32) -> Result<()> {
        let scale = self.config.mh_scale;
        let current = density.eval_parallel(&EvalCtx::new(&self.store), &self.exec);
        let mut proposals = Vec::with_capacity(vars.len());
        for &var in vars {
            let info = &self.infos[var];
            let width = self.store.vars[var].layout.event_len;
            let st = &self.store;
            let ctx = EvalCtx::new(st);
            let mut out = st.vars[var].values.clone();
            self.exec.rows(&mut out, width, |flat, row| {
                let mut loc = info.locals(st, flat);
                let mut rng = RngStream::new(seed, var as u16, flat as u64, sweep);
                let cur = st.vars[var].row(flat);
                info.propose(&ctx, &mut loc, cur, &mut rng, scale, row);
            });
            proposals.push(out);
        }
        for (&var, p) in vars.iter().zip(proposals.iter_mut()) {
            std::mem::swap(&mut self.store.vars[var].values, p);
        }
        let proposed = density.eval_parallel(&EvalCtx::new(&self.store), &self.exec);
        let mut rng = RngStream::new(seed, ACCEPT_STREAM, vars[0] as u64, sweep);
        let accept = rng.uniform().ln() < proposed - current;
        if !accept {
            for (&var, p) in vars.iter().zip(proposals.iter_mut()) {
                std::mem::swap(&mut self.store.vars[var].values, p);
            }
        }
        if proposed.is_nan() && current.is_nan() {
            return Err(Error::eval("log density is NaN during MH step"));
        }
        Ok(())
    }

    /// New value of one element: an MH move or an exact discrete draw.
    fn element_value(
        info: &VarInfo,
        num: &CompiledDensity,
        ctx: &EvalCtx,
        flat: usize,
        seed: u64,
        sweep: u32,
        scale: f64,
        discrete: bool,
    ) -> Option<Vec<f64>> {
        let var = info.id;
        let mut loc = vec![0.0; num.slots().max(info.slots)];
        set_target(ctx.store, var, flat, &mut loc);
        let mut rng = RngStream::new(seed, var as u16, flat as u64, sweep);
        if discrete {
            let k = info.support(ctx, &mut loc);
            let mut logw = Vec::with_capacity(k);
            for v in 0..k {
                let vals = [v as f64];
                let c = ctx.with(Override::Element { var, flat, values: &vals });
                logw.push(num.root.eval(&c, &mut loc));
            }
            let mut scratch = Vec::with_capacity(k);
            return Some(vec![sample::categorical_log(&mut rng, &logw, &mut scratch) as f64]);
        }
        let cur = ctx.store.vars[var].row(flat);
        let mut prop = vec![0.0; cur.len()];
        info.propose(ctx, &mut loc, cur, &mut rng, scale, &mut prop);
        let before = num.root.eval(ctx, &mut loc);
        let after = num.root.eval(&ctx.with(Override::Element { var, flat, values: &prop }), &mut loc);
        (rng.uniform().ln() < after - before).then_some(prop)
    }

    fn element_update(&mut self, var: usize, num: &CompiledDensity, parallel: bool, seed: u64, sweep: u32, discrete: bool) {
        let scale = self.config.mh_scale;
        let info = &self.infos[var];
        let elements = self.store.vars[var].layout.elements;
        let width = self.store.vars[var].layout.event_len;
        if parallel {
            let st = &self.store;
            let ctx = EvalCtx::new(st);
            let updates = self.exec.map(elements, |flat| Self::element_value(info, num, &ctx, flat, seed, sweep, scale, discrete));
            let values = &mut self.store.vars[var].values;
            for (flat, u) in updates.into_iter().enumerate() {
                if let Some(row) = u {
                    values[flat * width..(flat + 1) * width].copy_from_slice(&row);
                }
            }
        } else {
            for flat in 0..elements {
                let u = Self::element_value(info, num, &EvalCtx::new(&self.store), flat, seed, sweep, scale, discrete);
                if let Some(row) = u {
                    self.store.vars[var].values[flat * width..(flat + 1) * width].copy_from_slice(&row);
                }
            }
        }
    }

    fn statistics(&self, var: usize, kind: StatKind, terms: &[CTerm]) -> Vec<f64> {
        let layout = &self.store.vars[var].layout;
        let width = kind.width(layout.event_len);
        let elements = layout.elements;
        let st = &self.store;
        let ctx = EvalCtx::new(st);
        let dims = self.infos[var].dims;

        // per-element enumeration
        let gathered = self.exec.map(elements, |flat| {
            let mut stat = vec![0.0; width];
            for t in terms.iter().filter(|t| t.key.is_none()) {
                let mut loc = vec![0.0; t.slots];
                set_target(st, var, flat, &mut loc);
                t.visit(0, &ctx, &mut loc, &mut |loc| {
                    if t.holds(&ctx, loc) {
                        t.accumulate(kind, &ctx, loc, &mut stat);
                    }
                });
            }
            stat
        });
        let mut total: Vec<f64> = gathered.into_iter().flatten().collect();

        // single pass with per-chunk tallies, merged in chunk order
        for t in terms.iter().filter(|t| t.key.is_some()) {
            let key = t.key.as_ref().unwrap();
            let outer = if t.loops.is_empty() {
                1
            } else {
                let mut loc = vec![0.0; t.slots];
                let n = t.loops[0].1.eval(&ctx, &mut loc);
                if n >= 0.0 {
                    n as usize
                } else {
                    0
                }
            };
            let chunk = CHUNK.max(outer.div_ceil(64));
            let chunks = outer.div_ceil(chunk);
            let partials = self.exec.map(chunks, |c| {
                let mut tally = vec![0.0; elements * width];
                let mut loc = vec![0.0; t.slots];
                let mut idx = vec![0usize; dims];
                let mut leaf = |loc: &mut [f64]| {
                    for (k, e) in key.iter().enumerate() {
                        let v = e.eval(&ctx, loc);
                        if !(v >= 0.0) {
                            return;
                        }
                        idx[k] = v as usize;
                    }
                    let Some(flat) = st.vars[var].layout.flat(&idx) else { return };
                    for (k, &i) in idx.iter().enumerate() {
                        loc[k] = i as f64;
                    }
                    if t.holds(&ctx, loc) {
                        t.accumulate(kind, &ctx, loc, &mut tally[flat * width..(flat + 1) * width]);
                    }
                };
                if t.loops.is_empty() {
                    leaf(&mut loc);
                } else {
                    let slot = t.loops[0].0;
                    for i in c * chunk..((c + 1) * chunk).min(outer) {
                        loc[slot] = i as f64;
                        t.visit(1, &ctx, &mut loc, &mut leaf);
                    }
                }
                tally
            });
            for p in partials {
                for (a, b) in total.iter_mut().zip(p) {
                    *a += b;
                }
            }
        }
        total
    }

    /// Closed-form conditional of element `flat` of a conjugate block's
    /// variable at the current state.
    pub fn posterior(&self, var: &str, flat: usize) -> Result<Distribution> {
        let id = self.store.id(var)?;
        let step = self.steps.iter().find(|s| matches!(s, Step::Conjugate { var, .. } if *var == id));
        let Some(Step::Conjugate { kind, terms, .. }) = step else {
            return Err(Error::data(format!("{var} is not sampled by a conjugate draw")));
        };
        let stats = self.statistics(id, *kind, terms);
        let info = &self.infos[id];
        let ctx = EvalCtx::new(&self.store);
        let mut loc = info.locals(&self.store, flat);
        let cols = self.store.vars[id].layout.event_len;
        let w = kind.width(cols);
        let st = &stats[flat * w..(flat + 1) * w];
        let a = &info.atom.args;
        Ok(match kind {
            StatKind::Counts => {
                let alpha = a[1].vector(&ctx, &mut loc).ok_or_else(|| Error::eval("bad concentration"))?;
                Distribution::dirichlet((0..cols).map(|c| alpha.get(c) + st[c]).collect())?
            }
            _ => {
                let (p0, p1) = (a[0].scalar(&ctx, &mut loc), a[1].scalar(&ctx, &mut loc));
                match kind {
                    StatKind::BetaBernoulli => Distribution::beta(p0 + st[0], p1 + st[1] - st[0])?,
                    StatKind::NormalMean => {
                        let prec = 1.0 / p1 + st[0];
                        Distribution::gaussian((p0 / p1 + st[1]) / prec, 1.0 / prec)?
                    }
                    StatKind::InverseGammaVariance => Distribution::inverse_gamma(p0 + st[0] / 2.0, p1 + st[1] / 2.0)?,
                    StatKind::GammaPrecision => Distribution::gamma(p0 + st[0] / 2.0, 1.0 / (1.0 / p1 + st[1] / 2.0))?,
                    StatKind::Counts => unreachable!(),
                }
            }
        })
    }

    fn conjugate(&mut self, step: usize, seed: u64, sweep: u32) -> Result<()> {
        let Step::Conjugate { var, kind, terms } = &self.steps[step] else { unreachable!() };
        let (var, kind) = (*var, *kind);
        let stats = self.statistics(var, kind, terms);
        let info = &self.infos[var];
        let layout = &self.store.vars[var].layout;
        let (elements, cols) = (layout.elements, layout.event_len);
        let st = &self.store;
        let ctx = EvalCtx::new(st);
        let values = if kind == StatKind::Counts {
            let conc = self.exec.map(elements, |flat| {
                let mut loc = info.locals(st, flat);
                let alpha = info.atom.args[1].vector(&ctx, &mut loc);
                (0..cols).map(|c| alpha.as_ref().map_or(f64::NAN, |a| a.get(c)) + stats[flat * cols + c]).collect::<Vec<_>>()
            });
            if elements == 0 {
                Vec::new()
            } else {
                let spec = BatchSpec {
                    rows: elements,
                    cols,
                    concentration: Concentration::PerRow(conc.into_iter().flatten().collect()),
                    strategy: BatchStrategy::Auto,
                };
                sample_dirichlet_batch(&spec, StreamKey::new(seed, var as u16, sweep), &self.exec)?
            }
        } else {
            self.exec.map(elements, |flat| {
                let mut loc = info.locals(st, flat);
                let p0 = info.atom.args[0].scalar(&ctx, &mut loc);
                let p1 = info.atom.args[1].scalar(&ctx, &mut loc);
                let (s0, s1) = (stats[flat * 2], stats[flat * 2 + 1]);
                let mut rng = RngStream::new(seed, var as u16, flat as u64, sweep);
                match kind {
                    StatKind::BetaBernoulli => sample::beta(&mut rng, p0 + s0, p1 + s1 - s0),
                    StatKind::NormalMean => {
                        let prec = 1.0 / p1 + s0;
                        let mean = (p0 / p1 + s1) / prec;
                        mean + (1.0 / prec).sqrt() * sample::normal(&mut rng)
                    }
                    StatKind::InverseGammaVariance => sample::inverse_gamma(&mut rng, p0 + s0 / 2.0, p1 + s1 / 2.0),
                    StatKind::GammaPrecision => sample::gamma(&mut rng, p0 + s0 / 2.0, 1.0 / (1.0 / p1 + s1 / 2.0)),
                    StatKind::Counts => unreachable!(),
                }
            })
        };
        self.store.vars[var].values = values;
        Ok(())
    }

    pub fn model(&self) -> &CheckedModel {
        self.model
    }
}
