use std::collections::{BTreeSet, HashMap};

use super::ast::{Decl, DeclKind, HyperType, ModelAst, Plate, Pos};
use super::ValidationError;
use crate::dist::{Family, ValueType};
use crate::expr::{BinOp, Expr, Func};

/// A random variable after name resolution.
///
/// `plates` lists every replication level: the enclosing loops followed by
/// the `.sample(n)` replication (whose index is named `_<var>`). `args` are
/// fully resolved: deterministic definitions are inlined and every variable
/// reference carries one index per plate.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomVar {
    pub name: String,
    pub family: Family,
    pub args: Vec<Expr>,
    pub plates: Vec<Plate>,
    /// Length of the vector drawn per element (Dirichlet only).
    pub event_len: Option<Expr>,
    pub value_type: ValueType,
    pub observed: bool,
    pub pos: Pos,
}

impl RandomVar {
    /// The element reference `name[i0][i1]...` using the plate index names.
    pub fn element_ref(&self) -> Expr {
        Expr::indexed(self.name.clone(), self.plates.iter().map(|p| Expr::var(p.index.clone())).collect())
    }

    pub fn is_discrete(&self) -> bool {
        self.value_type == ValueType::Int
    }
}

/// A variable drawn from a discrete distribution that is used to subscript
/// another variable, e.g. `z` selecting the row of `phi`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct IndexUse {
    pub index_var: String,
    pub indexed: String,
}

#[derive(Clone, Debug)]
pub struct CheckedModel {
    pub ast: ModelAst,
    /// Random variables in declaration order; a variable's id is its position.
    pub vars: Vec<RandomVar>,
    pub categorical_indexing: Vec<IndexUse>,
}

impl CheckedModel {
    pub fn var(&self, name: &str) -> Option<&RandomVar> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn var_id(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn is_random(&self, name: &str) -> bool {
        self.var(name).is_some()
    }

    /// Names of `index_var`s recorded as subscripting `indexed`.
    pub fn indexers_of(&self, indexed: &str) -> Vec<&str> {
        self.categorical_indexing.iter().filter(|u| u.indexed == indexed).map(|u| u.index_var.as_str()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Ty {
    Int,
    Real,
    Vector,
}

struct DetDef {
    plates: Vec<Plate>,
    expr: Expr,
    ty: Ty,
}

struct VarShape {
    plates: Vec<Plate>,
    loop_depth: usize,
    has_event: bool,
    family: Family,
}

struct Checker<'a> {
    ast: &'a ModelAst,
    dets: HashMap<String, DetDef>,
    shapes: HashMap<String, VarShape>,
    uses: BTreeSet<IndexUse>,
    fresh: usize,
}

#[derive(Clone, Default)]
struct Scope {
    loops: Vec<Plate>,
    sums: Vec<String>,
}

impl Scope {
    fn binds(&self, name: &str) -> bool {
        self.loops.iter().any(|p| p.index == name) || self.sums.iter().any(|s| s == name)
    }
}

/// Check scoping and typing, resolve references and record which discrete
/// variables are used as array subscripts.
pub fn validate_model(ast: &ModelAst) -> Result<CheckedModel, ValidationError> {
    let mut ck = Checker { ast, dets: HashMap::new(), shapes: HashMap::new(), uses: BTreeSet::new(), fresh: 0 };
    let mut vars = Vec::new();

    for (pos, decl) in ast.decls.iter().enumerate() {
        if ast.hyper(&decl.name).is_some() {
            return Err(ValidationError::at(decl.pos, format!("`{}` shadows a hyperparameter", decl.name)));
        }
        let mut scope = Scope::default();
        for plate in &decl.plates {
            if ck.is_name_taken(&plate.index, &scope) {
                return Err(ValidationError::at(decl.pos, format!("loop index `{}` shadows another name", plate.index)));
            }
            let bound = ck.check_bound(&plate.bound, &scope, decl.pos)?;
            scope.loops.push(Plate { index: plate.index.clone(), bound });
        }
        match &decl.kind {
            DeclKind::Deterministic(e) => {
                let (expr, ty) = ck.resolve(e, &scope, decl.pos, pos)?;
                ck.dets.insert(decl.name.clone(), DetDef { plates: scope.loops.clone(), expr, ty });
            }
            DeclKind::Random { dist, replicate } => {
                let mut plates = scope.loops.clone();
                if let Some(rep) = replicate {
                    let bound = ck.check_bound(rep, &scope, decl.pos)?;
                    plates.push(Plate { index: format!("_{}", decl.name), bound });
                }
                let family = dist.family;
                let has_event = family == Family::Dirichlet;
                ck.shapes.insert(
                    decl.name.clone(),
                    VarShape { plates: plates.clone(), loop_depth: scope.loops.len(), has_event, family },
                );
                let mut args = Vec::with_capacity(dist.args.len());
                for (k, a) in dist.args.iter().enumerate() {
                    let (expr, ty) = ck.resolve(a, &scope, decl.pos, pos)?;
                    let want_vector = family.vector_arg() == Some(k);
                    let want_int = family.vector_arg().is_some() && k == 0;
                    match (want_vector, ty) {
                        (true, Ty::Vector) => {}
                        (true, _) => {
                            return Err(ValidationError::at(
                                decl.pos,
                                format!("argument {} of {} must be a vector", k + 1, family.name()),
                            ))
                        }
                        (false, Ty::Vector) => {
                            return Err(ValidationError::at(
                                decl.pos,
                                format!("argument {} of {} must be a scalar", k + 1, family.name()),
                            ))
                        }
                        (false, Ty::Real) if want_int => {
                            return Err(ValidationError::at(
                                decl.pos,
                                format!("dimension argument of {} must be an integer", family.name()),
                            ))
                        }
                        _ => {}
                    }
                    args.push(expr);
                }
                let event_len = has_event.then(|| args[0].clone());
                vars.push(RandomVar {
                    name: decl.name.clone(),
                    family,
                    args,
                    plates,
                    event_len,
                    value_type: family.value_type(),
                    observed: ast.observed.contains(&decl.name),
                    pos: decl.pos,
                });
            }
        }
    }

    for name in &ast.observed {
        match ast.decl(name) {
            None => return Err(ValidationError::new(format!("undefined name {name} in observe"))),
            Some(d) if !d.is_random() => {
                return Err(ValidationError::new(format!("observed name {name} is not a random variable")))
            }
            _ => {}
        }
    }

    Ok(CheckedModel { ast: ast.clone(), vars, categorical_indexing: ck.uses.into_iter().collect() })
}

impl<'a> Checker<'a> {
    fn is_name_taken(&self, name: &str, scope: &Scope) -> bool {
        scope.binds(name) || self.ast.hyper(name).is_some() || self.ast.decl(name).is_some()
    }

    fn check_bound(&mut self, bound: &Expr, scope: &Scope, pos: Pos) -> Result<Expr, ValidationError> {
        for name in bound.names() {
            let ok = scope.loops.iter().any(|p| p.index == name) || self.ast.hyper(&name).is_some();
            if !ok {
                return Err(ValidationError::at(
                    pos,
                    format!("plate bound `{bound}` may only use hyperparameters and enclosing indices (found `{name}`)"),
                ));
            }
        }
        let (e, ty) = self.resolve(bound, scope, pos, usize::MAX)?;
        if ty != Ty::Int {
            return Err(ValidationError::at(pos, format!("plate bound `{bound}` is not an integer")));
        }
        Ok(e)
    }

    /// `decl_pos` is the position of the declaration being checked in
    /// `ast.decls`; references may only reach earlier declarations (or the
    /// declaration itself for random variables, e.g. a Markov chain).
    fn resolve(&mut self, e: &Expr, scope: &Scope, pos: Pos, decl_pos: usize) -> Result<(Expr, Ty), ValidationError> {
        match e {
            Expr::Int(_) => Ok((e.clone(), Ty::Int)),
            Expr::Real(_) => Ok((e.clone(), Ty::Real)),
            Expr::Target(_) => Err(ValidationError::at(pos, "unexpected target index")),
            Expr::Neg(inner) => {
                let (x, ty) = self.scalar(inner, scope, pos, decl_pos)?;
                Ok((Expr::Neg(Box::new(x)), ty))
            }
            Expr::Bin(op, a, b) => {
                let (x, ta) = self.scalar(a, scope, pos, decl_pos)?;
                let (y, tb) = self.scalar(b, scope, pos, decl_pos)?;
                let ty = if *op == BinOp::Div || ta == Ty::Real || tb == Ty::Real { Ty::Real } else { Ty::Int };
                Ok((Expr::bin(*op, x, y), ty))
            }
            Expr::Call(func, args) => {
                let mut out = Vec::new();
                let mut all_int = true;
                for a in args {
                    let (x, t) = self.scalar(a, scope, pos, decl_pos)?;
                    all_int &= t == Ty::Int;
                    out.push(x);
                }
                let ty = if *func != Func::Pow && all_int { Ty::Int } else { Ty::Real };
                Ok((Expr::Call(*func, out), ty))
            }
            Expr::Sum { index, bound, body } => {
                if self.is_name_taken(index, scope) {
                    return Err(ValidationError::at(pos, format!("summation index `{index}` shadows another name")));
                }
                let (b, tb) = self.scalar(bound, scope, pos, decl_pos)?;
                if tb != Ty::Int {
                    return Err(ValidationError::at(pos, "summation bound is not an integer"));
                }
                let mut inner = scope.clone();
                inner.sums.push(index.clone());
                let (x, ty) = self.scalar(body, &inner, pos, decl_pos)?;
                Ok((Expr::Sum { index: index.clone(), bound: Box::new(b), body: Box::new(x) }, ty))
            }
            Expr::Vector { len, fill } => {
                let (l, tl) = self.scalar(len, scope, pos, decl_pos)?;
                if tl != Ty::Int {
                    return Err(ValidationError::at(pos, "vector length is not an integer"));
                }
                let (f, _) = self.scalar(fill, scope, pos, decl_pos)?;
                Ok((Expr::Vector { len: Box::new(l), fill: Box::new(f) }, Ty::Vector))
            }
            Expr::Ref { name, index } => self.resolve_ref(name, index, scope, pos, decl_pos),
        }
    }

    fn scalar(&mut self, e: &Expr, scope: &Scope, pos: Pos, decl_pos: usize) -> Result<(Expr, Ty), ValidationError> {
        let (x, ty) = self.resolve(e, scope, pos, decl_pos)?;
        if ty == Ty::Vector {
            return Err(ValidationError::at(pos, format!("vector value `{e}` used where a scalar is expected")));
        }
        Ok((x, ty))
    }

    fn index_exprs(&mut self, index: &[Expr], scope: &Scope, pos: Pos, decl_pos: usize) -> Result<Vec<Expr>, ValidationError> {
        index
            .iter()
            .map(|i| {
                let (x, ty) = self.resolve(i, scope, pos, decl_pos)?;
                if ty != Ty::Int {
                    return Err(ValidationError::at(pos, format!("index expression `{i}` is not integer-typed")));
                }
                Ok(x)
            })
            .collect()
    }

    /// Leading plate indices a bare reference inherits from enclosing loops.
    fn autofill(plates: &[Plate], loop_depth: usize, explicit: usize, has_event: bool, scope: &Scope) -> Option<usize> {
        let shared = plates[..loop_depth]
            .iter()
            .zip(&scope.loops)
            .take_while(|(p, s)| p.index == s.index && p.bound == s.bound)
            .count();
        let n = plates.len();
        let fits = |k: usize| k == n || (has_event && k == n + 1);
        if fits(explicit + shared) {
            Some(shared)
        } else if fits(explicit) {
            Some(0)
        } else {
            None
        }
    }

    fn resolve_ref(
        &mut self,
        name: &str,
        index: &[Expr],
        scope: &Scope,
        pos: Pos,
        decl_pos: usize,
    ) -> Result<(Expr, Ty), ValidationError> {
        if scope.binds(name) {
            if !index.is_empty() {
                return Err(ValidationError::at(pos, format!("index `{name}` cannot be subscripted")));
            }
            return Ok((Expr::var(name), Ty::Int));
        }
        if let Some(h) = self.ast.hyper(name) {
            return match (h.ty, index.len()) {
                (HyperType::Int, 0) => Ok((Expr::var(name), Ty::Int)),
                (HyperType::Real, 0) => Ok((Expr::var(name), Ty::Real)),
                (HyperType::IntArray, 1) => {
                    let idx = self.index_exprs(index, scope, pos, decl_pos)?;
                    Ok((Expr::indexed(name, idx), Ty::Int))
                }
                _ => Err(ValidationError::at(pos, format!("hyperparameter `{name}` used with the wrong number of indices"))),
            };
        }
        let declared_at = self.ast.decls.iter().position(|d| d.name == name);
        let Some(declared_at) = declared_at.filter(|&d| d <= decl_pos) else {
            return Err(ValidationError::at(pos, format!("undefined name {name}")));
        };
        let decl: &Decl = &self.ast.decls[declared_at];
        let explicit = self.index_exprs(index, scope, pos, decl_pos)?;

        if let DeclKind::Deterministic(_) = decl.kind {
            if declared_at == decl_pos {
                return Err(ValidationError::at(pos, format!("`{name}` refers to itself")));
            }
            let def = &self.dets[name];
            let has_event = def.ty == Ty::Vector;
            let fill = Self::autofill(&def.plates, def.plates.len(), explicit.len(), has_event, scope)
                .ok_or_else(|| ValidationError::at(pos, format!("`{name}` needs {} indices", def.plates.len())))?;
            let mut full: Vec<Expr> = scope.loops[..fill].iter().map(|p| Expr::var(p.index.clone())).collect();
            full.extend(explicit);
            let mut body = def.expr.clone();
            let ty = def.ty;
            let plates: Vec<String> = def.plates.iter().map(|p| p.index.clone()).collect();
            let component = if full.len() > plates.len() { full.pop() } else { None };
            for (p, with) in plates.iter().zip(&full) {
                body = self.subst_avoiding(&body, p, with);
            }
            return match component {
                None => Ok((body, ty)),
                Some(c) => match body {
                    Expr::Vector { fill, .. } => {
                        let fty = if matches!(*fill, Expr::Int(_)) { Ty::Int } else { Ty::Real };
                        Ok((*fill, fty))
                    }
                    Expr::Ref { name: n, mut index } => {
                        index.push(c);
                        Ok((Expr::Ref { name: n, index }, Ty::Real))
                    }
                    _ => Err(ValidationError::at(pos, format!("cannot take a component of `{name}`"))),
                },
            };
        }

        let shape = &self.shapes[name];
        let fill = Self::autofill(&shape.plates, shape.loop_depth, explicit.len(), shape.has_event, scope)
            .ok_or_else(|| {
                ValidationError::at(
                    pos,
                    format!("`{name}` needs {} indices, found {}", shape.plates.len(), explicit.len()),
                )
            })?;
        let mut full: Vec<Expr> = scope.loops[..fill].iter().map(|p| Expr::var(p.index.clone())).collect();
        full.extend(explicit);
        let ty = if shape.has_event && full.len() == shape.plates.len() {
            Ty::Vector
        } else if shape.family.value_type() == ValueType::Int {
            Ty::Int
        } else {
            Ty::Real
        };
        for i in &full {
            for n in i.names() {
                if let Some(s) = self.shapes.get(&n) {
                    if s.family.is_discrete() && self.ast.hyper(&n).is_none() && !scope.binds(&n) {
                        self.uses.insert(IndexUse { index_var: n.clone(), indexed: name.to_string() });
                    }
                }
            }
        }
        Ok((Expr::indexed(name, full), ty))
    }

    /// Substitute `with` for index `name`, renaming summation binders that
    /// would capture names occurring in `with`.
    fn subst_avoiding(&mut self, body: &Expr, name: &str, with: &Expr) -> Expr {
        let free = with.names();
        let renamed = body.map(&mut |e| match e {
            Expr::Sum { index, bound, body } if free.contains(&index) => {
                self.fresh += 1;
                let fresh = format!("{index}{}", self.fresh);
                let body = body.substitute(&index, &Expr::var(fresh.clone()));
                Expr::Sum { index: fresh, bound, body: Box::new(body) }
            }
            other => other,
        });
        renamed.substitute(name, with)
    }
}
