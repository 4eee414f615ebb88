use crate::dist::Family;
use crate::expr::Expr;

/// Source position (1-based line and column).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HyperType {
    Int,
    Real,
    IntArray,
}

impl HyperType {
    pub fn keyword(self) -> &'static str {
        match self {
            HyperType::Int => "int",
            HyperType::Real => "real",
            HyperType::IntArray => "int[]",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperParam {
    pub name: String,
    pub ty: HyperType,
}

/// One level of replication: `index` ranges over `0..bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plate {
    pub index: String,
    pub bound: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistRef {
    pub family: Family,
    pub args: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DeclKind {
    Deterministic(Expr),
    /// `Family(args).sample(replicate)`.
    Random { dist: DistRef, replicate: Option<Expr> },
}

#[derive(Clone, Debug)]
pub struct Decl {
    pub name: String,
    pub kind: DeclKind,
    /// Enclosing `for` loops, outermost first.
    pub plates: Vec<Plate>,
    pub pos: Pos,
}

impl PartialEq for Decl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.kind == other.kind && self.plates == other.plates
    }
}

impl Decl {
    pub fn is_random(&self) -> bool {
        matches!(self.kind, DeclKind::Random { .. })
    }

    pub fn dist(&self) -> Option<&DistRef> {
        match &self.kind {
            DeclKind::Random { dist, .. } => Some(dist),
            DeclKind::Deterministic(_) => None,
        }
    }
}

/// A parsed model. Equality ignores source positions.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelAst {
    pub hyperparams: Vec<HyperParam>,
    pub decls: Vec<Decl>,
    /// Names listed in `observe(...)`, in first-seen order without duplicates.
    pub observed: Vec<String>,
}

impl ModelAst {
    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn hyper(&self, name: &str) -> Option<&HyperParam> {
        self.hyperparams.iter().find(|h| h.name == name)
    }

    pub fn random_decls(&self) -> impl Iterator<Item = &Decl> {
        self.decls.iter().filter(|d| d.is_random())
    }
}
