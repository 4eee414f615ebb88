//! Scalar/vector expressions shared by the model language and the density IR.

use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Pow,
    Max,
    Min,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Pow => "pow",
            Func::Max => "max",
            Func::Min => "min",
        }
    }
}

/// An expression over hyperparameters, plate indices and model variables.
///
/// In parsed models `Ref` names are unresolved. After validation every `Ref`
/// names a hyperparameter, a random variable (fully indexed over its plates,
/// plus an optional component index for vector-valued variables) or a bound
/// plate/summation index. `Target(k)` only appears in derived conditionals
/// and stands for the k-th plate index of the variable being resampled.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Int(i64),
    Real(f64),
    Ref { name: String, index: Vec<Expr> },
    Target(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Sum { index: String, bound: Box<Expr>, body: Box<Expr> },
    Vector { len: Box<Expr>, fill: Box<Expr> },
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Ref { name: name.into(), index: Vec::new() }
    }

    pub fn indexed(name: impl Into<String>, index: Vec<Expr>) -> Expr {
        Expr::Ref { name: name.into(), index }
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    /// Visit every node, outermost first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Int(_) | Expr::Real(_) | Expr::Target(_) => {}
            Expr::Ref { index, .. } => index.iter().for_each(|e| e.walk(f)),
            Expr::Neg(e) => e.walk(f),
            Expr::Bin(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|e| e.walk(f)),
            Expr::Sum { bound, body, .. } => {
                bound.walk(f);
                body.walk(f);
            }
            Expr::Vector { len, fill } => {
                len.walk(f);
                fill.walk(f);
            }
        }
    }

    /// Rebuild the expression bottom-up, letting `f` replace any node.
    /// `f` sees children that were already rewritten.
    pub fn map(&self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let rebuilt = match self {
            Expr::Int(_) | Expr::Real(_) | Expr::Target(_) => self.clone(),
            Expr::Ref { name, index } => Expr::Ref {
                name: name.clone(),
                index: index.iter().map(|e| e.map(f)).collect(),
            },
            Expr::Neg(e) => Expr::Neg(Box::new(e.map(f))),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(a.map(f)), Box::new(b.map(f))),
            Expr::Call(func, args) => Expr::Call(*func, args.iter().map(|e| e.map(f)).collect()),
            Expr::Sum { index, bound, body } => Expr::Sum {
                index: index.clone(),
                bound: Box::new(bound.map(f)),
                body: Box::new(body.map(f)),
            },
            Expr::Vector { len, fill } => Expr::Vector {
                len: Box::new(len.map(f)),
                fill: Box::new(fill.map(f)),
            },
        };
        f(rebuilt)
    }

    /// Replace unindexed references to `name` by `with`.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        self.map(&mut |e| match e {
            Expr::Ref { name: n, index } if n == name && index.is_empty() => with.clone(),
            other => other,
        })
    }

    /// Names of every `Ref` node (including plate indices and hyperparameters).
    pub fn names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Ref { name, .. } = e {
                out.insert(name.clone());
            }
        });
        out
    }

    pub fn mentions(&self, name: &str) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if let Expr::Ref { name: n, .. } = e {
                found |= n == name;
            }
        });
        found
    }

    pub fn has_target(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Target(_)));
        found
    }

    /// Number of nodes in the expression tree.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Int(v) if *v < 0 => 3,
            Expr::Real(v) if *v < 0.0 => 3,
            _ => 4,
        }
    }
}

fn fmt_real(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    // Debug formatting keeps a decimal point or exponent and round-trips.
    write!(f, "{v:?}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Real(v) => fmt_real(*v, f),
            Expr::Ref { name, index } => {
                write!(f, "{name}")?;
                for e in index {
                    write!(f, "[{e}]")?;
                }
                Ok(())
            }
            Expr::Target(k) => write!(f, "@{k}"),
            Expr::Neg(e) => {
                if e.precedence() < 3 || matches!(**e, Expr::Int(_) | Expr::Real(_)) {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                if a.precedence() < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // left-associative: equal precedence on the right needs parens
                if b.precedence() <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Expr::Sum { index, bound, body } => write!(f, "sum({index} in 0..{bound}, {body})"),
            Expr::Vector { len, fill } => write!(f, "vector({len}, {fill})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_parenthesizes_by_precedence() {
        let e = Expr::bin(
            BinOp::Mul,
            Expr::bin(BinOp::Add, Expr::var("a"), Expr::Int(1)),
            Expr::bin(BinOp::Sub, Expr::var("b"), Expr::Real(0.5)),
        );
        assert_eq!(e.to_string(), "(a + 1) * (b - 0.5)");
        let e = Expr::bin(BinOp::Sub, Expr::var("a"), Expr::bin(BinOp::Sub, Expr::var("b"), Expr::var("c")));
        assert_eq!(e.to_string(), "a - (b - c)");
    }

    #[test]
    fn substitute_skips_indexed_refs() {
        let e = Expr::bin(BinOp::Add, Expr::var("i"), Expr::indexed("i", vec![Expr::Int(0)]));
        let s = e.substitute("i", &Expr::Target(0));
        assert_eq!(s.to_string(), "@0 + i[0]");
    }
}
