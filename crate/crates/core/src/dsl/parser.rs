use super::ast::{Decl, DeclKind, DistRef, HyperParam, HyperType, ModelAst, Plate, Pos};
use super::lexer::{lex, Tok, Token};
use super::ParseError;
use crate::dist::Family;
use crate::expr::{BinOp, Expr, Func};

/// Parse model source text into an AST. Either the whole model parses or an
/// error with a source position is returned.
pub fn parse_model(source: &str) -> Result<ModelAst, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, at: 0 };
    let ast = p.model()?;
    p.expect(Tok::Eof)?;
    Ok(ast)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

const RESERVED: &[&str] = &["model", "for", "in", "observe", "sum", "pow", "max", "min", "vector", "int", "real"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek2(&self) -> &Tok {
        &self.tokens[(self.at + 1).min(self.tokens.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.at].tok.clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        Err(ParseError::syntax(self.pos(), format!("expected {wanted}, found {}", self.peek().describe())))
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&tok.describe())
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => self.unexpected(&format!("`{kw}`")),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected("an identifier"),
        }
    }

    fn model(&mut self) -> Result<ModelAst, ParseError> {
        self.keyword("model")?;
        self.expect(Tok::LParen)?;
        let mut hyperparams = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let pos = self.pos();
                let name = self.ident()?;
                if hyperparams.iter().any(|h: &HyperParam| h.name == name) {
                    return Err(ParseError::syntax(pos, format!("duplicate hyperparameter `{name}`")));
                }
                self.expect(Tok::Colon)?;
                let ty = if self.is_keyword("int") {
                    self.bump();
                    if self.eat(&Tok::LBracket) {
                        self.expect(Tok::RBracket)?;
                        HyperType::IntArray
                    } else {
                        HyperType::Int
                    }
                } else if self.is_keyword("real") {
                    self.bump();
                    HyperType::Real
                } else {
                    return self.unexpected("`int`, `int[]` or `real`");
                };
                hyperparams.push(HyperParam { name, ty });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::LBrace)?;
        let mut ast = ModelAst { hyperparams, decls: Vec::new(), observed: Vec::new() };
        self.block(&mut ast, &[])?;
        self.expect(Tok::RBrace)?;
        Ok(ast)
    }

    fn block(&mut self, ast: &mut ModelAst, plates: &[Plate]) -> Result<(), ParseError> {
        loop {
            while self.eat(&Tok::Semi) {}
            match self.peek() {
                Tok::RBrace | Tok::Eof => return Ok(()),
                _ => self.statement(ast, plates)?,
            }
        }
    }

    fn statement(&mut self, ast: &mut ModelAst, plates: &[Plate]) -> Result<(), ParseError> {
        let pos = self.pos();
        if self.is_keyword("for") {
            self.bump();
            let index = self.ident()?;
            self.keyword("in")?;
            self.range_start()?;
            let bound = self.expr()?;
            self.expect(Tok::LBrace)?;
            let mut inner = plates.to_vec();
            inner.push(Plate { index, bound });
            self.block(ast, &inner)?;
            return self.expect(Tok::RBrace);
        }
        if self.is_keyword("observe") {
            if !plates.is_empty() {
                return Err(ParseError::syntax(pos, "`observe` must appear at model level, not inside a loop"));
            }
            self.bump();
            self.expect(Tok::LParen)?;
            loop {
                let name = self.ident()?;
                if !ast.observed.contains(&name) {
                    ast.observed.push(name);
                }
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            return self.expect(Tok::RParen);
        }
        let name = self.ident()?;
        if ast.decl(&name).is_some() {
            return Err(ParseError::syntax(pos, format!("`{name}` is declared twice")));
        }
        self.expect(Tok::Assign)?;
        let kind = self.rhs()?;
        ast.decls.push(Decl { name, kind, plates: plates.to_vec(), pos });
        Ok(())
    }

    /// Loops and sums range over `0..bound`.
    fn range_start(&mut self) -> Result<(), ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Int(0) => self.expect(Tok::DotDot),
            _ => Err(ParseError::syntax(pos, "ranges must have the form `0..bound`")),
        }
    }

    fn rhs(&mut self) -> Result<DeclKind, ParseError> {
        let is_draw = matches!(self.peek(), Tok::Ident(s) if s.starts_with(|c: char| c.is_ascii_uppercase()))
            && *self.peek2() == Tok::LParen;
        if !is_draw {
            return Ok(DeclKind::Deterministic(self.expr()?));
        }
        let pos = self.pos();
        let Tok::Ident(fname) = self.bump() else { unreachable!() };
        let family = Family::from_name(&fname)
            .ok_or_else(|| ParseError::UnknownFamily { pos, name: fname.clone() })?;
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        if args.len() != family.arity() {
            return Err(ParseError::Arity { pos, family, expected: family.arity(), found: args.len() });
        }
        self.expect(Tok::Dot)?;
        self.keyword("sample")?;
        self.expect(Tok::LParen)?;
        let replicate = if *self.peek() == Tok::RParen { None } else { Some(self.expr()?) };
        self.expect(Tok::RParen)?;
        Ok(DeclKind::Random { dist: DistRef { family, args }, replicate })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(match self.unary()? {
                Expr::Int(v) => Expr::Int(-v),
                Expr::Real(v) => Expr::Real(-v),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let base = self.primary()?;
        if *self.peek() != Tok::LBracket {
            return Ok(base);
        }
        let Expr::Ref { name, mut index } = base else {
            return Err(ParseError::syntax(pos, "only named arrays can be indexed"));
        };
        while self.eat(&Tok::LBracket) {
            index.push(self.expr()?);
            self.expect(Tok::RBracket)?;
        }
        Ok(Expr::Ref { name, index })
    }

    fn args2(&mut self) -> Result<(Expr, Expr), ParseError> {
        self.expect(Tok::LParen)?;
        let a = self.expr()?;
        self.expect(Tok::Comma)?;
        let b = self.expr()?;
        self.expect(Tok::RParen)?;
        Ok((a, b))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Real(v) => {
                self.bump();
                Ok(Expr::Real(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(word) => match word.as_str() {
                "pow" | "max" | "min" => {
                    self.bump();
                    let func = match word.as_str() {
                        "pow" => Func::Pow,
                        "max" => Func::Max,
                        _ => Func::Min,
                    };
                    let (a, b) = self.args2()?;
                    Ok(Expr::Call(func, vec![a, b]))
                }
                "vector" => {
                    self.bump();
                    let (len, fill) = self.args2()?;
                    Ok(Expr::Vector { len: Box::new(len), fill: Box::new(fill) })
                }
                "sum" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let index = self.ident()?;
                    self.keyword("in")?;
                    self.range_start()?;
                    let bound = self.expr()?;
                    self.expect(Tok::Comma)?;
                    let body = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Sum { index, bound: Box::new(bound), body: Box::new(body) })
                }
                _ => {
                    let name = self.ident()?;
                    if *self.peek() == Tok::LParen {
                        return Err(ParseError::syntax(self.pos(), format!("`{name}` is not a function")));
                    }
                    Ok(Expr::var(name))
                }
            },
            _ => self.unexpected("an expression"),
        }
    }
}
