//! The textual modeling language: lexer, parser, pretty-printer and the
//! semantic checks that turn a parsed model into a [`CheckedModel`].

pub mod ast;
mod lexer;
mod parser;
mod pretty;
mod validate;

use thiserror::Error;

pub use ast::{Decl, DeclKind, DistRef, HyperParam, HyperType, ModelAst, Plate, Pos};
pub use parser::parse_model;
pub use pretty::pretty_print;
pub use validate::{validate_model, CheckedModel, IndexUse, RandomVar};

use crate::dist::Family;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("{}:{}: syntax error: {message}", pos.line, pos.col)]
    Syntax { pos: Pos, message: String },
    #[error("{}:{}: unknown distribution family `{name}`", pos.line, pos.col)]
    UnknownFamily { pos: Pos, name: String },
    #[error("{}:{}: arity mismatch: {} takes {expected} arguments, found {found}", pos.line, pos.col, family.name())]
    Arity { pos: Pos, family: Family, expected: usize, found: usize },
}

impl ParseError {
    pub(crate) fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        ParseError::Syntax { pos, message: message.into() }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("{}{message}", pos.map(|p| format!("{}:{}: ", p.line, p.col)).unwrap_or_default())]
pub struct ValidationError {
    pub pos: Option<Pos>,
    pub message: String,
}

impl ValidationError {
    pub(crate) fn new(message: impl Into<String>) -> Self {
        ValidationError { pos: None, message: message.into() }
    }

    pub(crate) fn at(pos: Pos, message: impl Into<String>) -> Self {
        ValidationError { pos: Some(pos), message: message.into() }
    }
}

/// Parse and validate in one step.
pub fn compile_model(source: &str) -> Result<CheckedModel, crate::Error> {
    let ast = parse_model(source)?;
    Ok(validate_model(&ast)?)
}
