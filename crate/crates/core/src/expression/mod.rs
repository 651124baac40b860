//! A small, total expression language for row-wise checks and predicate
//! constraints.
//!
//! Evaluation uses three-valued logic: operators absorb `Null`, `and`/`or`
//! follow Kleene semantics, and type errors or division by zero produce
//! `Null` instead of failing.

mod ast;
mod lexer;
mod parser;
mod program;
mod typeck;

use std::fmt;
use std::sync::Arc;

pub use ast::{is_binding_name, BinaryOp, Builtin, Expr, Pattern, UnaryOp, BINDING_NAMES, REFERENCE_PREFIX};
pub use parser::parse;
pub use program::Program;
pub use typeck::{check_predicate, infer, Ty, TypeEnv, TypeError};

use crate::model::Value;

/// A syntax error with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn new(offset: usize, message: impl Into<String>, expected: &[&str]) -> Self {
        ParseError {
            offset,
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: {}", self.offset, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// Named values visible to an expression besides element attributes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings {
    entries: Vec<(Arc<str>, Value)>,
}

impl Bindings {
    pub fn new() -> Self {
        Bindings::default()
    }

    pub fn set(&mut self, name: &str, value: Value) {
        match self.entries.iter_mut().find(|(n, _)| &**n == name) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((Arc::from(name), value)),
        }
    }

    /// Unbound names read as `Null`.
    pub fn get(&self, name: &str) -> &Value {
        static NULL: Value = Value::Null;
        self.entries
            .iter()
            .find(|(n, _)| &**n == name)
            .map_or(&NULL, |(_, v)| v)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| &**n == name)
    }
}

/// Parses and compiles in one step.
pub fn compile(src: &str) -> Result<Program, ParseError> {
    Ok(Program::compile(&parse(src)?))
}
