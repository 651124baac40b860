use std::sync::Arc;

use super::ast::{is_binding_name, BinaryOp, Builtin, Expr, Pattern, UnaryOp};
use super::lexer::{tokenize, Spanned, Tok};
use super::ParseError;
use crate::model::Value;

/// Nesting limit; keeps recursion bounded on adversarial input.
const MAX_DEPTH: usize = 200;

const ATOM_START: &[&str] = &[
    "number",
    "string",
    "identifier",
    "(",
    "-",
    "not",
    "true",
    "false",
    "null",
];

/// Parses an expression. Precedence from loosest to tightest: `or`, `and`,
/// `not`, comparisons (non-associative), `+ -`, `* /`, unary minus, atoms.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        depth: 0,
    };
    let expr = p.or_expr()?;
    p.expect_eof()?;
    Ok(expr)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError::new(
            self.offset(),
            format!("unexpected {}", self.peek().describe()),
            expected,
        )
    }

    fn expect(&mut self, tok: Tok, label: &'static str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[label]))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected(&["and", "or", "operator", "end of input"]))
        }
    }

    fn nested(&mut self, f: fn(&mut Self) -> Result<Expr, ParseError>) -> Result<Expr, ParseError> {
        if self.depth >= MAX_DEPTH {
            return Err(ParseError::new(self.offset(), "expression nests too deeply", &[]));
        }
        self.depth += 1;
        let r = f(self);
        self.depth -= 1;
        r
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        self.nested(Self::or_chain)
    }

    fn or_chain(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr::Binary(BinaryOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.not_expr()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.not_expr()?;
            lhs = Expr::Binary(BinaryOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Not {
            self.bump();
            let inner = self.nested(Self::not_expr)?;
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(inner)));
        }
        self.cmp_expr()
    }

    fn cmp_op(&self) -> Option<BinaryOp> {
        Some(match self.peek() {
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Eq => BinaryOp::Eq,
            Tok::Ne => BinaryOp::Ne,
            Tok::Ge => BinaryOp::Ge,
            Tok::Gt => BinaryOp::Gt,
            _ => return None,
        })
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add_expr()?;
        let Some(op) = self.cmp_op() else {
            return Ok(lhs);
        };
        self.bump();
        let rhs = self.add_expr()?;
        if self.cmp_op().is_some() {
            return Err(ParseError::new(
                self.offset(),
                "comparison operators do not chain; add parentheses",
                &["and", "or", ")", "end of input"],
            ));
        }
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.nested(Self::unary)?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Spanned { tok, offset } = self.tokens[self.pos].clone();
        match tok {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Literal(Value::Int(i)))
            }
            Tok::Float(f) => {
                self.bump();
                Ok(Expr::Literal(Value::float(f)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Literal(Value::text(s)))
            }
            Tok::True => {
                self.bump();
                Ok(Expr::Literal(Value::Bool(true)))
            }
            Tok::False => {
                self.bump();
                Ok(Expr::Literal(Value::Bool(false)))
            }
            Tok::Null => {
                self.bump();
                Ok(Expr::Literal(Value::Null))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.or_expr()?;
                self.expect(Tok::RParen, ")")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if name == "attrs" && *self.peek() == Tok::LBracket {
                    self.bump();
                    let Tok::Str(field) = self.peek().clone() else {
                        return Err(self.unexpected(&["string"]));
                    };
                    self.bump();
                    self.expect(Tok::RBracket, "]")?;
                    return Ok(Expr::Field(Arc::from(field)));
                }
                if *self.peek() == Tok::LParen {
                    return self.call(&name, offset);
                }
                if name == "matches" || Builtin::lookup(&name).is_some() {
                    return Err(self.unexpected(&["("]));
                }
                if is_binding_name(&name) {
                    Ok(Expr::Var(Arc::from(name)))
                } else {
                    Ok(Expr::Field(Arc::from(name)))
                }
            }
            _ => Err(self.unexpected(ATOM_START)),
        }
    }

    fn call(&mut self, name: &str, name_offset: usize) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen, "(")?;
        if name == "matches" {
            let subject = self.or_expr()?;
            self.expect(Tok::Comma, ",")?;
            let pat_offset = self.offset();
            let Tok::Str(source) = self.peek().clone() else {
                return Err(self.unexpected(&["string"]));
            };
            self.bump();
            self.expect(Tok::RParen, ")")?;
            let pattern = Pattern::new(&source)
                .map_err(|e| ParseError::new(pat_offset, format!("invalid regular expression: {e}"), &[]))?;
            return Ok(Expr::Matches(Box::new(subject), pattern));
        }
        let Some(builtin) = Builtin::lookup(name) else {
            return Err(ParseError::new(name_offset, format!("unknown function `{name}`"), &[]));
        };
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.or_expr()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, ")")?;
        if args.len() != builtin.arity() {
            return Err(ParseError::new(
                name_offset,
                format!("`{name}` takes {} argument(s), got {}", builtin.arity(), args.len()),
                &[],
            ));
        }
        Ok(Expr::Call(builtin, args))
    }
}
