use std::fmt;
use std::sync::Arc;

use regex::Regex;

use crate::model::Value;

/// Names that resolve to bindings rather than element attributes.
pub const BINDING_NAMES: [&str; 7] = [
    "value",
    "mu_H",
    "sigma_H",
    "prev_value",
    "count_H",
    "window_start",
    "window_end",
];

/// Reference-table columns are bound as `ref_<column>`.
pub const REFERENCE_PREFIX: &str = "ref_";

pub fn is_binding_name(name: &str) -> bool {
    BINDING_NAMES.contains(&name) || name.starts_with(REFERENCE_PREFIX)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    Field(Arc<str>),
    Var(Arc<str>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
    /// `matches(x, 'pattern')`; the pattern is compiled at parse time.
    Matches(Box<Expr>, Pattern),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "!=",
            BinaryOp::Ge => ">=",
            BinaryOp::Gt => ">",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Ge | BinaryOp::Gt
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    IsNull,
    Length,
    Abs,
    Min,
    Max,
    NonEmpty,
    Positive,
    CoordsValid,
    HourOf,
}

impl Builtin {
    pub const ALL: [Builtin; 9] = [
        Builtin::IsNull,
        Builtin::Length,
        Builtin::Abs,
        Builtin::Min,
        Builtin::Max,
        Builtin::NonEmpty,
        Builtin::Positive,
        Builtin::CoordsValid,
        Builtin::HourOf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::IsNull => "is_null",
            Builtin::Length => "length",
            Builtin::Abs => "abs",
            Builtin::Min => "min",
            Builtin::Max => "max",
            Builtin::NonEmpty => "non_empty",
            Builtin::Positive => "positive",
            Builtin::CoordsValid => "coords_valid",
            Builtin::HourOf => "hour_of",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Min | Builtin::Max | Builtin::CoordsValid => 2,
            _ => 1,
        }
    }

    pub fn lookup(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }

    /// `is_null` and `non_empty` inspect Null instead of absorbing it.
    pub fn is_strict(self) -> bool {
        !matches!(self, Builtin::IsNull | Builtin::NonEmpty)
    }
}

pub fn is_function_name(name: &str) -> bool {
    name == "matches" || Builtin::lookup(name).is_some()
}

/// A full-match regular expression with its source text.
#[derive(Debug, Clone)]
pub struct Pattern {
    pub source: String,
    pub regex: Arc<Regex>,
}

impl Pattern {
    pub fn new(source: &str) -> Result<Pattern, regex::Error> {
        let regex = Regex::new(&format!("^(?:{source})$"))?;
        Ok(Pattern {
            source: source.to_string(),
            regex: Arc::new(regex),
        })
    }

    pub fn is_match(&self, s: &str) -> bool {
        self.regex.is_match(s)
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

fn is_plain_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    head_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(
            name.to_ascii_lowercase().as_str(),
            "and" | "or" | "not" | "true" | "false" | "null" | "attrs"
        )
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("'")?;
    f.write_str(&s.replace('\'', "''"))?;
    f.write_str("'")
}

/// Fully parenthesized rendering; re-parsing it yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => match v {
                Value::Null => f.write_str("null"),
                Value::Bool(b) => write!(f, "{b}"),
                Value::Int(i) if *i < 0 => write!(f, "(-{})", i.unsigned_abs()),
                Value::Int(i) => write!(f, "{i}"),
                Value::Float(x) if *x < 0.0 || (*x == 0.0 && x.is_sign_negative()) => write!(f, "(-{:?})", -x),
                Value::Float(x) => write!(f, "{x:?}"),
                Value::Text(s) => write_quoted(f, s),
                Value::Timestamp(t) => write_quoted(f, &t.to_iso()),
            },
            Expr::Field(name) => {
                if is_plain_identifier(name) && !is_binding_name(name) && !is_function_name(name) {
                    f.write_str(name)
                } else {
                    f.write_str("attrs[")?;
                    write_quoted(f, name)?;
                    f.write_str("]")
                }
            }
            Expr::Var(name) => f.write_str(name),
            Expr::Unary(UnaryOp::Neg, e) => write!(f, "(-{e})"),
            Expr::Unary(UnaryOp::Not, e) => write!(f, "(not {e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(b, args) => {
                write!(f, "{}(", b.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Matches(e, p) => {
                write!(f, "matches({e}, ")?;
                write_quoted(f, &p.source)?;
                f.write_str(")")
            }
        }
    }
}

impl Expr {
    /// Field names referenced anywhere in the tree.
    pub fn fields(&self) -> Vec<Arc<str>> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Field(n) = e {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        });
        out
    }

    /// Binding names referenced anywhere in the tree.
    pub fn vars(&self) -> Vec<Arc<str>> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Var(n) = e {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        });
        out
    }

    fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Literal(_) | Expr::Field(_) | Expr::Var(_) => {}
            Expr::Unary(_, e) | Expr::Matches(e, _) => e.walk(f),
            Expr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
        }
    }
}
