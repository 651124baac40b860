use std::cmp::Ordering;
use std::sync::Arc;

use super::ast::{BinaryOp, Builtin, Expr, Pattern, UnaryOp};
use super::Bindings;
use crate::model::{StreamElement, Value};

#[derive(Debug, Clone)]
enum Op {
    Const(Value),
    Field(Arc<str>),
    Var(Arc<str>),
    Unary(UnaryOp),
    Binary(BinaryOp),
    Call(Builtin),
    Matches(Pattern),
}

/// An expression flattened to postfix order and run on a value stack.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    max_stack: usize,
}

impl Program {
    pub fn compile(expr: &Expr) -> Program {
        let mut ops = Vec::new();
        emit(expr, &mut ops);
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Field(_) | Op::Var(_) => depth += 1,
                Op::Unary(_) | Op::Matches(_) => {}
                Op::Binary(_) => depth -= 1,
                Op::Call(b) => depth = depth + 1 - b.arity(),
            }
            max_stack = max_stack.max(depth);
        }
        Program { ops, max_stack }
    }

    /// Evaluates against an optional element and a set of bindings. Never
    /// fails: type errors, missing names and division by zero yield Null.
    pub fn eval(&self, element: Option<&StreamElement>, bindings: &Bindings) -> Value {
        let mut stack: Vec<Value> = Vec::with_capacity(self.max_stack);
        for op in &self.ops {
            match op {
                Op::Const(v) => stack.push(v.clone()),
                Op::Field(name) => stack.push(element.map_or(Value::Null, |e| e.value(name).clone())),
                Op::Var(name) => stack.push(bindings.get(name).clone()),
                Op::Unary(u) => {
                    let a = stack.pop().unwrap_or(Value::Null);
                    stack.push(unary(*u, &a));
                }
                Op::Binary(b) => {
                    let rhs = stack.pop().unwrap_or(Value::Null);
                    let lhs = stack.pop().unwrap_or(Value::Null);
                    stack.push(binary(*b, &lhs, &rhs));
                }
                Op::Call(b) => {
                    let at = stack.len().saturating_sub(b.arity());
                    let result = call(*b, &stack[at..]);
                    stack.truncate(at);
                    stack.push(result);
                }
                Op::Matches(p) => {
                    let a = stack.pop().unwrap_or(Value::Null);
                    stack.push(match a {
                        Value::Text(s) => Value::Bool(p.is_match(&s)),
                        _ => Value::Null,
                    });
                }
            }
        }
        stack.pop().unwrap_or(Value::Null)
    }

    /// Evaluates and reads the result as a verdict; non-boolean results are Null.
    pub fn verdict(&self, element: Option<&StreamElement>, bindings: &Bindings) -> Option<bool> {
        self.eval(element, bindings).as_bool()
    }
}

fn emit(expr: &Expr, ops: &mut Vec<Op>) {
    match expr {
        Expr::Literal(v) => ops.push(Op::Const(v.clone())),
        Expr::Field(n) => ops.push(Op::Field(n.clone())),
        Expr::Var(n) => ops.push(Op::Var(n.clone())),
        Expr::Unary(u, e) => {
            emit(e, ops);
            ops.push(Op::Unary(*u));
        }
        Expr::Binary(b, l, r) => {
            emit(l, ops);
            emit(r, ops);
            ops.push(Op::Binary(*b));
        }
        Expr::Call(b, args) => {
            for a in args {
                emit(a, ops);
            }
            ops.push(Op::Call(*b));
        }
        Expr::Matches(e, p) => {
            emit(e, ops);
            ops.push(Op::Matches(p.clone()));
        }
    }
}

fn unary(op: UnaryOp, a: &Value) -> Value {
    match (op, a) {
        (UnaryOp::Not, Value::Bool(b)) => Value::Bool(!b),
        (UnaryOp::Neg, Value::Int(i)) => i.checked_neg().map_or(Value::Null, Value::Int),
        (UnaryOp::Neg, Value::Float(x)) => Value::float(-x),
        _ => Value::Null,
    }
}

fn kleene(a: &Value) -> Option<bool> {
    match a {
        Value::Bool(b) => Some(*b),
        _ => None,
    }
}

fn binary(op: BinaryOp, a: &Value, b: &Value) -> Value {
    match op {
        BinaryOp::And => match (kleene(a), kleene(b)) {
            (Some(false), _) | (_, Some(false)) => Value::Bool(false),
            (Some(true), Some(true)) => Value::Bool(true),
            _ => Value::Null,
        },
        BinaryOp::Or => match (kleene(a), kleene(b)) {
            (Some(true), _) | (_, Some(true)) => Value::Bool(true),
            (Some(false), Some(false)) => Value::Bool(false),
            _ => Value::Null,
        },
        BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => arithmetic(op, a, b),
        _ => comparison(op, a, b),
    }
}

fn arithmetic(op: BinaryOp, a: &Value, b: &Value) -> Value {
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        let r = match op {
            BinaryOp::Add => x.checked_add(*y),
            BinaryOp::Sub => x.checked_sub(*y),
            BinaryOp::Mul => x.checked_mul(*y),
            _ => None,
        };
        if op != BinaryOp::Div {
            return r.map_or(Value::Null, Value::Int);
        }
    }
    let (Some(x), Some(y)) = (numeric(a), numeric(b)) else {
        return Value::Null;
    };
    match op {
        BinaryOp::Add => Value::float(x + y),
        BinaryOp::Sub => Value::float(x - y),
        BinaryOp::Mul => Value::float(x * y),
        _ if y == 0.0 => Value::Null,
        _ => Value::float(x / y),
    }
}

fn numeric(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

fn comparison(op: BinaryOp, a: &Value, b: &Value) -> Value {
    let equality = matches!(op, BinaryOp::Eq | BinaryOp::Ne);
    if !equality && (matches!(a, Value::Text(_) | Value::Bool(_)) || matches!(b, Value::Text(_) | Value::Bool(_))) {
        return Value::Null;
    }
    let Some(ord) = a.num_cmp(b) else {
        return Value::Null;
    };
    Value::Bool(match op {
        BinaryOp::Lt => ord == Ordering::Less,
        BinaryOp::Le => ord != Ordering::Greater,
        BinaryOp::Eq => ord == Ordering::Equal,
        BinaryOp::Ne => ord != Ordering::Equal,
        BinaryOp::Ge => ord != Ordering::Less,
        _ => ord == Ordering::Greater,
    })
}

fn call(b: Builtin, args: &[Value]) -> Value {
    if b.is_strict() && args.iter().any(Value::is_null) {
        return Value::Null;
    }
    match b {
        Builtin::IsNull => Value::Bool(args[0].is_null()),
        Builtin::NonEmpty => Value::Bool(match &args[0] {
            Value::Null => false,
            Value::Text(s) => !s.is_empty(),
            _ => true,
        }),
        Builtin::Length => match &args[0] {
            Value::Text(s) => Value::Int(s.chars().count() as i64),
            _ => Value::Null,
        },
        Builtin::Abs => match &args[0] {
            Value::Int(i) => i.checked_abs().map_or(Value::Null, Value::Int),
            Value::Float(x) => Value::Float(x.abs()),
            _ => Value::Null,
        },
        Builtin::Min | Builtin::Max => {
            let (x, y) = (&args[0], &args[1]);
            if matches!(x, Value::Bool(_)) || matches!(y, Value::Bool(_)) {
                return Value::Null;
            }
            match x.num_cmp(y) {
                Some(Ordering::Greater) if b == Builtin::Min => y.clone(),
                Some(Ordering::Less) if b == Builtin::Max => y.clone(),
                Some(_) => x.clone(),
                None => Value::Null,
            }
        }
        Builtin::Positive => numeric(&args[0]).map_or(Value::Null, |x| Value::Bool(x > 0.0)),
        Builtin::CoordsValid => match (numeric(&args[0]), numeric(&args[1])) {
            (Some(lat), Some(lon)) => Value::Bool((-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)),
            _ => Value::Null,
        },
        Builtin::HourOf => match &args[0] {
            Value::Timestamp(t) => t.hour_of_day().map_or(Value::Null, |h| Value::Int(i64::from(h))),
            _ => Value::Null,
        },
    }
}
