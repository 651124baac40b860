use std::collections::BTreeMap;

use super::ast::{BinaryOp, Builtin, Expr, UnaryOp};
use crate::model::ValueType;

/// Static type of a subexpression; `None` is the type of the `null` literal
/// and of bindings whose type is not known ahead of time.
pub type Ty = Option<ValueType>;

/// Names visible to an expression during validation.
#[derive(Debug, Clone, Default)]
pub struct TypeEnv {
    /// Declared columns. `None` means element attributes are not in scope.
    pub columns: Option<BTreeMap<String, ValueType>>,
    pub bindings: BTreeMap<String, Ty>,
}

impl TypeEnv {
    /// Scope of a row-wise expression evaluated against each element.
    pub fn for_rows(columns: BTreeMap<String, ValueType>) -> Self {
        TypeEnv {
            columns: Some(columns),
            bindings: BTreeMap::new(),
        }
    }

    /// Scope with bindings only (predicate constraints, lookup keys).
    pub fn for_bindings() -> Self {
        TypeEnv::default()
    }

    pub fn bind(mut self, name: &str, ty: Ty) -> Self {
        self.bindings.insert(name.to_string(), ty);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TypeError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError(msg.into()))
}

fn show(ty: Ty) -> String {
    ty.map_or("null".to_string(), |t| t.to_string())
}

fn numeric(ty: Ty) -> bool {
    ty.is_none_or(ValueType::is_numeric)
}

fn boolean(ty: Ty) -> bool {
    matches!(ty, None | Some(ValueType::Bool))
}

fn comparable(a: Ty, b: Ty) -> bool {
    match (a, b) {
        (None, _) | (_, None) => true,
        (Some(x), Some(y)) => x == y || (x.is_numeric() && y.is_numeric()),
    }
}

fn widen(a: Ty, b: Ty) -> Ty {
    match (a, b) {
        (Some(ValueType::Int), Some(ValueType::Int)) => Some(ValueType::Int),
        (Some(x), Some(y)) if x.is_numeric() && y.is_numeric() => Some(ValueType::Float),
        (Some(x), None) | (None, Some(x)) => Some(x),
        _ => None,
    }
}

/// Infers the type of `expr`, rejecting unknown names and ill-typed operators.
pub fn infer(expr: &Expr, env: &TypeEnv) -> Result<Ty, TypeError> {
    match expr {
        Expr::Literal(v) => Ok(v.value_type()),
        Expr::Field(name) => match &env.columns {
            None => err(format!(
                "column `{name}` is not available here; only bindings may be referenced"
            )),
            Some(cols) => match cols.get(&**name) {
                Some(t) => Ok(Some(*t)),
                None => err(format!("unknown column `{name}`")),
            },
        },
        Expr::Var(name) => match env.bindings.get(&**name) {
            Some(t) => Ok(*t),
            None => err(format!("`{name}` is not bound here")),
        },
        Expr::Unary(UnaryOp::Neg, e) => {
            let t = infer(e, env)?;
            if !numeric(t) {
                return err(format!("cannot negate a {} value", show(t)));
            }
            Ok(t)
        }
        Expr::Unary(UnaryOp::Not, e) => {
            let t = infer(e, env)?;
            if !boolean(t) {
                return err(format!("`not` needs a bool operand, found {}", show(t)));
            }
            Ok(Some(ValueType::Bool))
        }
        Expr::Binary(op, l, r) => {
            let (a, b) = (infer(l, env)?, infer(r, env)?);
            match op {
                BinaryOp::And | BinaryOp::Or => {
                    if !boolean(a) || !boolean(b) {
                        return err(format!(
                            "`{}` needs bool operands, found {} and {}",
                            op.symbol(),
                            show(a),
                            show(b)
                        ));
                    }
                    Ok(Some(ValueType::Bool))
                }
                _ if op.is_arithmetic() => {
                    if !numeric(a) || !numeric(b) {
                        return err(format!(
                            "`{}` needs numeric operands, found {} and {}",
                            op.symbol(),
                            show(a),
                            show(b)
                        ));
                    }
                    Ok(if *op == BinaryOp::Div {
                        Some(ValueType::Float)
                    } else {
                        widen(a, b)
                    })
                }
                BinaryOp::Eq | BinaryOp::Ne => {
                    if !comparable(a, b) {
                        return err(format!("cannot compare {} with {}", show(a), show(b)));
                    }
                    Ok(Some(ValueType::Bool))
                }
                _ => {
                    let orderable = |t: Ty| t.is_none_or(ValueType::is_orderable);
                    if !comparable(a, b) || !orderable(a) || !orderable(b) {
                        return err(format!("`{}` cannot order {} and {}", op.symbol(), show(a), show(b)));
                    }
                    Ok(Some(ValueType::Bool))
                }
            }
        }
        Expr::Call(f, args) => {
            let tys = args.iter().map(|a| infer(a, env)).collect::<Result<Vec<_>, _>>()?;
            let bad = |what: &str| {
                err(format!(
                    "`{}` expects {what}, found {}",
                    f.name(),
                    tys.iter().map(|t| show(*t)).collect::<Vec<_>>().join(", ")
                ))
            };
            match f {
                Builtin::IsNull | Builtin::NonEmpty => Ok(Some(ValueType::Bool)),
                Builtin::Length => {
                    if !matches!(tys[0], None | Some(ValueType::Text)) {
                        return bad("text");
                    }
                    Ok(Some(ValueType::Int))
                }
                Builtin::Abs => {
                    if !numeric(tys[0]) {
                        return bad("a number");
                    }
                    Ok(tys[0])
                }
                Builtin::Min | Builtin::Max => {
                    let ok_kind = |t: Ty| !matches!(t, Some(ValueType::Bool));
                    if !comparable(tys[0], tys[1]) || !ok_kind(tys[0]) || !ok_kind(tys[1]) {
                        return bad("two comparable values");
                    }
                    Ok(widen(tys[0], tys[1]))
                }
                Builtin::Positive => {
                    if !numeric(tys[0]) {
                        return bad("a number");
                    }
                    Ok(Some(ValueType::Bool))
                }
                Builtin::CoordsValid => {
                    if !numeric(tys[0]) || !numeric(tys[1]) {
                        return bad("two numbers");
                    }
                    Ok(Some(ValueType::Bool))
                }
                Builtin::HourOf => {
                    if !matches!(tys[0], None | Some(ValueType::Timestamp)) {
                        return bad("a timestamp");
                    }
                    Ok(Some(ValueType::Int))
                }
            }
        }
        Expr::Matches(e, _) => {
            let t = infer(e, env)?;
            if !matches!(t, None | Some(ValueType::Text)) {
                return err(format!("`matches` expects text, found {}", show(t)));
            }
            Ok(Some(ValueType::Bool))
        }
    }
}

/// Like [`infer`], additionally requiring a boolean result.
pub fn check_predicate(expr: &Expr, env: &TypeEnv) -> Result<(), TypeError> {
    let t = infer(expr, env)?;
    if !boolean(t) {
        return err(format!("expression must produce a bool, found {}", show(t)));
    }
    Ok(())
}
