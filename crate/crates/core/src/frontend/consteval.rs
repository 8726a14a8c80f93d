//! Integer constant folding for array dimensions and case labels.

use super::ast::{BinOp, Expr, ExprKind, UnOp};

/// Evaluates an integer constant expression. Returns `None` for anything
/// that is not a constant or would trap (division by zero, overflow).
pub fn eval_int(e: &Expr) -> Option<i64> {
    eval(e).and_then(|v| i64::try_from(v).ok())
}

fn eval(e: &Expr) -> Option<i128> {
    Some(match &e.kind {
        ExprKind::IntLit(v, k) => k.wrap(*v as i128),
        ExprKind::Unary(op, x) => {
            let v = eval(x)?;
            match op {
                UnOp::Neg => -v,
                UnOp::Plus => v,
                UnOp::Not => (v == 0) as i128,
                UnOp::BitNot => !v,
                UnOp::Deref | UnOp::AddrOf => return None,
            }
        }
        ExprKind::Binary(op, a, b) => {
            let x = eval(a)?;
            let y = eval(b)?;
            match op {
                BinOp::Add => x.checked_add(y)?,
                BinOp::Sub => x.checked_sub(y)?,
                BinOp::Mul => x.checked_mul(y)?,
                BinOp::Div => x.checked_div(y)?,
                BinOp::Rem => x.checked_rem(y)?,
                BinOp::Shl => {
                    if !(0..64).contains(&y) {
                        return None;
                    }
                    x.checked_shl(y as u32)?
                }
                BinOp::Shr => {
                    if !(0..64).contains(&y) {
                        return None;
                    }
                    x >> y
                }
                BinOp::Lt => (x < y) as i128,
                BinOp::Gt => (x > y) as i128,
                BinOp::Le => (x <= y) as i128,
                BinOp::Ge => (x >= y) as i128,
                BinOp::Eq => (x == y) as i128,
                BinOp::Ne => (x != y) as i128,
                BinOp::BitAnd => x & y,
                BinOp::BitXor => x ^ y,
                BinOp::BitOr => x | y,
                BinOp::LogAnd => (x != 0 && y != 0) as i128,
                BinOp::LogOr => (x != 0 || y != 0) as i128,
            }
        }
        ExprKind::Cond(c, t, f) => {
            if eval(c)? != 0 {
                eval(t)?
            } else {
                eval(f)?
            }
        }
        ExprKind::Cast(ty, x) => ty.int_kind()?.wrap(eval(x)?),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_expression;
    use super::*;

    #[test]
    fn folds() {
        let v = |s: &str| eval_int(&parse_expression(s).unwrap());
        assert_eq!(v("2 * (3 + 4) - -1"), Some(15));
        assert_eq!(v("1 << 4 | 1"), Some(17));
        assert_eq!(v("(char)300"), Some(44));
        assert_eq!(v("1 / 0"), None);
        assert_eq!(v("x + 1"), None);
    }
}
