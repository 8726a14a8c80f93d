//! Static expression typing over a flat name environment.
//!
//! Names are looked up without scoping, so callers either feed a renamed
//! function (unique names) or accept the innermost-wins approximation.

use std::collections::HashMap;

use super::ast::*;
use super::types::{usual_arithmetic, IntKind, Type};

#[derive(Clone, Debug, Default)]
pub struct TypeEnv {
    pub vars: HashMap<String, Type>,
    pub records: HashMap<String, RecordDef>,
    pub funcs: HashMap<String, FnSig>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("type error: {0}")]
pub struct TypeError(pub String);

impl TypeEnv {
    /// Environment with every global, record and signature of `ast`.
    pub fn from_ast(ast: &Ast) -> TypeEnv {
        let mut env = TypeEnv::default();
        for r in ast.records() {
            env.records.insert(r.tag.clone(), r.clone());
        }
        for g in ast.globals() {
            env.vars.insert(g.name.clone(), g.ty.clone());
        }
        for s in ast.signatures() {
            env.funcs.insert(s.name.clone(), s);
        }
        env
    }

    /// Adds parameters and every local declared in `f`.
    pub fn with_function(mut self, f: &FunctionDef) -> TypeEnv {
        for p in &f.sig.params {
            self.vars.insert(p.name.clone(), p.ty.clone());
        }
        for s in &f.body.items {
            s.walk(&mut |st| {
                if let StmtKind::Decl(ds) = &st.kind {
                    for d in ds {
                        self.vars.insert(d.name.clone(), d.ty.clone());
                    }
                }
            });
        }
        self
    }

    pub fn field(&self, record: &Type, name: &str) -> Result<Type, TypeError> {
        let Type::Record(_, tag) = record else {
            return Err(TypeError(format!("member `{name}` of non-record type {record}")));
        };
        let def = self
            .records
            .get(tag)
            .ok_or_else(|| TypeError(format!("incomplete type {record}")))?;
        def.fields
            .iter()
            .find(|f| f.name == name)
            .map(|f| f.ty.clone())
            .ok_or_else(|| TypeError(format!("{record} has no member `{name}`")))
    }

    pub fn type_of(&self, e: &Expr) -> Result<Type, TypeError> {
        Ok(match &e.kind {
            ExprKind::IntLit(_, k) => Type::Int(*k),
            ExprKind::FloatLit(_, single) => {
                if *single {
                    Type::Float
                } else {
                    Type::Double
                }
            }
            ExprKind::StrLit(s) => Type::array_of(Type::Int(IntKind::Char), s.len() as u64 + 1),
            ExprKind::Ident(n) => self
                .vars
                .get(n)
                .cloned()
                .ok_or_else(|| TypeError(format!("unknown name `{n}`")))?,
            ExprKind::Unary(op, x) => {
                let t = self.type_of(x)?;
                match op {
                    UnOp::Neg | UnOp::Plus | UnOp::BitNot => promote(&t),
                    UnOp::Not => Type::INT,
                    UnOp::Deref => t
                        .decay()
                        .pointee()
                        .cloned()
                        .ok_or_else(|| TypeError(format!("dereference of non-pointer {t}")))?,
                    UnOp::AddrOf => Type::pointer_to(t),
                }
            }
            ExprKind::Binary(op, a, b) => {
                let ta = self.type_of(a)?.decay();
                let tb = self.type_of(b)?.decay();
                binary_result(*op, &ta, &tb)?
            }
            ExprKind::Assign(_, l, _) => self.type_of(l)?,
            ExprKind::IncDec { expr, .. } => self.type_of(expr)?,
            ExprKind::Cond(_, t, f) => {
                let tt = self.type_of(t)?.decay();
                let tf = self.type_of(f)?.decay();
                if tt.is_arithmetic() && tf.is_arithmetic() {
                    usual_arithmetic(&tt, &tf)
                } else {
                    tt
                }
            }
            ExprKind::Call(name, _) => self
                .funcs
                .get(name)
                .map(|s| s.ret.clone())
                .ok_or_else(|| TypeError(format!("call to undeclared function `{name}`")))?,
            ExprKind::Index(b, i) => {
                let tb = self.type_of(b)?.decay();
                let ti = self.type_of(i)?.decay();
                let p = if tb.is_pointer() { tb } else { ti };
                p.pointee()
                    .cloned()
                    .ok_or_else(|| TypeError("subscript of non-pointer".into()))?
            }
            ExprKind::Member { base, field, arrow } => {
                let tb = self.type_of(base)?;
                let rec = if *arrow {
                    tb.decay()
                        .pointee()
                        .cloned()
                        .ok_or_else(|| TypeError("`->` on non-pointer".into()))?
                } else {
                    tb
                };
                self.field(&rec, field)?
            }
            ExprKind::Cast(t, _) => t.clone(),
            ExprKind::SizeofType(_) | ExprKind::SizeofExpr(_) => Type::Int(IntKind::ULong),
        })
    }
}

pub fn promote(t: &Type) -> Type {
    match t {
        Type::Int(k) => Type::Int(k.promote()),
        other => other.clone(),
    }
}

fn binary_result(op: BinOp, ta: &Type, tb: &Type) -> Result<Type, TypeError> {
    if op.is_comparison() || op.is_logical() {
        return Ok(Type::INT);
    }
    match op {
        BinOp::Add if ta.is_pointer() && tb.is_integer() => Ok(ta.clone()),
        BinOp::Add if tb.is_pointer() && ta.is_integer() => Ok(tb.clone()),
        BinOp::Sub if ta.is_pointer() && tb.is_integer() => Ok(ta.clone()),
        BinOp::Sub if ta.is_pointer() && tb.is_pointer() => Ok(Type::Int(IntKind::Long)),
        BinOp::Shl | BinOp::Shr if ta.is_integer() && tb.is_integer() => Ok(promote(ta)),
        BinOp::Rem | BinOp::BitAnd | BinOp::BitOr | BinOp::BitXor | BinOp::Shl | BinOp::Shr => {
            if ta.is_integer() && tb.is_integer() {
                Ok(usual_arithmetic(ta, tb))
            } else {
                Err(TypeError(format!("`{}` needs integer operands", op.symbol())))
            }
        }
        _ if ta.is_arithmetic() && tb.is_arithmetic() => Ok(usual_arithmetic(ta, tb)),
        _ => Err(TypeError(format!(
            "invalid operands to `{}` ({ta} and {tb})",
            op.symbol()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::{parse_expression, parse_source};
    use super::*;

    #[test]
    fn conversions() {
        let ast = parse_source(
            "struct S { char c; double d; }; struct S s; int *p; unsigned u; short h; long l;",
        )
        .unwrap();
        let env = TypeEnv::from_ast(&ast);
        let t = |x: &str| env.type_of(&parse_expression(x).unwrap()).unwrap();
        assert_eq!(t("h + h"), Type::INT);
        assert_eq!(t("u + 1"), Type::Int(IntKind::UInt));
        assert_eq!(t("u + l"), Type::Int(IntKind::Long));
        assert_eq!(t("s.c * s.d"), Type::Double);
        assert_eq!(t("p + 1"), Type::pointer_to(Type::INT));
        assert_eq!(t("p[1]"), Type::INT);
        assert_eq!(t("h << l"), Type::INT);
        assert_eq!(t("u < 3"), Type::INT);
        assert!(env.type_of(&parse_expression("s.q").unwrap()).is_err());
    }
}
