use std::collections::HashSet;

use crate::frontend::ast::*;
use crate::frontend::typeck::TypeEnv;
use crate::frontend::types::Type;

struct Decomposer {
    env: TypeEnv,
    taken: HashSet<String>,
    next: usize,
    limit: usize,
}

/// Rewrites statements whose expressions exceed `limit` operator nodes into a
/// run of temporary declarations followed by the reduced statement.
///
/// Expression statements, declarations, returns and `if`/`switch` heads are
/// rewritten. Loop conditions, `for` steps and `for` initializers are left
/// alone since hoisting out of them would need duplication.
pub fn decompose_complex_expressions(env: &TypeEnv, f: &FunctionDef, limit: usize) -> FunctionDef {
    let env = env.clone().with_function(f);
    let mut taken: HashSet<String> = env.vars.keys().cloned().collect();
    taken.extend(env.funcs.keys().cloned());
    let mut d = Decomposer {
        env,
        taken,
        next: 0,
        limit,
    };
    let mut out = f.clone();
    out.body.items = d.items(std::mem::take(&mut out.body.items));
    out
}

/// No side effects and cannot trap: safe to evaluate ahead of a condition.
fn pure_and_safe(e: &Expr) -> bool {
    let mut ok = true;
    e.walk(&mut |x| match &x.kind {
        ExprKind::Call(..)
        | ExprKind::Assign(..)
        | ExprKind::IncDec { .. }
        | ExprKind::Index(..)
        | ExprKind::Member { arrow: true, .. }
        | ExprKind::Unary(UnOp::Deref, _)
        | ExprKind::Binary(BinOp::Div | BinOp::Rem | BinOp::Shl | BinOp::Shr, ..) => ok = false,
        _ => {}
    });
    ok
}

impl Decomposer {
    fn fresh(&mut self) -> String {
        loop {
            self.next += 1;
            let n = format!("tmp__{}", self.next);
            if self.taken.insert(n.clone()) {
                return n;
            }
        }
    }

    fn items(&mut self, items: Vec<Stmt>) -> Vec<Stmt> {
        items.into_iter().flat_map(|s| self.stmt(s)).collect()
    }

    /// Rewrites a statement used as a control body; several statements get braces.
    fn body(&mut self, s: Stmt) -> Stmt {
        let span = s.span;
        let mut v = self.stmt(s);
        if v.len() == 1 {
            v.pop().unwrap()
        } else {
            Stmt::new(StmtKind::Block(Block { items: v, span }), span)
        }
    }

    fn stmt(&mut self, s: Stmt) -> Vec<Stmt> {
        let span = s.span;
        let mut pre = Vec::new();
        let kind = match s.kind {
            StmtKind::Expr(e) => StmtKind::Expr(self.reduce(e, &mut pre, false)),
            StmtKind::Decl(ds) if ds.len() > 1 => {
                // one declarator per statement so later initializers see earlier names
                return ds
                    .into_iter()
                    .flat_map(|d| {
                        let sp = d.span;
                        self.stmt(Stmt::new(StmtKind::Decl(vec![d]), sp))
                    })
                    .collect();
            }
            StmtKind::Decl(mut ds) => {
                for d in &mut ds {
                    d.init = match d.init.take() {
                        Some(Initializer::Expr(e)) => Some(Initializer::Expr(self.reduce(e, &mut pre, false))),
                        other => other,
                    };
                }
                StmtKind::Decl(ds)
            }
            StmtKind::Return(Some(e)) => StmtKind::Return(Some(self.reduce(e, &mut pre, false))),
            StmtKind::If { cond, then, els } => StmtKind::If {
                cond: self.reduce(cond, &mut pre, false),
                then: Box::new(self.body(*then)),
                els: els.map(|e| Box::new(self.body(*e))),
            },
            StmtKind::Switch { cond, cases } => StmtKind::Switch {
                cond: self.reduce(cond, &mut pre, false),
                cases: cases
                    .into_iter()
                    .map(|c| SwitchCase {
                        body: self.items(c.body),
                        ..c
                    })
                    .collect(),
            },
            StmtKind::While { cond, body } => StmtKind::While {
                cond,
                body: Box::new(self.body(*body)),
            },
            StmtKind::DoWhile { body, cond } => StmtKind::DoWhile {
                body: Box::new(self.body(*body)),
                cond,
            },
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => StmtKind::For {
                init,
                cond,
                step,
                body: Box::new(self.body(*body)),
            },
            StmtKind::Block(b) => StmtKind::Block(Block {
                items: self.items(b.items),
                span: b.span,
            }),
            StmtKind::Labeled(l, inner) => StmtKind::Labeled(l, Box::new(self.body(*inner))),
            other => other,
        };
        pre.push(Stmt::new(kind, span));
        pre
    }

    fn hoistable_type(&self, e: &Expr) -> Option<Type> {
        let t = self.env.type_of(e).ok()?;
        if t.is_scalar() {
            Some(t)
        } else {
            None
        }
    }

    fn hoist(&mut self, e: Expr, pre: &mut Vec<Stmt>) -> Expr {
        let Some(ty) = self.hoistable_type(&e) else {
            return e;
        };
        let name = self.fresh();
        let span = e.span;
        self.env.vars.insert(name.clone(), ty.clone());
        pre.push(Stmt::new(
            StmtKind::Decl(vec![Declarator {
                name: name.clone(),
                ty,
                init: Some(Initializer::Expr(e)),
                span,
            }]),
            span,
        ));
        Expr::new(ExprKind::Ident(name), span)
    }

    /// Reduces `e` to at most `limit` operators, emitting temporaries into `pre`.
    /// Inside `conditional` context only pure, non-trapping pieces may move.
    fn reduce(&mut self, mut e: Expr, pre: &mut Vec<Stmt>, conditional: bool) -> Expr {
        if e.operator_count() <= self.limit {
            return e;
        }
        if conditional && !pure_and_safe(&e) {
            return e;
        }
        match &mut e.kind {
            ExprKind::SizeofExpr(_) | ExprKind::SizeofType(_) => return e,
            ExprKind::Assign(_, lhs, rhs) => {
                self.reduce_lvalue(lhs, pre, conditional);
                self.reduce_child(rhs, pre, conditional);
            }
            ExprKind::IncDec { expr, .. } => self.reduce_lvalue(expr, pre, conditional),
            ExprKind::Unary(UnOp::AddrOf, x) => self.reduce_lvalue(x, pre, conditional),
            ExprKind::Binary(BinOp::LogAnd | BinOp::LogOr, a, b) => {
                self.reduce_child(a, pre, conditional);
                self.reduce_child(b, pre, true);
            }
            ExprKind::Cond(c, t, f) => {
                self.reduce_child(c, pre, conditional);
                self.reduce_child(t, pre, true);
                self.reduce_child(f, pre, true);
            }
            ExprKind::Index(base, idx) => {
                self.reduce_lvalue(base, pre, conditional);
                self.reduce_child(idx, pre, conditional);
            }
            ExprKind::Member { base, arrow, .. } => {
                if *arrow {
                    self.reduce_child(base, pre, conditional);
                } else {
                    self.reduce_lvalue(base, pre, conditional);
                }
            }
            _ => {
                for c in e.children_mut() {
                    self.reduce_child(c, pre, conditional);
                }
            }
        }
        e
    }

    fn reduce_child(&mut self, slot: &mut Expr, pre: &mut Vec<Stmt>, conditional: bool) {
        let placeholder = Expr::new(ExprKind::IntLit(0, crate::frontend::IntKind::Int), slot.span);
        let child = std::mem::replace(slot, placeholder);
        let reduced = self.reduce(child, pre, conditional);
        *slot = if reduced.operator_count() > 0 && (!conditional || pure_and_safe(&reduced)) {
            self.hoist(reduced, pre)
        } else {
            reduced
        };
    }

    /// Lvalues stay in place; only their computed parts (subscripts) move.
    fn reduce_lvalue(&mut self, slot: &mut Expr, pre: &mut Vec<Stmt>, conditional: bool) {
        match &mut slot.kind {
            ExprKind::Index(base, idx) => {
                self.reduce_lvalue(base, pre, conditional);
                self.reduce_child(idx, pre, conditional);
            }
            ExprKind::Member { base, arrow: false, .. } => self.reduce_lvalue(base, pre, conditional),
            ExprKind::Member { base, arrow: true, .. } | ExprKind::Unary(UnOp::Deref, base) => {
                self.reduce_child(base, pre, conditional)
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_source, print_function};
    use crate::interp::{run_function, Value};

    fn with_fn(ast: &Ast, f: FunctionDef) -> Ast {
        let mut out = ast.clone();
        for it in &mut out.items {
            if let Item::Function(g) = it {
                if g.name() == f.name() {
                    *g = f.clone();
                }
            }
        }
        out
    }

    #[test]
    fn under_limit_is_unchanged() {
        let ast = parse_source("int x, a, b; void f(){ x = a+b; }").unwrap();
        let f = ast.function("f").unwrap();
        let g = decompose_complex_expressions(&TypeEnv::from_ast(&ast), f, 4);
        assert_eq!(print_function(f), print_function(&g));
    }

    #[test]
    fn nested_arithmetic_is_flattened() {
        let src = "int x; int f(int a, int b, int c, int d, int e, int g){ x = ((a*b)+(c*d))-((e/g)+a); return x; }";
        let ast = parse_source(src).unwrap();
        let f = ast.function("f").unwrap();
        let g = decompose_complex_expressions(&TypeEnv::from_ast(&ast), f, 2);
        let text = print_function(&g);
        assert!(text.contains("tmp__1"), "{text}");
        for s in &g.body.items {
            for e in s.own_exprs() {
                assert!(e.operator_count() <= 2, "{text}");
            }
        }
        let ast2 = with_fn(&ast, g);
        for args in [[1, 2, 3, 4, 5, 6], [-7, 3, 9, -2, 100, 7], [0, 0, 0, 0, 1, 1]] {
            let v: Vec<Value> = args.iter().map(|a| Value::int(*a)).collect();
            let x = run_function(&ast, "f", &v, 1000).unwrap();
            let y = run_function(&ast2, "f", &v, 1000).unwrap();
            assert_eq!(x.ret, y.ret);
        }
    }

    #[test]
    fn calls_keep_left_to_right_order() {
        let src = "int log_, x; int f1(){ log_ = log_ * 10 + 1; return 1; } int g1(){ log_ = log_ * 10 + 2; return 2; }\n\
                   int f(){ x = f1() * 3 + g1() * 5 + 1; return log_; }";
        let ast = parse_source(src).unwrap();
        let g = decompose_complex_expressions(&TypeEnv::from_ast(&ast), ast.function("f").unwrap(), 1);
        let text = print_function(&g);
        let p1 = text.find("f1()").unwrap();
        let p2 = text.find("g1()").unwrap();
        assert!(p1 < p2, "{text}");
        let ast2 = with_fn(&ast, g);
        assert_eq!(run_function(&ast2, "f", &[], 1000).unwrap().ret, Value::int(12));
    }

    #[test]
    fn guarded_operands_stay_guarded() {
        let src = "int a[4]; int f(int i){ int r = 0; r = (i < 4 && a[i] + a[i] * 2 + 1 > 0) + 1 + 2 + 3; return r; }";
        let ast = parse_source(src).unwrap();
        let g = decompose_complex_expressions(&TypeEnv::from_ast(&ast), ast.function("f").unwrap(), 2);
        let ast2 = with_fn(&ast, g);
        // i = 100 would index out of bounds if the guard were hoisted away
        assert_eq!(
            run_function(&ast2, "f", &[Value::int(100)], 1000).unwrap().ret,
            Value::int(6)
        );
    }
}
