//! Pretty printer. Output reparses to the same tree (modulo spans).

use super::ast::*;
use super::types::{IntKind, Type};

const INDENT: &str = "    ";

pub fn print_ast(ast: &Ast) -> String {
    let mut out = String::new();
    for item in &ast.items {
        match item {
            Item::Record(r) => {
                out.push_str(&format!("{} {} {{\n", r.kind.keyword(), r.tag));
                for f in &r.fields {
                    out.push_str(&format!("{INDENT}{};\n", f.ty.declare(&f.name)));
                }
                out.push_str("};\n");
            }
            Item::Global(g) => {
                out.push_str(&g.ty.declare(&g.name));
                if let Some(init) = &g.init {
                    out.push_str(" = ");
                    out.push_str(&print_initializer(init));
                }
                out.push_str(";\n");
            }
            Item::Prototype(sig) => {
                out.push_str(&print_signature(sig));
                out.push_str(";\n");
            }
            Item::Function(f) => out.push_str(&print_function(f)),
        }
    }
    out
}

pub fn print_signature(sig: &FnSig) -> String {
    let mut params: Vec<String> = sig
        .params
        .iter()
        .map(|p| p.ty.declare(&p.name))
        .collect();
    if sig.variadic {
        params.push("...".into());
    }
    let plist = if params.is_empty() {
        "void".to_string()
    } else {
        params.join(", ")
    };
    sig.ret.declare(&format!("{}({plist})", sig.name))
}

pub fn print_function(f: &FunctionDef) -> String {
    let mut out = print_signature(&f.sig);
    out.push(' ');
    print_block(&f.body, 0, &mut out);
    out.push('\n');
    out
}

/// Prints a block's items at the given indentation, without braces.
pub fn print_items(items: &[Stmt], indent: usize) -> String {
    let mut out = String::new();
    for s in items {
        print_stmt_into(s, indent, &mut out);
    }
    out
}

pub fn print_stmt(s: &Stmt) -> String {
    let mut out = String::new();
    print_stmt_into(s, 0, &mut out);
    out
}

fn pad(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str(INDENT);
    }
}

fn print_block(b: &Block, indent: usize, out: &mut String) {
    out.push_str("{\n");
    for s in &b.items {
        print_stmt_into(s, indent + 1, out);
    }
    pad(indent, out);
    out.push('}');
}

/// Prints a statement used as the body of a control structure, continuing the current line.
fn print_body(s: &Stmt, indent: usize, out: &mut String) {
    if let StmtKind::Block(b) = &s.kind {
        out.push(' ');
        print_block(b, indent, out);
        out.push('\n');
    } else {
        out.push('\n');
        print_stmt_into(s, indent + 1, out);
    }
}

pub fn print_decl(ds: &[Declarator]) -> String {
    let Some(first) = ds.first() else {
        return String::new();
    };
    let base = first.ty.base().to_string();
    let parts: Vec<String> = ds
        .iter()
        .map(|d| {
            let full = d.ty.declare(&d.name);
            // strip the base type, keep stars, name and dimensions
            let decl = full[d.ty.base().to_string().len()..].trim_start().to_string();
            match &d.init {
                Some(i) => format!("{decl} = {}", print_initializer(i)),
                None => decl,
            }
        })
        .collect();
    format!("{base} {};", parts.join(", "))
}

/// One-line rendering of a `for` init clause (includes the trailing `;`).
fn inline_stmt(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Blank => ";".into(),
        StmtKind::Expr(e) => format!("{};", print_expr(e)),
        StmtKind::Decl(ds) => print_decl(ds),
        _ => {
            let mut out = String::new();
            print_stmt_into(s, 0, &mut out);
            out.trim().to_string()
        }
    }
}

fn print_stmt_into(s: &Stmt, indent: usize, out: &mut String) {
    match &s.kind {
        StmtKind::Labeled(name, inner) => {
            pad(indent.saturating_sub(1), out);
            out.push_str(name);
            out.push_str(":\n");
            print_stmt_into(inner, indent, out);
            return;
        }
        StmtKind::Block(b) => {
            pad(indent, out);
            print_block(b, indent, out);
            out.push('\n');
            return;
        }
        _ => {}
    }
    pad(indent, out);
    match &s.kind {
        StmtKind::Expr(e) => {
            out.push_str(&print_expr(e));
            out.push(';');
        }
        StmtKind::Decl(ds) => out.push_str(&print_decl(ds)),
        StmtKind::Goto(l) => out.push_str(&format!("goto {l};")),
        StmtKind::Blank => out.push(';'),
        StmtKind::Break => out.push_str("break;"),
        StmtKind::Continue => out.push_str("continue;"),
        StmtKind::Return(None) => out.push_str("return;"),
        StmtKind::Return(Some(e)) => out.push_str(&format!("return {};", print_expr(e))),
        StmtKind::If { cond, then, els } => {
            out.push_str(&format!("if ({})", print_expr(cond)));
            print_body(then, indent, out);
            if let Some(e) = els {
                pad(indent, out);
                out.push_str("else");
                if let StmtKind::If { .. } = e.kind {
                    out.push(' ');
                    let mut inner = String::new();
                    print_stmt_into(e, indent, &mut inner);
                    out.push_str(inner.trim_start());
                } else {
                    print_body(e, indent, out);
                }
            }
            return;
        }
        StmtKind::While { cond, body } => {
            out.push_str(&format!("while ({})", print_expr(cond)));
            print_body(body, indent, out);
            return;
        }
        StmtKind::DoWhile { body, cond } => {
            out.push_str("do");
            print_body(body, indent, out);
            pad(indent, out);
            out.push_str(&format!("while ({});", print_expr(cond)));
        }
        StmtKind::For {
            init,
            cond,
            step,
            body,
        } => {
            let c = cond.as_ref().map(print_expr).unwrap_or_default();
            let st = step.as_ref().map(print_expr).unwrap_or_default();
            let init = inline_stmt(init);
            let head = match (c.is_empty(), st.is_empty()) {
                (true, true) => format!("for ({init};)"),
                (false, true) => format!("for ({init} {c};)"),
                (true, false) => format!("for ({init}; {st})"),
                (false, false) => format!("for ({init} {c}; {st})"),
            };
            out.push_str(&head);
            print_body(body, indent, out);
            return;
        }
        StmtKind::Switch { cond, cases } => {
            out.push_str(&format!("switch ({}) {{\n", print_expr(cond)));
            for c in cases {
                pad(indent, out);
                match &c.label {
                    CaseLabel::Case(e) => out.push_str(&format!("case {}:\n", print_expr(e))),
                    CaseLabel::Default => out.push_str("default:\n"),
                }
                for s in &c.body {
                    print_stmt_into(s, indent + 1, out);
                }
            }
            pad(indent, out);
            out.push('}');
        }
        StmtKind::Labeled(..) | StmtKind::Block(_) => unreachable!(),
    }
    out.push('\n');
}

pub fn print_initializer(i: &Initializer) -> String {
    match i {
        Initializer::Expr(e) => print_expr_at(e, 1),
        Initializer::List(items, _) => {
            let inner: Vec<String> = items.iter().map(print_initializer).collect();
            format!("{{{}}}", inner.join(", "))
        }
    }
}

const LEVEL_ASSIGN: u8 = 1;
const LEVEL_COND: u8 = 2;
const LEVEL_UNARY: u8 = 13;
const LEVEL_POSTFIX: u8 = 14;
const LEVEL_PRIMARY: u8 = 15;

fn level(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Assign(..) => LEVEL_ASSIGN,
        ExprKind::Cond(..) => LEVEL_COND,
        ExprKind::Binary(op, ..) => op.precedence() + 2,
        ExprKind::Unary(..)
        | ExprKind::Cast(..)
        | ExprKind::SizeofExpr(_)
        | ExprKind::SizeofType(_)
        | ExprKind::IncDec { prefix: true, .. } => LEVEL_UNARY,
        ExprKind::Index(..)
        | ExprKind::Member { .. }
        | ExprKind::Call(..)
        | ExprKind::IncDec { prefix: false, .. } => LEVEL_POSTFIX,
        _ => LEVEL_PRIMARY,
    }
}

pub fn print_expr(e: &Expr) -> String {
    print_expr_at(e, 0)
}

fn print_expr_at(e: &Expr, min: u8) -> String {
    let s = print_raw(e);
    if level(e) < min {
        format!("({s})")
    } else {
        s
    }
}

fn print_raw(e: &Expr) -> String {
    match &e.kind {
        ExprKind::IntLit(v, k) => int_literal(*v, *k),
        ExprKind::FloatLit(v, single) => float_literal(*v, *single),
        ExprKind::StrLit(bytes) => string_literal(bytes),
        ExprKind::Ident(n) => n.clone(),
        ExprKind::Unary(op, inner) => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Plus => "+",
                UnOp::Not => "!",
                UnOp::BitNot => "~",
                UnOp::Deref => "*",
                UnOp::AddrOf => "&",
            };
            let body = print_expr_at(inner, LEVEL_UNARY);
            // avoid gluing `- -x` into `--x`
            if body.starts_with(sym) && matches!(op, UnOp::Neg | UnOp::Plus | UnOp::AddrOf) {
                format!("{sym} {body}")
            } else {
                format!("{sym}{body}")
            }
        }
        ExprKind::Binary(op, l, r) => {
            let p = level(e);
            format!(
                "{} {} {}",
                print_expr_at(l, p),
                op.symbol(),
                print_expr_at(r, p + 1)
            )
        }
        ExprKind::Assign(op, l, r) => {
            let sym = op.map(|o| format!("{}=", o.symbol())).unwrap_or("=".into());
            format!(
                "{} {sym} {}",
                print_expr_at(l, LEVEL_UNARY),
                print_expr_at(r, LEVEL_ASSIGN)
            )
        }
        ExprKind::IncDec {
            prefix,
            increment,
            expr,
        } => {
            let sym = if *increment { "++" } else { "--" };
            if *prefix {
                format!("{sym}{}", print_expr_at(expr, LEVEL_UNARY))
            } else {
                format!("{}{sym}", print_expr_at(expr, LEVEL_POSTFIX))
            }
        }
        ExprKind::Cond(c, t, f) => format!(
            "{} ? {} : {}",
            print_expr_at(c, LEVEL_COND + 1),
            print_expr_at(t, LEVEL_ASSIGN),
            print_expr_at(f, LEVEL_COND)
        ),
        ExprKind::Call(name, args) => {
            let a: Vec<String> = args.iter().map(|x| print_expr_at(x, LEVEL_ASSIGN)).collect();
            format!("{name}({})", a.join(", "))
        }
        ExprKind::Index(b, i) => format!("{}[{}]", print_expr_at(b, LEVEL_POSTFIX), print_expr(i)),
        ExprKind::Member { base, field, arrow } => format!(
            "{}{}{field}",
            print_expr_at(base, LEVEL_POSTFIX),
            if *arrow { "->" } else { "." }
        ),
        ExprKind::Cast(ty, inner) => format!("({}){}", ty.declare(""), print_expr_at(inner, LEVEL_UNARY)),
        ExprKind::SizeofType(ty) => format!("sizeof({})", ty.declare("")),
        ExprKind::SizeofExpr(inner) => format!("sizeof({})", print_expr(inner)),
    }
}

fn int_literal(v: u64, k: IntKind) -> String {
    let suffix = match k {
        IntKind::UInt => "U",
        IntKind::ULong => "UL",
        IntKind::Long if v <= i32::MAX as u64 => "L",
        _ => "",
    };
    format!("{v}{suffix}")
}

fn float_literal(v: f64, single: bool) -> String {
    if single {
        format!("{:?}f", v as f32)
    } else {
        format!("{v:?}")
    }
}

fn string_literal(bytes: &[u8]) -> String {
    let mut s = String::from("\"");
    for &b in bytes {
        match b {
            b'"' => s.push_str("\\\""),
            b'\\' => s.push_str("\\\\"),
            b'\n' => s.push_str("\\n"),
            b'\t' => s.push_str("\\t"),
            0x20..=0x7e => s.push(b as char),
            _ => s.push_str(&format!("\\{b:03o}")),
        }
    }
    s.push('"');
    s
}

/// Renders a type for use in casts and sizeof.
pub fn type_name(ty: &Type) -> String {
    ty.declare("")
}

#[cfg(test)]
mod tests {
    use super::super::ast::erase_spans;
    use super::super::parser::parse_source;
    use super::*;

    fn fixpoint(src: &str) {
        let mut a = parse_source(src).unwrap();
        let printed = print_ast(&a);
        let mut b = parse_source(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        erase_spans(&mut a);
        erase_spans(&mut b);
        a.source.clear();
        b.source.clear();
        assert_eq!(a, b, "{printed}");
    }

    #[test]
    fn expressions_keep_structure() {
        fixpoint("int f(int a, int b){ return (a - (b - 1)) * -(-a) + (a ? b : a = 2); }");
        fixpoint("int g; int f(int *p){ *p = -1; p[2] = sizeof(int) + sizeof(g); return !~*p; }");
        fixpoint("double f(double x){ float y = 1.5f; return (float)x / 3.0 + 1e-7 + y; }");
    }

    #[test]
    fn statements_keep_structure() {
        fixpoint(
            "struct S { int a; char b[3]; }; struct S s; unsigned long u = 4294967295U;\n\
             int f(int n){ int i, t = 0; for (i = 0; i < n; i++) { if (i % 2) continue; else t += i; }\n\
             do { t--; } while (t > 100);\n\
             switch (n) { case 1: t = 1; case 2: t++; break; default: ; }\n\
             while (0) ; { int z = s.a; t ^= z; } return t; }",
        );
    }

    #[test]
    fn dangling_else_preserved() {
        fixpoint("int f(int a){ if (a) { if (a > 1) return 1; } else return 2; if (a) if (a) return 3; else return 4; return 0; }");
    }
}
