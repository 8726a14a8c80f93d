//! Tree-walking interpreter for the scalar/array part of the subset.
//!
//! Used as an executable oracle: renaming and expression decomposition must
//! not change what a function computes, and generated programs must terminate.

use std::collections::HashMap;

use crate::frontend::ast::*;
use crate::frontend::types::{usual_arithmetic, IntKind, Type};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Int(i128, IntKind),
    Float(f64),
    Double(f64),
    Void,
}

impl Value {
    pub fn int(v: i64) -> Value {
        Value::Int(v as i128, IntKind::Int)
    }

    fn ty(&self) -> Type {
        match self {
            Value::Int(_, k) => Type::Int(*k),
            Value::Float(_) => Type::Float,
            Value::Double(_) => Type::Double,
            Value::Void => Type::Void,
        }
    }

    fn truthy(&self) -> bool {
        match self {
            Value::Int(v, _) => *v != 0,
            Value::Float(f) | Value::Double(f) => *f != 0.0,
            Value::Void => false,
        }
    }

    fn as_f64(&self) -> f64 {
        match self {
            Value::Int(v, _) => *v as f64,
            Value::Float(f) | Value::Double(f) => *f,
            Value::Void => 0.0,
        }
    }

    /// Converts to `ty` with C conversion rules (integers wrap).
    pub fn convert(&self, ty: &Type) -> Result<Value, InterpError> {
        Ok(match ty {
            Type::Int(k) => match self {
                Value::Int(v, _) => Value::Int(k.wrap(*v), *k),
                Value::Float(f) | Value::Double(f) => {
                    let t = f.trunc();
                    if !t.is_finite() || (t as i128) < k.min_value() || (t as i128) > k.max_value() {
                        return Err(InterpError::Undefined("float to integer overflow".into()));
                    }
                    Value::Int(t as i128, *k)
                }
                Value::Void => return Err(InterpError::Unsupported("void value".into())),
            },
            Type::Float => Value::Float(self.as_f64() as f32 as f64),
            Type::Double => Value::Double(self.as_f64()),
            Type::Void => Value::Void,
            other => return Err(InterpError::Unsupported(format!("values of type {other}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum InterpError {
    #[error("step limit exceeded")]
    StepLimit,
    #[error("undefined behaviour: {0}")]
    Undefined(String),
    #[error("unsupported in interpreter: {0}")]
    Unsupported(String),
    #[error("unknown name `{0}`")]
    UnknownName(String),
}

#[derive(Clone, Debug)]
struct Object {
    ty: Type,
    cells: Vec<Value>,
}

fn scalar_count(ty: &Type) -> Result<usize, InterpError> {
    match ty {
        Type::Array(e, Some(n)) => Ok(scalar_count(e)? * *n as usize),
        Type::Int(_) | Type::Float | Type::Double => Ok(1),
        other => Err(InterpError::Unsupported(format!("objects of type {other}"))),
    }
}

fn leaf(ty: &Type) -> &Type {
    match ty {
        Type::Array(e, _) => leaf(e),
        t => t,
    }
}

fn zero(ty: &Type) -> Value {
    match ty {
        Type::Int(k) => Value::Int(0, *k),
        Type::Float => Value::Float(0.0),
        _ => Value::Double(0.0),
    }
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return(Value),
}

/// Observable outcome of running a function.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub ret: Value,
    /// Final value of every global, flattened, in declaration order.
    pub globals: Vec<(String, Vec<Value>)>,
    pub steps: u64,
}

pub struct Interpreter<'a> {
    ast: &'a Ast,
    globals: HashMap<String, Object>,
    global_order: Vec<String>,
    frames: Vec<Vec<HashMap<String, Object>>>,
    steps: u64,
    limit: u64,
}

impl<'a> Interpreter<'a> {
    pub fn new(ast: &'a Ast, limit: u64) -> Result<Interpreter<'a>, InterpError> {
        let mut it = Interpreter {
            ast,
            globals: HashMap::new(),
            global_order: Vec::new(),
            frames: Vec::new(),
            steps: 0,
            limit,
        };
        for g in ast.globals() {
            let obj = it.make_object(&g.ty, g.init.as_ref())?;
            if it.globals.insert(g.name.clone(), obj).is_none() {
                it.global_order.push(g.name.clone());
            }
        }
        Ok(it)
    }

    /// Calls `name` with `args` and reports the return value and global state.
    pub fn run(mut self, name: &str, args: &[Value]) -> Result<Outcome, InterpError> {
        let ret = self.call(name, args)?;
        let globals = self
            .global_order
            .iter()
            .map(|n| (n.clone(), self.globals[n].cells.clone()))
            .collect();
        Ok(Outcome {
            ret,
            globals,
            steps: self.steps,
        })
    }

    fn tick(&mut self) -> Result<(), InterpError> {
        self.steps += 1;
        if self.steps > self.limit {
            Err(InterpError::StepLimit)
        } else {
            Ok(())
        }
    }

    fn make_object(&mut self, ty: &Type, init: Option<&Initializer>) -> Result<Object, InterpError> {
        let n = scalar_count(ty)?;
        let mut cells = vec![zero(leaf(ty)); n];
        if let Some(init) = init {
            let mut flat = Vec::new();
            self.flatten_init(ty, init, &mut flat)?;
            for (i, v) in flat.into_iter().enumerate() {
                if i < n {
                    cells[i] = v;
                }
            }
        }
        Ok(Object {
            ty: ty.clone(),
            cells,
        })
    }

    fn flatten_init(&mut self, ty: &Type, init: &Initializer, out: &mut Vec<Value>) -> Result<(), InterpError> {
        match (ty, init) {
            (Type::Array(elem, Some(n)), Initializer::List(items, _)) => {
                let per = scalar_count(elem)?;
                for i in 0..*n as usize {
                    let start = out.len();
                    if let Some(it) = items.get(i) {
                        self.flatten_init(elem, it, out)?;
                    }
                    while out.len() < start + per {
                        out.push(zero(leaf(elem)));
                    }
                }
                Ok(())
            }
            (Type::Array(elem, Some(n)), Initializer::Expr(Expr { kind: ExprKind::StrLit(s), .. })) => {
                for i in 0..*n as usize {
                    let b = s.get(i).copied().unwrap_or(0);
                    out.push(Value::Int(b as i128, IntKind::Char).convert(elem)?);
                }
                Ok(())
            }
            (_, Initializer::Expr(e)) => {
                let v = self.eval(e)?;
                out.push(v.convert(ty)?);
                Ok(())
            }
            (_, Initializer::List(items, _)) => match items.first() {
                Some(first) => self.flatten_init(ty, first, out),
                None => {
                    out.push(zero(ty));
                    Ok(())
                }
            },
        }
    }

    fn call(&mut self, name: &str, args: &[Value]) -> Result<Value, InterpError> {
        let f = self
            .ast
            .function(name)
            .ok_or_else(|| InterpError::UnknownName(name.to_string()))?;
        if f.sig.params.len() != args.len() {
            return Err(InterpError::Undefined(format!("wrong argument count for `{name}`")));
        }
        if self.frames.len() > 200 {
            return Err(InterpError::StepLimit);
        }
        let mut scope = HashMap::new();
        for (p, a) in f.sig.params.iter().zip(args) {
            let v = a.convert(&p.ty)?;
            scope.insert(
                p.name.clone(),
                Object {
                    ty: p.ty.clone(),
                    cells: vec![v],
                },
            );
        }
        self.frames.push(vec![scope]);
        let flow = self.exec_block(&f.body.items);
        self.frames.pop();
        match flow? {
            Flow::Return(v) => v.convert(&f.sig.ret),
            _ => Ok(if f.sig.ret == Type::Void {
                Value::Void
            } else {
                zero(&f.sig.ret)
            }),
        }
    }

    fn scopes(&mut self) -> &mut Vec<HashMap<String, Object>> {
        self.frames.last_mut().expect("inside a call")
    }

    fn exec_block(&mut self, items: &[Stmt]) -> Result<Flow, InterpError> {
        self.scopes().push(HashMap::new());
        let mut out = Ok(Flow::Normal);
        for s in items {
            match self.exec(s) {
                Ok(Flow::Normal) => {}
                other => {
                    out = other;
                    break;
                }
            }
        }
        self.scopes().pop();
        out
    }

    fn exec(&mut self, s: &Stmt) -> Result<Flow, InterpError> {
        self.tick()?;
        match &s.kind {
            StmtKind::Expr(e) => {
                self.eval(e)?;
            }
            StmtKind::Decl(ds) => {
                for d in ds {
                    let obj = self.make_object(&d.ty, d.init.as_ref())?;
                    self.scopes().last_mut().unwrap().insert(d.name.clone(), obj);
                }
            }
            StmtKind::Blank => {}
            StmtKind::Block(b) => return self.exec_block(&b.items),
            StmtKind::If { cond, then, els } => {
                if self.eval(cond)?.truthy() {
                    return self.exec_scoped(then);
                } else if let Some(e) = els {
                    return self.exec_scoped(e);
                }
            }
            StmtKind::While { cond, body } => {
                while self.eval(cond)?.truthy() {
                    self.tick()?;
                    match self.exec_scoped(body)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        _ => {}
                    }
                }
            }
            StmtKind::DoWhile { body, cond } => loop {
                self.tick()?;
                match self.exec_scoped(body)? {
                    Flow::Break => break,
                    Flow::Return(v) => return Ok(Flow::Return(v)),
                    _ => {}
                }
                if !self.eval(cond)?.truthy() {
                    break;
                }
            },
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => {
                self.scopes().push(HashMap::new());
                let r = self.exec_for(init, cond.as_ref(), step.as_ref(), body);
                self.scopes().pop();
                return r;
            }
            StmtKind::Switch { cond, cases } => {
                let v = self.eval(cond)?;
                let Value::Int(x, k) = v else {
                    return Err(InterpError::Undefined("switch on non-integer".into()));
                };
                let pk = k.promote();
                let mut start = None;
                for (i, c) in cases.iter().enumerate() {
                    if let CaseLabel::Case(e) = &c.label {
                        let cv = crate::frontend::consteval::eval_int(e)
                            .ok_or_else(|| InterpError::Unsupported("non-constant case".into()))?;
                        if pk.wrap(cv as i128) == pk.wrap(x) {
                            start = Some(i);
                            break;
                        }
                    }
                }
                if start.is_none() {
                    start = cases.iter().position(|c| c.label == CaseLabel::Default);
                }
                if let Some(i) = start {
                    self.scopes().push(HashMap::new());
                    'outer: for c in &cases[i..] {
                        for st in &c.body {
                            match self.exec(st) {
                                Ok(Flow::Normal) => {}
                                Ok(Flow::Break) => break 'outer,
                                other => {
                                    self.scopes().pop();
                                    return other;
                                }
                            }
                        }
                    }
                    self.scopes().pop();
                }
            }
            StmtKind::Break => return Ok(Flow::Break),
            StmtKind::Continue => return Ok(Flow::Continue),
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e)?,
                    None => Value::Void,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Goto(_) | StmtKind::Labeled(..) => {
                return Err(InterpError::Unsupported("goto".into()))
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_for(
        &mut self,
        init: &Stmt,
        cond: Option<&Expr>,
        step: Option<&Expr>,
        body: &Stmt,
    ) -> Result<Flow, InterpError> {
        self.exec(init)?;
        loop {
            if let Some(c) = cond {
                if !self.eval(c)?.truthy() {
                    break;
                }
            }
            self.tick()?;
            match self.exec_scoped(body)? {
                Flow::Break => break,
                Flow::Return(v) => return Ok(Flow::Return(v)),
                _ => {}
            }
            if let Some(s) = step {
                self.eval(s)?;
            }
        }
        Ok(Flow::Normal)
    }

    /// Sub-statements of control structures get their own scope.
    fn exec_scoped(&mut self, s: &Stmt) -> Result<Flow, InterpError> {
        self.scopes().push(HashMap::new());
        let r = self.exec(s);
        self.scopes().pop();
        r
    }

    fn lookup(&mut self, name: &str) -> Result<&mut Object, InterpError> {
        if let Some(frame) = self.frames.last_mut() {
            for scope in frame.iter_mut().rev() {
                if scope.contains_key(name) {
                    return Ok(scope.get_mut(name).unwrap());
                }
            }
        }
        self.globals
            .get_mut(name)
            .ok_or_else(|| InterpError::UnknownName(name.to_string()))
    }

    /// Resolves an lvalue to (variable, first cell, type).
    fn place(&mut self, e: &Expr) -> Result<(String, usize, Type), InterpError> {
        match &e.kind {
            ExprKind::Ident(n) => {
                let ty = self.lookup(n)?.ty.clone();
                Ok((n.clone(), 0, ty))
            }
            ExprKind::Index(b, i) => {
                let (name, off, ty) = self.place(b)?;
                let Type::Array(elem, Some(n)) = ty else {
                    return Err(InterpError::Unsupported("subscript of non-array".into()));
                };
                let idx = match self.eval(i)? {
                    Value::Int(v, _) => v,
                    _ => return Err(InterpError::Undefined("non-integer subscript".into())),
                };
                if idx < 0 || idx >= n as i128 {
                    return Err(InterpError::Undefined(format!("index {idx} out of bounds")));
                }
                let per = scalar_count(&elem)?;
                Ok((name, off + idx as usize * per, *elem))
            }
            _ => Err(InterpError::Unsupported("lvalue form".into())),
        }
    }

    fn load(&mut self, e: &Expr) -> Result<Value, InterpError> {
        let (name, off, ty) = self.place(e)?;
        if ty.is_array() {
            return Err(InterpError::Unsupported("array value".into()));
        }
        Ok(self.lookup(&name)?.cells[off])
    }

    fn store(&mut self, e: &Expr, v: Value) -> Result<Value, InterpError> {
        let (name, off, ty) = self.place(e)?;
        let v = v.convert(&ty)?;
        self.lookup(&name)?.cells[off] = v;
        Ok(v)
    }

    fn static_type(&mut self, e: &Expr) -> Result<Type, InterpError> {
        match &e.kind {
            ExprKind::Ident(_) | ExprKind::Index(..) => {
                let saved = self.steps;
                let (_, _, t) = self.place(e)?;
                self.steps = saved;
                Ok(t)
            }
            _ => Err(InterpError::Unsupported("lvalue form".into())),
        }
    }

    pub fn eval(&mut self, e: &Expr) -> Result<Value, InterpError> {
        match &e.kind {
            ExprKind::IntLit(v, k) => Ok(Value::Int(*v as i128, *k)),
            ExprKind::FloatLit(v, single) => Ok(if *single {
                Value::Float(*v)
            } else {
                Value::Double(*v)
            }),
            ExprKind::Ident(_) | ExprKind::Index(..) => self.load(e),
            ExprKind::Unary(op, x) => {
                let v = self.eval(x)?;
                match op {
                    UnOp::Not => Ok(Value::int(!v.truthy() as i64)),
                    UnOp::Plus => v.convert(&promote(&v.ty())),
                    UnOp::Neg => match v {
                        Value::Int(i, k) => Ok(Value::Int(k.promote().wrap(-i), k.promote())),
                        Value::Float(f) => Ok(Value::Float(-f)),
                        Value::Double(f) => Ok(Value::Double(-f)),
                        Value::Void => Err(InterpError::Unsupported("void".into())),
                    },
                    UnOp::BitNot => match v {
                        Value::Int(i, k) => Ok(Value::Int(k.promote().wrap(!i), k.promote())),
                        _ => Err(InterpError::Undefined("~ on non-integer".into())),
                    },
                    UnOp::Deref | UnOp::AddrOf => Err(InterpError::Unsupported("pointers".into())),
                }
            }
            ExprKind::Binary(BinOp::LogAnd, a, b) => {
                let r = self.eval(a)?.truthy() && self.eval(b)?.truthy();
                Ok(Value::int(r as i64))
            }
            ExprKind::Binary(BinOp::LogOr, a, b) => {
                let r = self.eval(a)?.truthy() || self.eval(b)?.truthy();
                Ok(Value::int(r as i64))
            }
            ExprKind::Binary(op, a, b) => {
                let x = self.eval(a)?;
                let y = self.eval(b)?;
                arith(*op, x, y)
            }
            ExprKind::Assign(op, l, r) => {
                let rv = self.eval(r)?;
                match op {
                    None => self.store(l, rv),
                    Some(op) => {
                        let cur = self.load(l)?;
                        let res = arith(*op, cur, rv)?;
                        self.store(l, res)
                    }
                }
            }
            ExprKind::IncDec {
                prefix,
                increment,
                expr,
            } => {
                let cur = self.load(expr)?;
                let one = Value::int(1);
                let op = if *increment { BinOp::Add } else { BinOp::Sub };
                let new = self.store(expr, arith(op, cur, one)?)?;
                Ok(if *prefix { new } else { cur })
            }
            ExprKind::Cond(c, t, f) => {
                let tt = self.type_hint(t);
                let tf = self.type_hint(f);
                let v = if self.eval(c)?.truthy() {
                    self.eval(t)?
                } else {
                    self.eval(f)?
                };
                match (tt, tf) {
                    (Some(a), Some(b)) if a.is_arithmetic() && b.is_arithmetic() => {
                        v.convert(&usual_arithmetic(&a, &b))
                    }
                    _ => Ok(v),
                }
            }
            ExprKind::Call(name, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a)?);
                }
                self.call(name, &vals)
            }
            ExprKind::Cast(ty, x) => {
                let v = self.eval(x)?;
                v.convert(ty)
            }
            ExprKind::SizeofType(_) | ExprKind::SizeofExpr(_) => {
                Err(InterpError::Unsupported("sizeof".into()))
            }
            ExprKind::StrLit(_) | ExprKind::Member { .. } => {
                Err(InterpError::Unsupported("strings and records".into()))
            }
        }
    }

    /// Static type of an expression without evaluating it, when cheaply known.
    fn type_hint(&mut self, e: &Expr) -> Option<Type> {
        match &e.kind {
            ExprKind::IntLit(_, k) => Some(Type::Int(*k)),
            ExprKind::FloatLit(_, s) => Some(if *s { Type::Float } else { Type::Double }),
            ExprKind::Ident(_) | ExprKind::Index(..) => self.static_type(e).ok(),
            ExprKind::Cast(t, _) => Some(t.clone()),
            ExprKind::Unary(UnOp::Not, _) => Some(Type::INT),
            ExprKind::Unary(_, x) => self.type_hint(x).map(|t| promote(&t)),
            ExprKind::Binary(op, a, b) => {
                if op.is_comparison() || op.is_logical() {
                    return Some(Type::INT);
                }
                let ta = self.type_hint(a)?;
                let tb = self.type_hint(b)?;
                Some(match op {
                    BinOp::Shl | BinOp::Shr => promote(&ta),
                    _ => usual_arithmetic(&ta, &tb),
                })
            }
            ExprKind::Assign(_, l, _) | ExprKind::IncDec { expr: l, .. } => self.type_hint(l),
            ExprKind::Call(n, _) => self.ast.function(n).map(|f| f.sig.ret.clone()),
            ExprKind::Cond(_, t, f) => {
                let a = self.type_hint(t)?;
                let b = self.type_hint(f)?;
                Some(usual_arithmetic(&a, &b))
            }
            _ => None,
        }
    }
}

fn promote(t: &Type) -> Type {
    crate::frontend::typeck::promote(t)
}

/// Applies a non-logical binary operator with C conversion rules.
pub fn arith(op: BinOp, x: Value, y: Value) -> Result<Value, InterpError> {
    if matches!(op, BinOp::Shl | BinOp::Shr) {
        let (Value::Int(a, ka), Value::Int(b, _)) = (x, y) else {
            return Err(InterpError::Undefined("shift of non-integer".into()));
        };
        let k = ka.promote();
        if b < 0 || b >= k.bits() as i128 {
            return Err(InterpError::Undefined(format!("shift by {b}")));
        }
        let a = k.wrap(a);
        let r = if op == BinOp::Shl { a << b } else { a >> b };
        return Ok(Value::Int(k.wrap(r), k));
    }
    let ct = usual_arithmetic(&x.ty(), &y.ty());
    let cmp = |o: std::cmp::Ordering| -> bool {
        use std::cmp::Ordering::*;
        match op {
            BinOp::Lt => o == Less,
            BinOp::Gt => o == Greater,
            BinOp::Le => o != Greater,
            BinOp::Ge => o != Less,
            BinOp::Eq => o == Equal,
            _ => o != Equal,
        }
    };
    match ct {
        Type::Int(k) => {
            let (Value::Int(a, _), Value::Int(b, _)) = (x.convert(&ct)?, y.convert(&ct)?) else {
                unreachable!()
            };
            if op.is_comparison() {
                return Ok(Value::int(cmp(a.cmp(&b)) as i64));
            }
            let r = match op {
                BinOp::Add => a.wrapping_add(b),
                BinOp::Sub => a.wrapping_sub(b),
                BinOp::Mul => a.wrapping_mul(b),
                BinOp::Div | BinOp::Rem => {
                    if b == 0 {
                        return Err(InterpError::Undefined("division by zero".into()));
                    }
                    if op == BinOp::Div {
                        a / b
                    } else {
                        a % b
                    }
                }
                BinOp::BitAnd => a & b,
                BinOp::BitOr => a | b,
                BinOp::BitXor => a ^ b,
                _ => unreachable!(),
            };
            Ok(Value::Int(k.wrap(r), k))
        }
        _ => {
            let a = x.convert(&ct)?.as_f64();
            let b = y.convert(&ct)?.as_f64();
            if op.is_comparison() {
                let r = match a.partial_cmp(&b) {
                    Some(o) => cmp(o),
                    None => op == BinOp::Ne,
                };
                return Ok(Value::int(r as i64));
            }
            let r = match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                _ => return Err(InterpError::Undefined("integer operator on floating values".into())),
            };
            Value::Double(r).convert(&ct)
        }
    }
}

/// Convenience: runs `name` in a fresh interpreter.
pub fn run_function(ast: &Ast, name: &str, args: &[Value], limit: u64) -> Result<Outcome, InterpError> {
    Interpreter::new(ast, limit)?.run(name, args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    fn run(src: &str, args: &[i64]) -> Result<Outcome, InterpError> {
        let ast = parse_source(src).unwrap();
        let args: Vec<Value> = args.iter().map(|a| Value::int(*a)).collect();
        run_function(&ast, "f", &args, 1_000_000)
    }

    #[test]
    fn loops_and_switch() {
        let o = run(
            "int g[4]; int f(int n){ int s = 0; for (int i = 0; i < n; i++) { g[i & 3] += i; if (i == 5) continue; s += i; }\n\
             switch (n) { case 10: s++; case 11: s++; break; default: s = 0; } return s; }",
            &[10],
        )
        .unwrap();
        assert_eq!(o.ret, Value::int(45 - 5 + 2));
        assert_eq!(o.globals[0].1[1], Value::int(1 + 5 + 9));
    }

    #[test]
    fn shadowing_resolves_innermost() {
        let o = run("int f(int a){ int x = 1; { int x = 2; x = x + a; } x = x + 10; return x; }", &[5]).unwrap();
        assert_eq!(o.ret, Value::int(11));
    }

    #[test]
    fn wraps_and_converts() {
        let o = run("int f(int a){ unsigned char c = 250; c += a; short h = 40000; return c + h; }", &[10]).unwrap();
        assert_eq!(o.ret, Value::int(4 + (40000 - 65536)));
        let o = run("int f(int a){ double d = 7; return (int)(d / 2); }", &[0]).unwrap();
        assert_eq!(o.ret, Value::int(3));
    }

    #[test]
    fn step_limit_and_ub() {
        assert_eq!(run("int f(int a){ while (1) a++; }", &[0]), Err(InterpError::StepLimit));
        assert!(matches!(run("int f(int a){ return 1 / a; }", &[0]), Err(InterpError::Undefined(_))));
    }
}
