use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::frontend::ast::*;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenameEntry {
    /// Child indices from the function scope down to the declaring scope.
    pub scope_path: Vec<usize>,
    pub original: String,
    pub fresh: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenameMap {
    pub entries: Vec<RenameEntry>,
}

impl RenameMap {
    pub fn fresh_names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.fresh.as_str()).collect()
    }

    pub fn lookup(&self, original: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.original == original)
            .map(|e| e.fresh.as_str())
            .collect()
    }
}

struct Scope {
    path: Vec<usize>,
    names: HashMap<String, String>,
    children: usize,
}

struct Renamer {
    scopes: Vec<Scope>,
    reserved: HashSet<String>,
    used: HashSet<String>,
    ordinal: usize,
    map: RenameMap,
}

impl Renamer {
    fn push(&mut self) {
        let path = match self.scopes.last_mut() {
            Some(parent) => {
                let mut p = parent.path.clone();
                p.push(parent.children);
                parent.children += 1;
                p
            }
            None => Vec::new(),
        };
        self.scopes.push(Scope {
            path,
            names: HashMap::new(),
            children: 0,
        });
    }

    fn pop(&mut self) {
        self.scopes.pop();
    }

    fn declare(&mut self, name: &str) -> String {
        self.ordinal += 1;
        let mut fresh = format!("{name}__{}", self.ordinal);
        while self.reserved.contains(&fresh) || self.used.contains(&fresh) {
            fresh.push('_');
        }
        self.used.insert(fresh.clone());
        let scope = self.scopes.last_mut().expect("scope");
        scope.names.insert(name.to_string(), fresh.clone());
        self.map.entries.push(RenameEntry {
            scope_path: scope.path.clone(),
            original: name.to_string(),
            fresh: fresh.clone(),
        });
        fresh
    }

    fn resolve(&self, name: &str) -> Option<&String> {
        self.scopes.iter().rev().find_map(|s| s.names.get(name))
    }

    fn expr(&self, e: &mut Expr) {
        e.walk_mut(&mut |x| {
            if let ExprKind::Ident(n) = &mut x.kind {
                if let Some(f) = self.resolve(n) {
                    *n = f.clone();
                }
            }
        });
    }

    fn init(&self, i: &mut Initializer) {
        match i {
            Initializer::Expr(e) => self.expr(e),
            Initializer::List(items, _) => items.iter_mut().for_each(|x| self.init(x)),
        }
    }

    fn items(&mut self, items: &mut [Stmt]) {
        for s in items {
            self.stmt(s);
        }
    }

    /// A statement in a position that opens its own scope (loop and if bodies).
    fn scoped(&mut self, s: &mut Stmt) {
        self.push();
        self.stmt(s);
        self.pop();
    }

    fn stmt(&mut self, s: &mut Stmt) {
        match &mut s.kind {
            StmtKind::Expr(e) => self.expr(e),
            StmtKind::Decl(ds) => {
                for d in ds {
                    d.name = self.declare(&d.name);
                    if let Some(i) = &mut d.init {
                        self.init(i);
                    }
                }
            }
            StmtKind::Labeled(_, inner) => self.stmt(inner),
            StmtKind::Block(b) => {
                self.push();
                self.items(&mut b.items);
                self.pop();
            }
            StmtKind::If { cond, then, els } => {
                self.expr(cond);
                self.scoped(then);
                if let Some(e) = els {
                    self.scoped(e);
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond);
                self.scoped(body);
            }
            StmtKind::DoWhile { body, cond } => {
                self.scoped(body);
                self.expr(cond);
            }
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => {
                self.push();
                self.stmt(init);
                if let Some(c) = cond {
                    self.expr(c);
                }
                if let Some(st) = step {
                    self.expr(st);
                }
                self.scoped(body);
                self.pop();
            }
            StmtKind::Switch { cond, cases } => {
                self.expr(cond);
                self.push();
                for c in cases {
                    for st in &mut c.body {
                        self.stmt(st);
                    }
                }
                self.pop();
            }
            StmtKind::Return(Some(e)) => self.expr(e),
            StmtKind::Goto(_)
            | StmtKind::Blank
            | StmtKind::Break
            | StmtKind::Continue
            | StmtKind::Return(None) => {}
        }
    }
}

/// Gives every parameter and local a function-unique name `<orig>__<n>`,
/// `n` being the declaration's preorder ordinal (parameters first).
/// `reserved` lists names the fresh names must avoid (globals, functions).
pub fn rename_variables_avoiding(f: &FunctionDef, reserved: &HashSet<String>) -> (FunctionDef, RenameMap) {
    let mut out = f.clone();
    let mut r = Renamer {
        scopes: Vec::new(),
        reserved: reserved.clone(),
        used: HashSet::new(),
        ordinal: 0,
        map: RenameMap::default(),
    };
    r.push();
    for p in &mut out.sig.params {
        p.name = r.declare(&p.name);
    }
    // parameters and the outermost block share one scope
    r.items(&mut out.body.items);
    r.pop();
    (out, r.map)
}

/// [`rename_variables_avoiding`] with globals and function names of `ast` reserved.
pub fn rename_in(ast: &Ast, f: &FunctionDef) -> (FunctionDef, RenameMap) {
    let mut reserved: HashSet<String> = ast.globals().map(|g| g.name.clone()).collect();
    reserved.extend(ast.signatures().into_iter().map(|s| s.name));
    rename_variables_avoiding(f, &reserved)
}

pub fn rename_variables(f: &FunctionDef) -> (FunctionDef, RenameMap) {
    rename_variables_avoiding(f, &HashSet::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_source, print_function};
    use crate::interp::{run_function, Value};

    #[test]
    fn shadowed_names_get_ordinals() {
        let ast = parse_source("int f(){ int x; { int x; x = 1; } x = 2; return x; }").unwrap();
        let (g, map) = rename_in(&ast, ast.function("f").unwrap());
        let text = print_function(&g);
        assert!(text.contains("x__2 = 1;"), "{text}");
        assert!(text.contains("x__1 = 2;"), "{text}");
        assert_eq!(map.entries.len(), 2);
        assert_eq!(map.entries[0].scope_path, Vec::<usize>::new());
        assert_eq!(map.entries[1].scope_path, vec![0]);
    }

    #[test]
    fn globals_are_not_captured() {
        let ast = parse_source("int x__1; int f(int x){ return x + x__1; }").unwrap();
        let (g, _) = rename_in(&ast, ast.function("f").unwrap());
        let text = print_function(&g);
        assert!(text.contains("x__1_ + x__1"), "{text}");
    }

    #[test]
    fn behaviour_is_preserved() {
        let src = "int g; int f(int a){ int s = a; for (int i = 0; i < 3; i++) { int s = i * 2; g += s; }\n\
                   { int a = 7; s += a; } return s; }";
        let ast = parse_source(src).unwrap();
        let (g, _) = rename_in(&ast, ast.function("f").unwrap());
        let mut renamed = ast.clone();
        for it in &mut renamed.items {
            if let Item::Function(f) = it {
                *f = g.clone();
            }
        }
        for a in [-3, 0, 11] {
            let x = run_function(&ast, "f", &[Value::int(a)], 10_000).unwrap();
            let y = run_function(&renamed, "f", &[Value::int(a)], 10_000).unwrap();
            assert_eq!(x.ret, y.ret);
            assert_eq!(x.globals, y.globals);
        }
    }
}
