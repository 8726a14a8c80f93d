//! Control-flow graphs. Function bodies are first lowered to a flat list of
//! statements, labels and jumps; basic blocks are then cut at jump targets
//! and after every jump or return.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::printer::{print_decl, print_expr};
use super::FrontendError;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JumpCond {
    Always,
    IfZero,
    IfNonZero,
    IfEqual(i64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IrItem {
    Stmt(String),
    /// Evaluates a condition or switch value feeding the next jump.
    Eval(String),
    Label(String),
    Jump {
        target: String,
        cond: JumpCond,
        back: bool,
    },
    Return(String),
}

/// Break and continue destinations visible at a point of the lowering.
#[derive(Clone, Debug, Default)]
pub struct JumpScope {
    pub break_target: Option<String>,
    pub continue_target: Option<String>,
}

/// Lowers structured statements into [`IrItem`]s with generated label names.
pub struct Lowerer {
    pub items: Vec<IrItem>,
    prefix: String,
    next: usize,
    scopes: Vec<JumpScope>,
}

impl Lowerer {
    pub fn new(prefix: &str) -> Lowerer {
        Lowerer {
            items: Vec::new(),
            prefix: prefix.to_string(),
            next: 0,
            scopes: Vec::new(),
        }
    }

    /// Starts inside an enclosing loop or switch whose labels are already known.
    pub fn with_scope(prefix: &str, scope: JumpScope) -> Lowerer {
        let mut l = Lowerer::new(prefix);
        l.scopes.push(scope);
        l
    }

    fn fresh(&mut self, kind: &str) -> String {
        self.next += 1;
        format!("{}{}_{kind}", self.prefix, self.next)
    }

    fn jump(&mut self, target: &str, cond: JumpCond, back: bool) {
        self.items.push(IrItem::Jump {
            target: target.to_string(),
            cond,
            back,
        });
    }

    fn label(&mut self, name: &str) {
        self.items.push(IrItem::Label(name.to_string()));
    }

    fn break_target(&self) -> Option<String> {
        self.scopes.iter().rev().find_map(|s| s.break_target.clone())
    }

    fn continue_target(&self) -> Option<String> {
        self.scopes.iter().rev().find_map(|s| s.continue_target.clone())
    }

    pub fn lower_all(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            self.lower(s);
        }
    }

    pub fn lower(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Expr(e) => self.items.push(IrItem::Stmt(format!("{};", print_expr(e)))),
            StmtKind::Decl(ds) => self.items.push(IrItem::Stmt(print_decl(ds))),
            StmtKind::Blank => {}
            StmtKind::Goto(l) => self.jump(&user_label(l), JumpCond::Always, false),
            StmtKind::Labeled(l, inner) => {
                self.label(&user_label(l));
                self.lower(inner);
            }
            StmtKind::Block(b) => self.lower_all(&b.items),
            StmtKind::Break => {
                let t = self.break_target().unwrap_or_else(|| "<no-loop>".into());
                self.jump(&t, JumpCond::Always, false);
            }
            StmtKind::Continue => {
                let t = self.continue_target().unwrap_or_else(|| "<no-loop>".into());
                self.jump(&t, JumpCond::Always, false);
            }
            StmtKind::Return(e) => self.items.push(IrItem::Return(match e {
                Some(e) => format!("return {};", print_expr(e)),
                None => "return;".into(),
            })),
            StmtKind::If { cond, then, els } => {
                self.items.push(IrItem::Eval(print_expr(cond)));
                match els {
                    None => {
                        let endif = self.fresh("endif");
                        self.jump(&endif, JumpCond::IfZero, false);
                        self.lower(then);
                        self.label(&endif);
                    }
                    Some(e) => {
                        let else_l = self.fresh("else");
                        let endif = self.fresh("endif");
                        self.jump(&else_l, JumpCond::IfZero, false);
                        self.lower(then);
                        self.jump(&endif, JumpCond::Always, false);
                        self.label(&else_l);
                        self.lower(e);
                        self.label(&endif);
                    }
                }
            }
            StmtKind::While { cond, body } => {
                let head = self.fresh("body");
                let end = self.fresh("end");
                self.label(&head);
                self.items.push(IrItem::Eval(print_expr(cond)));
                self.jump(&end, JumpCond::IfZero, false);
                self.scoped(&end, Some(&head), body);
                self.jump(&head, JumpCond::Always, true);
                self.label(&end);
            }
            StmtKind::DoWhile { body, cond } => {
                let head = self.fresh("body");
                let end = self.fresh("end");
                let cont = has_own_continue(body).then(|| self.fresh("cont"));
                self.label(&head);
                self.scoped(&end, Some(cont.as_deref().unwrap_or(&head)), body);
                if let Some(c) = &cont {
                    self.label(c);
                }
                self.items.push(IrItem::Eval(print_expr(cond)));
                self.jump(&head, JumpCond::IfNonZero, true);
                self.label(&end);
            }
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => {
                self.lower(init);
                let head = self.fresh("body");
                let end = self.fresh("end");
                let cont = has_own_continue(body).then(|| self.fresh("cont"));
                self.label(&head);
                let c = cond.as_ref().map(print_expr).unwrap_or_else(|| "1".into());
                self.items.push(IrItem::Eval(c));
                self.jump(&end, JumpCond::IfZero, false);
                self.scoped(&end, Some(cont.as_deref().unwrap_or(&head)), body);
                if let Some(c) = &cont {
                    self.label(c);
                }
                if let Some(st) = step {
                    self.items.push(IrItem::Stmt(format!("{};", print_expr(st))));
                }
                self.jump(&head, JumpCond::Always, true);
                self.label(&end);
            }
            StmtKind::Switch { cond, cases } => {
                self.items.push(IrItem::Eval(print_expr(cond)));
                let names: Vec<String> = cases
                    .iter()
                    .enumerate()
                    .map(|(i, c)| match c.label {
                        CaseLabel::Case(_) => self.fresh(&format!("case{i}")),
                        CaseLabel::Default => self.fresh("default"),
                    })
                    .collect();
                let end = self.fresh("end");
                let mut default = None;
                for (c, name) in cases.iter().zip(&names) {
                    match &c.label {
                        CaseLabel::Case(e) => {
                            let v = super::consteval::eval_int(e).unwrap_or(i64::MIN);
                            self.jump(name, JumpCond::IfEqual(v), false);
                        }
                        CaseLabel::Default => default = Some(name.clone()),
                    }
                }
                let fallback = default.unwrap_or_else(|| end.clone());
                self.jump(&fallback, JumpCond::Always, false);
                self.scopes.push(JumpScope {
                    break_target: Some(end.clone()),
                    continue_target: None,
                });
                for (c, name) in cases.iter().zip(&names) {
                    self.label(name);
                    self.lower_all(&c.body);
                }
                self.scopes.pop();
                self.label(&end);
            }
        }
    }

    fn scoped(&mut self, brk: &str, cont: Option<&str>, body: &Stmt) {
        self.scopes.push(JumpScope {
            break_target: Some(brk.to_string()),
            continue_target: cont.map(str::to_string),
        });
        self.lower(body);
        self.scopes.pop();
    }
}

pub fn user_label(name: &str) -> String {
    format!("user:{name}")
}

/// True if `body` contains a `continue` that binds to the loop owning `body`.
pub fn has_own_continue(body: &Stmt) -> bool {
    match &body.kind {
        StmtKind::Continue => true,
        StmtKind::While { .. } | StmtKind::DoWhile { .. } | StmtKind::For { .. } => false,
        _ => body.children().into_iter().any(has_own_continue),
    }
}

/// True if `body` contains a `break` that binds to the loop or switch owning `body`.
pub fn has_own_break(body: &Stmt) -> bool {
    match &body.kind {
        StmtKind::Break => true,
        StmtKind::While { .. }
        | StmtKind::DoWhile { .. }
        | StmtKind::For { .. }
        | StmtKind::Switch { .. } => false,
        _ => body.children().into_iter().any(has_own_break),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Fallthrough,
    BranchTrue,
    BranchFalse,
    SwitchCase,
    Back,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicBlock {
    pub id: usize,
    pub stmts: Vec<String>,
    pub dead: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cfg {
    pub nodes: Vec<BasicBlock>,
    pub edges: Vec<Edge>,
    pub entry: usize,
    pub exit: usize,
}

impl Cfg {
    pub fn successors(&self, n: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.src == n)
    }

    pub fn predecessors(&self, n: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.dst == n)
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    pub fn branch_edges(&self) -> usize {
        self.count_edges(EdgeKind::BranchTrue)
            + self.count_edges(EdgeKind::BranchFalse)
            + self.count_edges(EdgeKind::SwitchCase)
    }

    pub fn back_edges(&self) -> usize {
        self.count_edges(EdgeKind::Back)
    }
}

pub fn build_cfg(f: &FunctionDef) -> Result<Cfg, FrontendError> {
    let mut l = Lowerer::new("L");
    l.lower_all(&f.body.items);
    cfg_from_ir(&l.items)
}

/// Cuts a lowered body into basic blocks.
pub fn cfg_from_ir(items: &[IrItem]) -> Result<Cfg, FrontendError> {
    let defined: HashSet<&str> = items
        .iter()
        .filter_map(|i| match i {
            IrItem::Label(l) => Some(l.as_str()),
            _ => None,
        })
        .collect();
    let mut targets = HashSet::new();
    for i in items {
        if let IrItem::Jump { target, .. } = i {
            if !defined.contains(target.as_str()) {
                let name = target.strip_prefix("user:").unwrap_or(target);
                return Err(FrontendError::UnresolvedLabel(name.to_string()));
            }
            targets.insert(target.as_str());
        }
    }

    // (stmts, terminator) per block, and the block each target label starts
    let mut blocks: Vec<(Vec<String>, Option<&IrItem>)> = vec![(Vec::new(), None)];
    let mut label_block: HashMap<&str, usize> = HashMap::new();
    let mut open = true;
    for item in items {
        match item {
            IrItem::Label(l) if targets.contains(l.as_str()) => {
                let cur = blocks.len() - 1;
                // an empty, still-open block can carry the label itself
                let reusable = open && blocks[cur].0.is_empty() && blocks[cur].1.is_none();
                if !reusable {
                    blocks.push((Vec::new(), None));
                }
                label_block.insert(l, blocks.len() - 1);
                open = true;
            }
            IrItem::Label(_) => {}
            IrItem::Stmt(s) | IrItem::Eval(s) => {
                if !open {
                    blocks.push((Vec::new(), None));
                    open = true;
                }
                let text = match item {
                    IrItem::Eval(_) => format!("cond: {s}"),
                    _ => s.clone(),
                };
                blocks.last_mut().unwrap().0.push(text);
            }
            IrItem::Jump { .. } | IrItem::Return(_) => {
                if !open {
                    blocks.push((Vec::new(), None));
                }
                let last = blocks.last_mut().unwrap();
                if let IrItem::Return(r) = item {
                    last.0.push(r.clone());
                }
                last.1 = Some(item);
                open = false;
            }
        }
    }

    if label_block.values().any(|&b| b == 0) {
        // the first block is a jump target: give the graph a clean entry
        blocks.insert(0, (Vec::new(), None));
        for v in label_block.values_mut() {
            *v += 1;
        }
    }

    let n = blocks.len();
    let mut edges = Vec::new();
    for (i, (_, term)) in blocks.iter().enumerate() {
        let next = (i + 1 < n).then_some(i + 1);
        match term {
            None => {
                if let Some(nx) = next {
                    edges.push(Edge { src: i, dst: nx, kind: EdgeKind::Fallthrough });
                }
            }
            Some(IrItem::Return(_)) => {}
            Some(IrItem::Jump { target, cond, back }) => {
                let dst = label_block[target.as_str()];
                let (taken, fall) = match cond {
                    JumpCond::Always => (EdgeKind::Fallthrough, None),
                    JumpCond::IfZero => (EdgeKind::BranchFalse, Some(EdgeKind::BranchTrue)),
                    JumpCond::IfNonZero => (EdgeKind::BranchTrue, Some(EdgeKind::BranchFalse)),
                    JumpCond::IfEqual(_) => (EdgeKind::SwitchCase, Some(EdgeKind::Fallthrough)),
                };
                let taken = if *back { EdgeKind::Back } else { taken };
                edges.push(Edge { src: i, dst, kind: taken });
                if let (Some(k), Some(nx)) = (fall, next) {
                    edges.push(Edge { src: i, dst: nx, kind: k });
                }
            }
            Some(_) => unreachable!(),
        }
    }

    let mut reachable = vec![false; n];
    let mut queue = VecDeque::from([0]);
    reachable[0] = true;
    while let Some(b) = queue.pop_front() {
        for e in edges.iter().filter(|e| e.src == b) {
            if !reachable[e.dst] {
                reachable[e.dst] = true;
                queue.push_back(e.dst);
            }
        }
    }
    let nodes = blocks
        .into_iter()
        .enumerate()
        .map(|(id, (stmts, _))| BasicBlock {
            id,
            stmts,
            dead: !reachable[id],
        })
        .collect();
    Ok(Cfg {
        nodes,
        edges,
        entry: 0,
        exit: n - 1,
    })
}

/// Rooted, edge-ordered isomorphism: a bijection from `a` to `b` fixing the
/// entries that preserves block contents, edge kinds and edge order.
pub fn isomorphic(a: &Cfg, b: &Cfg) -> bool {
    if a.nodes.len() != b.nodes.len() || a.edges.len() != b.edges.len() {
        return false;
    }
    let mut map: HashMap<usize, usize> = HashMap::new();
    let mut used: HashSet<usize> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut pair = |x: usize, y: usize, map: &mut HashMap<usize, usize>, queue: &mut VecDeque<(usize, usize)>| {
        match map.get(&x) {
            Some(&m) => m == y,
            None => {
                if !used.insert(y) {
                    return false;
                }
                map.insert(x, y);
                queue.push_back((x, y));
                true
            }
        }
    };
    if !pair(a.entry, b.entry, &mut map, &mut queue) {
        return false;
    }
    // dead blocks are matched by position among the dead
    let dead_a: Vec<usize> = a.nodes.iter().filter(|n| n.dead).map(|n| n.id).collect();
    let dead_b: Vec<usize> = b.nodes.iter().filter(|n| n.dead).map(|n| n.id).collect();
    if dead_a.len() != dead_b.len() {
        return false;
    }
    for (x, y) in dead_a.iter().zip(&dead_b) {
        if !pair(*x, *y, &mut map, &mut queue) {
            return false;
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        if a.nodes[x].stmts != b.nodes[y].stmts {
            return false;
        }
        let sa: Vec<&Edge> = a.successors(x).collect();
        let sb: Vec<&Edge> = b.successors(y).collect();
        if sa.len() != sb.len() {
            return false;
        }
        for (ea, eb) in sa.iter().zip(&sb) {
            if ea.kind != eb.kind || !pair(ea.dst, eb.dst, &mut map, &mut queue) {
                return false;
            }
        }
    }
    map.len() == a.nodes.len() && map.get(&a.exit) == Some(&b.exit)
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_source;
    use super::*;

    fn cfg(src: &str) -> Cfg {
        let ast = parse_source(src).unwrap();
        let g = build_cfg(ast.functions().next().unwrap()).unwrap();
        g
    }

    #[test]
    fn straight_line_is_one_block() {
        let g = cfg("int a,b,c; void f(){ a = 1; b = 2; c = 3; }");
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.branch_edges(), 0);
        assert_eq!(g.nodes[0].stmts.len(), 3);
    }

    #[test]
    fn if_else_diamond() {
        let g = cfg("int f(int x){ int r; if (x) r = 1; else r = 2; }");
        assert_eq!(g.nodes.len(), 4);
        assert_eq!(g.edges.len(), 4);
        assert_eq!(g.count_edges(EdgeKind::BranchTrue), 1);
        assert_eq!(g.count_edges(EdgeKind::BranchFalse), 1);
        assert!(g.predecessors(g.entry).next().is_none());
        assert_eq!(g.predecessors(g.exit).count(), 2);
    }

    #[test]
    fn while_has_back_edge_into_condition() {
        let g = cfg("int f(int n){ int i = 0; while (i < n) i++; return i; }");
        assert_eq!(g.back_edges(), 1);
        let back = g.edges.iter().find(|e| e.kind == EdgeKind::Back).unwrap();
        assert_eq!(g.nodes[back.dst].stmts, vec!["cond: i < n".to_string()]);
        assert!(back.src > back.dst);
    }

    #[test]
    fn loop_at_start_gets_fresh_entry() {
        let g = cfg("int f(int n){ while (n) n--; return n; }");
        assert!(g.nodes[g.entry].stmts.is_empty());
        assert!(g.predecessors(g.entry).next().is_none());
    }

    #[test]
    fn dead_code_flagged() {
        let g = cfg("int f(){ return 1; f(); }");
        assert!(g.nodes.iter().any(|n| n.dead));
    }

    #[test]
    fn unresolved_goto() {
        let ast = parse_source("int f(){ goto nowhere; }").unwrap();
        assert_eq!(
            build_cfg(ast.functions().next().unwrap()),
            Err(FrontendError::UnresolvedLabel("nowhere".into()))
        );
    }

    #[test]
    fn isomorphism_ignores_label_names_only() {
        let g = cfg("int f(int n){ int s = 0; for (int i = 0; i < n; i++) { if (i) continue; s++; } return s; }");
        assert!(isomorphic(&g, &g));
        let h = cfg("int f(int n){ int s = 0; for (int i = 0; i < n; i++) { if (i) break; s++; } return s; }");
        assert!(!isomorphic(&g, &h));
    }
}
