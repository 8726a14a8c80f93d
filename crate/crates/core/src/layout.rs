//! Sizes, alignments and member offsets under the System V AMD64 rules,
//! plus a cross-check against the system C compiler.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::frontend::ast::{Ast, FunctionDef, RecordDef, StmtKind};
use crate::frontend::types::{RecordKind, Type};
use crate::toolchain::{run_with_timeout, ExitState, Toolchain};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberLayout {
    pub name: String,
    pub offset: u64,
    pub layout: TypeLayout,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeLayout {
    /// C spelling of the type, usable inside `sizeof(...)`.
    pub name: String,
    pub size: u64,
    pub align: u64,
    pub members: Vec<MemberLayout>,
    pub element: Option<(Box<TypeLayout>, u64)>,
}

impl TypeLayout {
    fn scalar(name: &str, size: u64) -> TypeLayout {
        TypeLayout {
            name: name.to_string(),
            size,
            align: size,
            members: Vec::new(),
            element: None,
        }
    }

    /// Structural invariants; returns a description of each one broken.
    pub fn invariant_violations(&self, is_union: bool) -> Vec<String> {
        let mut v = Vec::new();
        if self.align == 0 || self.size % self.align != 0 {
            v.push(format!("{}: size {} not a multiple of align {}", self.name, self.size, self.align));
        }
        let mut end = 0;
        let mut prev = 0;
        for m in &self.members {
            if m.offset % m.layout.align != 0 {
                v.push(format!("{}.{}: misaligned offset {}", self.name, m.name, m.offset));
            }
            if is_union && m.offset != 0 {
                v.push(format!("{}.{}: union member at {}", self.name, m.name, m.offset));
            }
            if !is_union {
                if m.offset < prev {
                    v.push(format!("{}.{}: offsets decrease", self.name, m.name));
                }
                if m.offset < end {
                    v.push(format!("{}.{}: overlaps previous member", self.name, m.name));
                }
            }
            prev = m.offset;
            end = end.max(m.offset + m.layout.size);
            if m.offset + m.layout.size > self.size {
                v.push(format!("{}.{}: extends past the end", self.name, m.name));
            }
        }
        if let Some((e, n)) = &self.element {
            if e.size * n != self.size {
                v.push(format!("{}: array size {} != {} x {}", self.name, self.size, e.size, n));
            }
        }
        v
    }

    /// Every layout reachable from this one, outermost first.
    pub fn walk(&self, out: &mut Vec<TypeLayout>) {
        out.push(self.clone());
        for m in &self.members {
            m.layout.walk(out);
        }
        if let Some((e, _)) = &self.element {
            e.walk(out);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("type `{0}` contains itself")]
    RecursiveType(String),
    #[error("layout oracle unavailable: {0}")]
    OracleUnavailable(String),
}

fn align_up(x: u64, a: u64) -> u64 {
    x.div_ceil(a) * a
}

#[derive(Clone, Debug, Default)]
pub struct LayoutEngine {
    records: HashMap<String, RecordDef>,
    cache: RefCell<HashMap<String, TypeLayout>>,
}

impl LayoutEngine {
    pub fn new<'a>(records: impl IntoIterator<Item = &'a RecordDef>) -> LayoutEngine {
        LayoutEngine {
            records: records.into_iter().map(|r| (r.tag.clone(), r.clone())).collect(),
            cache: RefCell::default(),
        }
    }

    pub fn from_ast(ast: &Ast) -> LayoutEngine {
        LayoutEngine::new(ast.records())
    }

    pub fn record(&self, tag: &str) -> Option<&RecordDef> {
        self.records.get(tag)
    }

    pub fn compute_layout(&self, ty: &Type) -> Result<TypeLayout, LayoutError> {
        self.layout(ty, &mut HashSet::new())
    }

    fn layout(&self, ty: &Type, open: &mut HashSet<String>) -> Result<TypeLayout, LayoutError> {
        let name = ty.declare("");
        match ty {
            Type::Int(k) => Ok(TypeLayout::scalar(&name, k.size())),
            Type::Float => Ok(TypeLayout::scalar(&name, 4)),
            Type::Double | Type::Pointer(_) => Ok(TypeLayout::scalar(&name, 8)),
            Type::Void => Err(LayoutError::UnknownType(name)),
            Type::Array(_, None) => Err(LayoutError::UnknownType(name)),
            Type::Array(elem, Some(n)) => {
                let e = self.layout(elem, open)?;
                Ok(TypeLayout {
                    name,
                    size: e.size * n,
                    align: e.align,
                    members: Vec::new(),
                    element: Some((Box::new(e), *n)),
                })
            }
            Type::Record(kind, tag) => {
                if let Some(l) = self.cache.borrow().get(tag) {
                    return Ok(l.clone());
                }
                let def = self.records.get(tag).ok_or_else(|| LayoutError::UnknownType(name.clone()))?;
                if !open.insert(tag.clone()) {
                    return Err(LayoutError::RecursiveType(name));
                }
                let mut members = Vec::new();
                let (mut size, mut align) = (0u64, 1u64);
                for f in &def.fields {
                    let l = self.layout(&f.ty, open)?;
                    let offset = match kind {
                        RecordKind::Struct => align_up(size, l.align),
                        RecordKind::Union => 0,
                    };
                    size = size.max(offset + l.size);
                    align = align.max(l.align);
                    members.push(MemberLayout {
                        name: f.name.clone(),
                        offset,
                        layout: l,
                    });
                }
                open.remove(tag);
                let out = TypeLayout {
                    name,
                    size: align_up(size, align),
                    align,
                    members,
                    element: None,
                };
                self.cache.borrow_mut().insert(tag.clone(), out.clone());
                Ok(out)
            }
        }
    }

    /// Layouts of every parameter, local and return type of `f`, keyed by type name.
    pub fn layouts_for_function(&self, f: &FunctionDef) -> Result<BTreeMap<String, TypeLayout>, LayoutError> {
        let mut tys: Vec<Type> = f.sig.params.iter().map(|p| p.ty.clone()).collect();
        if f.sig.ret != Type::Void {
            tys.push(f.sig.ret.clone());
        }
        for s in &f.body.items {
            s.walk(&mut |st| {
                if let StmtKind::Decl(ds) = &st.kind {
                    tys.extend(ds.iter().map(|d| d.ty.clone()));
                }
            });
        }
        let mut out = BTreeMap::new();
        for t in tys {
            let l = self.compute_layout(&t)?;
            out.insert(l.name.clone(), l);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub key: String,
    pub computed: u64,
    pub oracle: Option<u64>,
}

/// Source of ground-truth `size:`, `align:` and `offset:` facts.
pub trait LayoutOracle {
    fn facts(&self, layouts: &[TypeLayout]) -> Result<HashMap<String, u64>, LayoutError>;
}

fn expected_facts(layouts: &[TypeLayout]) -> Vec<(String, u64)> {
    let mut all = Vec::new();
    for l in layouts {
        l.walk(&mut all);
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for l in all {
        if !seen.insert(l.name.clone()) {
            continue;
        }
        out.push((format!("size:{}", l.name), l.size));
        out.push((format!("align:{}", l.name), l.align));
        for m in &l.members {
            out.push((format!("offset:{}.{}", l.name, m.name), m.offset));
        }
    }
    out
}

/// Compares every size, alignment and member offset in `layouts` with the oracle.
pub fn verify_layout_against_oracle(
    layouts: &[TypeLayout],
    oracle: &dyn LayoutOracle,
) -> Result<Vec<Mismatch>, LayoutError> {
    let facts = oracle.facts(layouts)?;
    Ok(expected_facts(layouts)
        .into_iter()
        .filter_map(|(key, computed)| {
            let o = facts.get(&key).copied();
            (o != Some(computed)).then_some(Mismatch { key, computed, oracle: o })
        })
        .collect())
}

/// Compiles a probe program of `sizeof`/`_Alignof`/`offsetof` facts and runs it.
pub struct SystemCompilerOracle {
    pub toolchain: Toolchain,
    pub records: Vec<RecordDef>,
}

impl SystemCompilerOracle {
    /// `records` must be in definition order (members before users).
    pub fn new(records: Vec<RecordDef>) -> Self {
        SystemCompilerOracle {
            toolchain: Toolchain::default(),
            records,
        }
    }

    pub fn probe_source(&self, layouts: &[TypeLayout]) -> String {
        let mut s = String::from("#include <stdio.h>\n#include <stddef.h>\n");
        for r in &self.records {
            let _ = writeln!(s, "{} {} {{", r.kind.keyword(), r.tag);
            for f in &r.fields {
                let _ = writeln!(s, "    {};", f.ty.declare(&f.name));
            }
            s.push_str("};\n");
        }
        s.push_str("int main(void) {\n");
        let mut all = Vec::new();
        for l in layouts {
            l.walk(&mut all);
        }
        let mut seen = HashSet::new();
        for l in all {
            if !seen.insert(l.name.clone()) {
                continue;
            }
            let n = &l.name;
            let _ = writeln!(s, "    printf(\"%s %zu\\n\", \"size:{n}\", sizeof({n}));");
            let _ = writeln!(s, "    printf(\"%s %zu\\n\", \"align:{n}\", _Alignof({n}));");
            for m in &l.members {
                let _ = writeln!(
                    s,
                    "    printf(\"%s %zu\\n\", \"offset:{n}.{m}\", offsetof({n}, {m}));",
                    m = m.name
                );
            }
        }
        s.push_str("    return 0;\n}\n");
        s
    }
}

impl LayoutOracle for SystemCompilerOracle {
    fn facts(&self, layouts: &[TypeLayout]) -> Result<HashMap<String, u64>, LayoutError> {
        let unavailable = |e: String| LayoutError::OracleUnavailable(e);
        let dir = tempfile::tempdir().map_err(|e| unavailable(e.to_string()))?;
        let exe = self
            .toolchain
            .compile_c(&self.probe_source(layouts), dir.path(), "probe", &[])
            .map_err(|e| unavailable(e.to_string()))?;
        let out = run_with_timeout(&exe, &[], std::time::Duration::from_secs(10))
            .map_err(|e| unavailable(e.to_string()))?;
        if out.state != ExitState::Code(0) {
            return Err(unavailable(format!("probe exited with {:?}", out.state)));
        }
        Ok(out
            .stdout
            .lines()
            .filter_map(|line| {
                let (k, v) = line.rsplit_once(' ')?;
                Some((k.to_string(), v.parse().ok()?))
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use crate::frontend::IntKind;

    fn engine(src: &str) -> (Ast, LayoutEngine) {
        let ast = parse_source(src).unwrap();
        let e = LayoutEngine::from_ast(&ast);
        (ast, e)
    }

    #[test]
    fn builtins() {
        let e = LayoutEngine::default();
        let c = e.compute_layout(&Type::Int(IntKind::Char)).unwrap();
        assert_eq!((c.size, c.align), (1, 1));
        let p = e.compute_layout(&Type::pointer_to(Type::Float)).unwrap();
        assert_eq!((p.size, p.align), (8, 8));
        assert!(matches!(e.compute_layout(&Type::Void), Err(LayoutError::UnknownType(_))));
    }

    #[test]
    fn struct_and_union_examples() {
        let (_, e) = engine("struct S { char c; int i; }; union U { char c[3]; long l; };");
        let s = e.compute_layout(&Type::Record(RecordKind::Struct, "S".into())).unwrap();
        assert_eq!((s.size, s.align), (8, 4));
        assert_eq!(s.members.iter().map(|m| m.offset).collect::<Vec<_>>(), vec![0, 4]);
        let u = e.compute_layout(&Type::Record(RecordKind::Union, "U".into())).unwrap();
        assert_eq!((u.size, u.align), (8, 8));
        assert!(s.invariant_violations(false).is_empty());
        assert!(u.invariant_violations(true).is_empty());
    }

    #[test]
    fn self_reference_through_value_is_rejected() {
        let mut rec = parse_source("struct N { int v; struct N *next; };").unwrap();
        let e = LayoutEngine::from_ast(&rec);
        assert!(e.compute_layout(&Type::Record(RecordKind::Struct, "N".into())).is_ok());
        if let crate::frontend::Item::Record(r) = &mut rec.items[0] {
            r.fields[1].ty = Type::Record(RecordKind::Struct, "N".into());
        }
        let e = LayoutEngine::from_ast(&rec);
        assert!(matches!(
            e.compute_layout(&Type::Record(RecordKind::Struct, "N".into())),
            Err(LayoutError::RecursiveType(_))
        ));
        assert!(matches!(
            e.compute_layout(&Type::Record(RecordKind::Struct, "Q".into())),
            Err(LayoutError::UnknownType(_))
        ));
    }

    #[test]
    fn oracle_agrees_and_catches_sabotage() {
        let (ast, e) = engine("struct S { char c; int i; double d[2]; }; union U { char c[3]; long l; struct S s; };");
        let tys = [
            Type::Record(RecordKind::Struct, "S".into()),
            Type::Record(RecordKind::Union, "U".into()),
            Type::array_of(Type::Double, 3),
        ];
        let mut layouts: Vec<TypeLayout> = tys.iter().map(|t| e.compute_layout(t).unwrap()).collect();
        let oracle = SystemCompilerOracle::new(ast.records().cloned().collect());
        assert_eq!(verify_layout_against_oracle(&layouts, &oracle).unwrap(), vec![]);
        layouts[0].members[1].offset = 2;
        let m = verify_layout_against_oracle(&layouts[..1], &oracle).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].key, "offset:struct S.i");
    }

    #[test]
    fn missing_compiler_is_reported() {
        let mut oracle = SystemCompilerOracle::new(Vec::new());
        oracle.toolchain.cc = "/nonexistent/cc".into();
        let l = LayoutEngine::default().compute_layout(&Type::INT).unwrap();
        assert!(matches!(
            verify_layout_against_oracle(&[l], &oracle),
            Err(LayoutError::OracleUnavailable(_))
        ));
    }
}
