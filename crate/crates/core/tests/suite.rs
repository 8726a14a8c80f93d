use legoc_core::frontend::parse_source;
use legoc_core::splitter::{split_parts, AlwaysSplit, PartKind, SplitConfig};
use legoc_core::suite::*;
use legoc_core::toolchain::Toolchain;
use legoc_core::transforms::rename_in;
use legoc_core::verify::Harness;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: &str = include_str!("golden/seed0_budget10.c");

fn toolchain() -> bool {
    Toolchain::default().available()
}

#[test]
fn seed_zero_budget_ten_matches_golden() {
    assert_eq!(gen_subset_program(0, 10), GOLDEN);
}

#[test]
fn dependent_assignment_pair_composes() {
    if !toolchain() {
        return;
    }
    let h = Harness::default();
    let pairs = vec![
        ("a = b + 3;".to_string(), "b = a - 1;".to_string()),
        (";".to_string(), ";".to_string()),
    ];
    assert!(theorem_check_basic_statements(&pairs, &h).unwrap());
}

#[test]
fn random_basic_statement_pairs_compose() {
    if !toolchain() {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pairs: Vec<(String, String)> = (0..60)
        .map(|_| (random_basic_statement(&mut rng), random_basic_statement(&mut rng)))
        .collect();
    assert!(theorem_check_basic_statements(&pairs, &Harness::default()).unwrap());
}

#[test]
fn control_structures_compose() {
    if !toolchain() {
        return;
    }
    assert!(theorem_check_control_structures(&control_fixtures(), &Harness::default()).unwrap());
}

#[test]
fn inner_break_targets_inner_end_label() {
    let fx = control_fixtures().into_iter().find(|f| f.name == "nested_break").unwrap();
    let ast = parse_source(&fx.source).unwrap();
    let (f, _) = rename_in(&ast, ast.function(ENTRY).unwrap());
    let parts = split_parts(&f, &SplitConfig::default(), &AlwaysSplit).unwrap();
    let ends: Vec<&str> = parts
        .iter()
        .filter(|p| p.kind == PartKind::Label && p.payload.ends_with("_end"))
        .map(|p| p.payload.as_str())
        .collect();
    assert_eq!(ends.len(), 2);
    let inner_end = ends[0];
    let brk = parts
        .iter()
        .find(|p| p.kind == PartKind::SourceBlock && p.loop_depth == 2 && p.break_target.is_some())
        .expect("part inside the inner loop");
    assert_eq!(brk.break_target.as_deref(), Some(inner_end));
}

#[test]
fn generated_programs_pass_in_split_mode() {
    if !toolchain() {
        return;
    }
    let h = Harness::default();
    for entry in SeedManifest::standard(12).programs {
        let case = materialize(entry, &h).unwrap();
        let r = check_program(&case, &h).unwrap();
        assert!(r.passed(), "seed {}: {:?}\n{}", entry.seed, r.report, case.source);
        assert!(oracle_equivalence(&case, &h).unwrap(), "seed {}", entry.seed);
    }
}
