mod common;

use legoc_core::layout::verify_layout_against_oracle;
use legoc_core::mapping::{check_no_overlap, Violation};
use legoc_core::pipeline::prepare;
use legoc_core::splitter::{split_parts, verify_split_integrity, RandomPolicy, SplitConfig};
use legoc_core::suite::{gen_subset_program, ENTRY};
use legoc_core::toolchain::Toolchain;
use legoc_core::{parse_source, Mode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn layouts_match_system_compiler(seed in any::<u64>()) {
        prop_assume!(Toolchain::default().available());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = common::random_records(&mut rng, 4);
        let (layouts, oracle) = common::layouts_and_oracle(&recs);
        let mismatches = verify_layout_against_oracle(&layouts, &oracle).unwrap();
        prop_assert!(mismatches.is_empty(), "{:?}\n{}", mismatches, recs.source);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn frames_are_disjoint_aligned_and_in_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = common::random_frame(&mut rng);
        prop_assert_eq!(check_no_overlap(&t), vec![]);
        let mut m = t.clone();
        let last = m.locals.len() - 1;
        m.locals[last].offset = -(m.frame_size as i64) - m.locals[last].layout.size.max(1) as i64;
        prop_assert!(check_no_overlap(&m).contains(&Violation::OutOfBounds(m.locals[last].name.clone())));
        if t.locals.len() > 1 {
            let mut m = t.clone();
            m.locals[1].offset = m.locals[0].offset;
            prop_assert!(check_no_overlap(&m).iter().any(|v| matches!(v, Violation::Overlap(..))));
        }
    }

    #[test]
    fn random_splits_recombine(seed in any::<u64>(), budget in 2usize..40) {
        let ast = parse_source(&gen_subset_program(seed, budget)).unwrap();
        let program = prepare(&ast, Mode::Lego, &SplitConfig::default());
        let f = program.ast.function(ENTRY).unwrap();
        let parts = split_parts(f, &SplitConfig::default(), &RandomPolicy::new(seed)).unwrap();
        prop_assert!(verify_split_integrity(f, &parts));
    }
}
