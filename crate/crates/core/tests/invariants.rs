mod common;

use cac_core::alloc::CallKind;
use cac_core::chain::{SchemeKind, SchemeSpec};
use cac_core::NewCallRejectRule;
use common::*;
use proptest::prelude::*;

fn ops() -> impl Strategy<Value = Vec<(usize, bool, bool)>> {
    prop::collection::vec((0usize..7, any::<bool>(), prop::bool::weighted(0.2)), 0..80)
}

fn scenario() -> impl Strategy<Value = cac_core::SystemParams> {
    prop_oneof![Just(small()), Just(reference())]
}

fn scheme() -> impl Strategy<Value = SchemeSpec> {
    (0usize..5).prop_map(|k| SchemeSpec::new(SchemeKind::ALL[k]))
}

fn run(check: Check) -> Result<(), TestCaseError> {
    check.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn allocation_conservation(p in scenario(), ops in ops()) {
        run(check_conservation(&replay(&p, &ops), &p))?;
    }

    #[test]
    fn floor_safety(p in scenario(), ops in ops(), m in 0usize..7, handover in any::<bool>()) {
        let kind = if handover { CallKind::Handover } else { CallKind::New };
        run(check_floor_safety(&replay(&p, &ops), &p, m, kind))?;
    }

    #[test]
    fn reallocate_idempotent(p in scenario(), ops in ops()) {
        run(check_idempotence(&replay(&p, &ops), &p))?;
    }

    #[test]
    fn handover_dominates_new_call(p in scenario(), ops in ops(), m in 0usize..7, s in scheme()) {
        let eff = s.effective_params(&p).unwrap();
        let policy = s.admission_policy(&eff, NewCallRejectRule::default());
        run(check_priority_dominance(&replay(&eff, &ops), &eff, &policy, m))?;
    }

    #[test]
    fn stationary_law_normalized(ln in 1e-3f64..3.0, lh in 0.0f64..2.0, s in scheme()) {
        run(check_normalization(ln, lh, &reference(), &s))?;
    }

    #[test]
    fn fixed_point_balances(ln in 1e-3f64..3.0, s in scheme(), small_cell in any::<bool>()) {
        let p = if small_cell { small() } else { reference() };
        run(check_fixed_point_residual(ln, &p, &s))?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulator_conserves_work(kind in 0usize..5, ln in 0.02f64..0.3, seed in any::<u64>()) {
        run(check_work_conservation(&small(), SchemeKind::ALL[kind], ln, seed))?;
    }

    #[test]
    fn simulator_replays_from_seed(kind in 0usize..5, ln in 0.02f64..0.3, seed in any::<u64>()) {
        run(check_seed_determinism(&small(), SchemeKind::ALL[kind], ln, seed))?;
    }
}
