//! Condition checkers, mutation isolation, ends trees, censuses, and the
//! non-planarity certificates.

use nccw::dyadic::Dyadic;
use nccw::tower::census::{bisection_census, compare_towers, invariant_sequence, Comparison};
use nccw::tower::conditions::{check_conditions, CondStatus};
use nccw::tower::ends::ends_tree;
use nccw::tower::k33::{basic_open_preimage, k33_witness};
use nccw::tower::presets::{
    conn_tower, mutant_tower, nop_tower, sccb_tower, spl_tower, Mutant, ALL_MUTANTS,
};
use nccw::spectrum::k33::verify_k33;

#[test]
fn good_tower_passes_all_conditions() {
    let tower = nop_tower(3).unwrap();
    for level in 1..3 {
        let report = check_conditions(
            tower.stage(level),
            tower.stage(level + 1),
            &tower.specs[level - 1],
            &tower.family,
        );
        assert!(report.all_passed(), "level {level}:\n{report}");
    }
}

#[test]
fn mutants_fail_exactly_their_target() {
    use nccw::tower::presets::mutant_check_level;
    for mutant in ALL_MUTANTS {
        let tower = mutant_tower(mutant).unwrap();
        let lvl = mutant_check_level(mutant);
        let report = check_conditions(
            tower.stage(lvl),
            tower.stage(lvl + 1),
            &tower.specs[lvl - 1],
            &tower.family,
        );
        let target = mutant.condition_name();
        for outcome in &report.outcomes {
            match (&outcome.status, outcome.name == target) {
                (CondStatus::Fail(witness), true) => {
                    assert!(!witness.is_empty(), "{target} must carry a witness");
                }
                (CondStatus::Fail(w), false) => {
                    panic!("mutant {mutant:?} also broke {}: {w}", outcome.name)
                }
                _ => {}
            }
        }
        assert!(
            matches!(report.status(target), Some(CondStatus::Fail(_))),
            "mutant {mutant:?} did not break {target}:\n{report}"
        );
    }
}

#[test]
fn np4ni_mutant_detected_on_first_stage() {
    use nccw::tower::conditions::check_np4ni_stage;
    let tower = mutant_tower(Mutant::Np4ni).unwrap();
    assert!(check_np4ni_stage(tower.stage(1)).is_err());
    // the good tower clears the bound at every level
    let good = nop_tower(3).unwrap();
    for level in 1..=3 {
        check_np4ni_stage(good.stage(level)).unwrap();
    }
}

#[test]
fn phi_conditions_on_conn_towers() {
    let tower = conn_tower(2, true).unwrap();
    let report = check_conditions(
        tower.stage(1),
        tower.stage(2),
        &tower.specs[0],
        &tower.family,
    );
    assert!(matches!(report.status("phiCfp"), Some(CondStatus::Pass)));
    assert!(matches!(report.status("phiCl"), Some(CondStatus::Pass)));
    // removing the full-interval blocks breaks the first condition
    let mut broken_spec = tower.specs[0].clone();
    broken_spec.m_ident[0][1] = 0;
    let report = check_conditions(
        tower.stage(1),
        tower.stage(2),
        &broken_spec,
        &tower.family,
    );
    assert!(matches!(report.status("phiCfp"), Some(CondStatus::Fail(_))));
    // a cell-valued block avoiding the base point at both ends breaks the
    // third condition
    let mut z_spec = tower.specs[0].clone();
    z_spec.z_blocks.push(nccw::tower::ZBlockAnn {
        q: 0,
        starts_at_base: false,
        ends_at_base: false,
    });
    let report = check_conditions(tower.stage(1), tower.stage(2), &z_spec, &tower.family);
    assert!(matches!(report.status("phiCx"), Some(CondStatus::Fail(_))));
}

#[test]
fn ends_tree_branching_and_counts() {
    let tower = spl_tower(5).unwrap();
    let tree = ends_tree(&tower, 5).unwrap();
    assert!(tree.cantor_branching, "branching {}", tree.min_branching);
    assert!(tree.min_branching >= 2);
    // product formula: every level multiplies the end count by the number
    // of upward blocks over the grave pair
    let m_plus = 2u32;
    for level in 2..=5 {
        assert_eq!(
            tree.level_count(level),
            tree.level_count(level - 1) * m_plus as usize,
            "level {level}"
        );
    }
    // depth-1 tree: single level, no edges
    let shallow = ends_tree(&tower, 1).unwrap();
    assert_eq!(shallow.levels.len(), 1);
    assert!(shallow.parents.is_empty());
    // unital towers are rejected
    let unital = nop_tower(2).unwrap();
    assert!(ends_tree(&unital, 2).is_err());
}

#[test]
fn census_and_degree_readout() {
    let tower = sccb_tower(3, vec![0, 0, 0]).unwrap();
    for level in 1..=3 {
        let stage = tower.stage(level);
        let report = bisection_census(stage, 4);
        // nonempty at every level under the size bound
        assert!(report.total() > 0, "census empty at level {level}");
        for (k, &(_, degree)) in report.per_block.iter().enumerate() {
            assert_eq!(degree, stage.p_sizes[k]);
        }
        // the sampled pairs are genuine: endpoints in distinct slot blocks
        for &(y, y2) in &report.samples {
            let same0 = stage.sb[0][y as usize] != nccw::tower::UNDEF
                && stage.sb[0][y as usize] == stage.sb[0][y2 as usize];
            let same1 = stage.sb[1][y as usize] != nccw::tower::UNDEF
                && stage.sb[1][y as usize] == stage.sb[1][y2 as usize];
            assert!(!same0 && !same1);
        }
    }
}

#[test]
fn invariant_sequence_and_growth() {
    let tower = sccb_tower(3, vec![1, 0, 0]).unwrap();
    let inv = invariant_sequence(&tower, 3);
    assert_eq!(inv.len(), 3);
    assert_eq!(inv[0], tower.stage(1).p_sizes);
    for n in 0..2 {
        let max_low = inv[n].iter().max().unwrap();
        let min_high = inv[n + 1].iter().min().unwrap();
        assert!(min_high > max_low, "no strict growth at level {}", n + 1);
    }
}

#[test]
fn tower_separation() {
    let t1 = sccb_tower(3, vec![1, 0, 0]).unwrap();
    let t2 = sccb_tower(3, vec![2, 0, 0]).unwrap();
    match compare_towers(&t1, &t2, 3).unwrap() {
        Comparison::Distinguished { level, value } => {
            assert_eq!(level, 1);
            assert!(value > 0);
        }
        other => panic!("expected separation, got {other:?}"),
    }
    // identical sequences are indistinguishable to depth
    let t3 = sccb_tower(3, vec![1, 0, 0]).unwrap();
    assert_eq!(
        compare_towers(&t1, &t3, 3).unwrap(),
        Comparison::IndistinguishableToDepth(3)
    );
    // later difference
    let t4 = sccb_tower(3, vec![1, 0, 2]).unwrap();
    match compare_towers(&t1, &t4, 3).unwrap() {
        Comparison::Distinguished { level, .. } => assert_eq!(level, 3),
        other => panic!("expected separation at the last level, got {other:?}"),
    }
    // insertion grows the count by the vertex-block size
    let base = sccb_tower(1, vec![0]).unwrap();
    let plus = sccb_tower(1, vec![1]).unwrap();
    let j = 0usize; // single summand at level 1
    assert_eq!(
        plus.stage(1).p_sizes[0],
        base.stage(1).p_sizes[0] + base.stage(1).i_sizes[j]
    );
}

#[test]
fn k33_certificates_at_level_one() {
    let tower = nop_tower(3).unwrap();
    let interval = (Dyadic::new(1, 2), Dyadic::new(3, 2));
    let stage1 = tower.stage(1);
    for y in 0..stage1.num_y() as u32 {
        let report = k33_witness(&tower, 1, interval, y)
            .unwrap_or_else(|e| panic!("edge y{y}: {e}"));
        verify_k33(&report.graph, &report.witness).unwrap();
        assert_eq!(report.paths.len(), 9);
    }
}

#[test]
fn k33_fails_without_enough_halfway_blocks() {
    let tower = mutant_tower(Mutant::Nop1).unwrap();
    let interval = (Dyadic::new(1, 2), Dyadic::new(3, 2));
    let err = k33_witness(&tower, 1, interval, 0);
    assert!(matches!(
        err,
        Err(nccw::tower::k33::K33Error::MissingMu { found: 8 }) | Err(nccw::tower::k33::K33Error::TooShallow(_))
    ));
}

#[test]
fn basic_open_preimages_double() {
    // the interval-halving step behind local path-connectedness: a basic
    // open interval not containing the halfway point pulls back to
    // intervals of doubled length
    let tower = nop_tower(2).unwrap();
    let conn = tower.connector(1);
    let lo = Dyadic::new(1, 3);
    let hi = Dyadic::new(3, 3);
    let pre = basic_open_preimage(&conn, (lo, hi), 0);
    assert!(!pre.is_empty());
    let width = hi.sub(&lo);
    for (_, (a, b)) in &pre {
        let w = b.sub(a);
        assert!(w == width.doubled() || w == Dyadic::ONE.sub(&Dyadic::ZERO));
    }
}
