//! End-to-end checks of the congruence-vs-graph-isomorphism separation on
//! the square building block.

use nccw::classify::appbr::build_appbr;
use nccw::classify::congruence::{congruence_test, transpose, CongruenceOutcome};
use nccw::classify::decide_conjugacy;
use nccw::model::dualize;
use nccw::spectrum::homeo::{graph_homeomorphic, multigraph_iso, IsoGraph};
use nccw::spectrum::spec_b;

#[test]
fn appbr_six_three_full_pipeline() {
    let inst = build_appbr(6, 3).unwrap();

    // Matrices are not congruent, columns discriminate.
    match congruence_test(&inst.m_sigma, &inst.m_tau).unwrap() {
        CongruenceOutcome::NotCongruent { reason } => {
            assert_eq!(reason, "two identical columns");
        }
        _ => panic!("expected NotCongruent"),
    }

    // The unoriented bipartite multigraphs are isomorphic.
    let dual = dualize(&inst.data);
    let gs = spec_b(&dual, &inst.sigma);
    let gt = spec_b(&dual, &inst.tau);
    let iso = multigraph_iso(&IsoGraph::from_top(&gs), &IsoGraph::from_top(&gt));
    assert!(iso.is_some(), "unoriented graph isomorphism must exist");

    // Spectra are homeomorphic.
    let (homeo, _) = graph_homeomorphic(&gs, &gt);
    assert!(homeo);

    // But the pairs are not conjugate.
    let out = decide_conjugacy(&inst.data, &inst.sigma, &inst.tau).unwrap();
    assert!(!out.is_conjugate());
}

#[test]
fn appbr_congruent_scramble_detected() {
    // Sanity: m_sigma against a row/column scramble of itself is congruent.
    let inst = build_appbr(6, 3).unwrap();
    let n = inst.m_sigma.len();
    let scr: Vec<Vec<u32>> = (0..n)
        .map(|r| (0..n).map(|c| inst.m_sigma[(r + 3) % n][(c + 7) % n]).collect())
        .collect();
    assert!(congruence_test(&inst.m_sigma, &scr).unwrap().is_congruent());
    // and the transposed route
    let t = transpose(&inst.m_sigma);
    assert!(congruence_test(&inst.m_sigma, &t).unwrap().is_congruent());
}
