//! Centre spectrum, rigidity tests, and the spectrum-based conjugacy
//! decision available under the strong rigidity hypotheses.

use serde::{Deserialize, Serialize};

use super::ClassifyError;
use crate::ids::PIdx;
use crate::model::{dualize, validate_nccw, NccwData, TwistPerm};
use crate::spectrum::homeo::graph_homeomorphic;
use crate::spectrum::{spec_b, Endpoint, TopGraph, VertexKind};

/// Quotient of `[0,1] x P` by the boundary gluing relation, as a 1-complex:
/// one edge per block, endpoints glued into classes generated by shared
/// summands; an endpoint whose class contains a non-unital boundary map is
/// removed (free end).
pub fn center_spectrum(data: &NccwData) -> TopGraph {
    let np = data.num_p();
    // union-find over the 2*np endpoint symbols (r, p)
    let mut parent: Vec<usize> = (0..2 * np).collect();
    fn find(parent: &mut Vec<usize>, a: usize) -> usize {
        if parent[a] != a {
            let r = find(parent, parent[a]);
            parent[a] = r;
        }
        parent[a]
    }
    let idx = |r: usize, p: usize| r * np + p;
    for i in 0..data.num_i() {
        let mut touching: Vec<usize> = Vec::new();
        for r in 0..2 {
            for p in 0..np {
                if data.mult[r][p][i] > 0 {
                    touching.push(idx(r, p));
                }
            }
        }
        for w in touching.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a] = b;
            }
        }
    }
    // A class is kept iff every member is unital.
    let mut class_ok = vec![true; 2 * np];
    for r in 0..2 {
        for p in 0..np {
            if !data.is_unital_at(r, PIdx(p as u32)) {
                let root = find(&mut parent, idx(r, p));
                class_ok[root] = false;
            }
        }
    }
    let mut g = TopGraph::default();
    let mut class_vertex = vec![u32::MAX; 2 * np];
    let endpoint = |g: &mut TopGraph,
                        parent: &mut Vec<usize>,
                        class_vertex: &mut Vec<u32>,
                        r: usize,
                        p: usize|
     -> Endpoint {
        let root = find(parent, idx(r, p));
        if !class_ok[root] {
            return Endpoint::Free;
        }
        if class_vertex[root] == u32::MAX {
            class_vertex[root] = g.add_vertex(VertexKind::Anonymous, format!("z{root}"));
        }
        Endpoint::Attached(class_vertex[root])
    };
    for p in 0..np {
        let a = endpoint(&mut g, &mut parent, &mut class_vertex, 0, p);
        let b = endpoint(&mut g, &mut parent, &mut class_vertex, 1, p);
        g.add_edge(a, b, format!("p{p}"), Some(PIdx(p as u32)));
    }
    g
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RigidityReport {
    /// Centre-preserving rigidity: every `(r, p)` meets at most one summand.
    pub abbz: bool,
    /// Strong rigidity: unitality, one-to-one incidence in both directions,
    /// no multiplicity equal to 2, multiplicity map injective on incident
    /// triples.
    pub abb: bool,
    pub details: Vec<String>,
}

pub fn rigidity_check(data: &NccwData) -> RigidityReport {
    let np = data.num_p();
    let ni = data.num_i();
    let mut details = Vec::new();

    let mut abbz = true;
    for r in 0..2 {
        for p in 0..np {
            let hits = (0..ni).filter(|&i| data.mult[r][p][i] > 0).count();
            if hits > 1 {
                abbz = false;
                details.push(format!("(r={r}, p{p}) meets {hits} summands"));
            }
        }
    }

    let mut abb = true;
    for r in 0..2 {
        for p in 0..np {
            if !data.is_unital_at(r, PIdx(p as u32)) {
                abb = false;
                details.push(format!("beta_{r}^p{p} not unital"));
            }
        }
    }
    let mut triples = Vec::new();
    for i in 0..ni {
        let hits: Vec<(usize, usize)> = (0..2)
            .flat_map(|r| (0..np).map(move |p| (r, p)))
            .filter(|&(r, p)| data.mult[r][p][i] > 0)
            .collect();
        if hits.len() != 1 {
            abb = false;
            details.push(format!("i{i} met by {} boundary components", hits.len()));
        } else {
            triples.push((hits[0].0, hits[0].1, i));
        }
    }
    for r in 0..2 {
        for p in 0..np {
            let hits = (0..ni).filter(|&i| data.mult[r][p][i] > 0).count();
            if hits != 1 {
                abb = false;
                details.push(format!("(r={r}, p{p}) meets {hits} summands, needs exactly 1"));
            }
        }
    }
    let mut seen_mults = Vec::new();
    for &(r, p, i) in &triples {
        let m = data.mult[r][p][i];
        if m == 2 {
            abb = false;
            details.push(format!("multiplicity 2 at (r={r}, p{p}, i{i})"));
        }
        if seen_mults.contains(&m) {
            abb = false;
            details.push(format!("multiplicity map not injective (value {m} repeats)"));
        }
        seen_mults.push(m);
    }

    RigidityReport { abbz, abb, details }
}

/// Decides conjugacy through the spectra alone; only applicable under the
/// strong rigidity hypotheses.
pub fn decide_via_spectrum(
    data: &NccwData,
    sigma: &TwistPerm,
    tau: &TwistPerm,
) -> Result<bool, ClassifyError> {
    let report = validate_nccw(data);
    if !report.is_valid() {
        return Err(ClassifyError::Invalid(report.errors));
    }
    let rigidity = rigidity_check(data);
    if !rigidity.abb {
        return Err(ClassifyError::Inapplicable(format!(
            "strong rigidity hypotheses fail: {:?}",
            rigidity.details
        )));
    }
    let dual = dualize(data);
    let gs = spec_b(&dual, sigma);
    let gt = spec_b(&dual, tau);
    Ok(graph_homeomorphic(&gs, &gt).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::decide_conjugacy;
    use crate::model::{dimension_drop, example_r1};
    use crate::spectrum::analyze;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn r1_center_is_a_circle() {
        // (0,p) ~ (1,p) through both shared summands: one vertex, one loop.
        let g = center_spectrum(&example_r1());
        assert_eq!(g.num_vertices(), 1);
        assert_eq!(g.num_edges(), 1);
        let a = analyze(&g);
        assert_eq!(a.pi0, 1);
        assert_eq!(a.free_ends, 0);
    }

    #[test]
    fn disjoint_summands_give_disjoint_centres() {
        let data = NccwData::with_canonical_layout(
            vec![1, 1],
            vec![1, 1],
            [vec![vec![1, 0], vec![0, 1]], vec![vec![1, 0], vec![0, 1]]],
        );
        let g = center_spectrum(&data);
        assert_eq!(analyze(&g).pi0, 2);
    }

    #[test]
    fn grave_endpoint_is_free() {
        // beta_0 lands in i0 only and is unital, beta_1 lands in i1 only and
        // is non-unital: the 1-endpoint is removed, the 0-endpoint survives.
        let data = NccwData::with_canonical_layout(
            vec![3],
            vec![1, 1],
            [vec![vec![3, 0]], vec![vec![0, 2]]],
        );
        assert_eq!(crate::model::validate_nccw(&data).grave, Some(PIdx(0)));
        let g = center_spectrum(&data);
        let a = analyze(&g);
        assert_eq!(a.free_ends, 1);
        assert_eq!(g.num_vertices(), 1);

        // When the two boundary sides are glued through a shared summand,
        // the non-unital member poisons the whole class and both endpoints
        // go free.
        let data = NccwData::with_canonical_layout(
            vec![3],
            vec![1],
            [vec![vec![3]], vec![vec![2]]],
        );
        let g = center_spectrum(&data);
        assert_eq!(analyze(&g).free_ends, 2);
    }

    #[test]
    fn rigidity_on_dimension_drop() {
        // (3,4,1): multiplicities {4, 3}, all != 2, injective.
        let data = dimension_drop(3, 4, 1);
        let report = rigidity_check(&data);
        assert!(report.abb, "{:?}", report.details);
        assert!(report.abbz);

        // m = n kills injectivity of the multiplicity map.
        let data = dimension_drop(4, 4, 1);
        let report = rigidity_check(&data);
        assert!(!report.abb);

        // R1: two summands hit (0, p).
        let report = rigidity_check(&example_r1());
        assert!(!report.abbz);
        assert!(!report.abb);
    }

    #[test]
    fn spectrum_decision_applicable_and_trivial_case() {
        let data = dimension_drop(3, 4, 1);
        let dual = dualize(&data);
        let id = TwistPerm::identity(&dual);
        assert!(decide_via_spectrum(&data, &id, &id).unwrap());
        // and inapplicable on R1
        let r1 = example_r1();
        let dual1 = dualize(&r1);
        let id1 = TwistPerm::identity(&dual1);
        assert!(matches!(
            decide_via_spectrum(&r1, &id1, &id1),
            Err(ClassifyError::Inapplicable(_))
        ));
    }

    #[test]
    fn spectrum_decision_agrees_with_certificates() {
        let data = dimension_drop(3, 4, 1);
        let dual = dualize(&data);
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..25 {
            let sigma = TwistPerm::random(&dual, &mut rng);
            let tau = TwistPerm::random(&dual, &mut rng);
            let by_spec = decide_via_spectrum(&data, &sigma, &tau).unwrap();
            let by_cert = decide_conjugacy(&data, &sigma, &tau).unwrap().is_conjugate();
            assert_eq!(by_spec, by_cert);
        }
    }
}
