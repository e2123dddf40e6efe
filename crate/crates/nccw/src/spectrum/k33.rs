//! Detection of `K_{3,3}` subdivisions inside 1-complexes.
//!
//! The search is exact backtracking with a node budget; exceeding the
//! budget reports `Inconclusive`, which is kept distinct from a definite
//! absence. Witnesses list the six branch vertices and nine internally
//! disjoint paths and can be re-verified independently.

use serde::{Deserialize, Serialize};

use super::{Endpoint, TopGraph};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathPiece {
    pub from: u32,
    pub to: u32,
    /// Edge ids in traversal order.
    pub edges: Vec<usize>,
    /// Internal vertices in traversal order.
    pub internals: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct K33Witness {
    pub left: [u32; 3],
    pub right: [u32; 3],
    /// Row-major: `paths[3*i + j]` joins `left[i]` to `right[j]`.
    pub paths: Vec<PathPiece>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum K33Outcome {
    Found(K33Witness),
    Absent,
    /// Budget exhausted before the search space was covered.
    Inconclusive,
}

pub const DEFAULT_BUDGET: u64 = 2_000_000;

struct Search<'g> {
    adj: Vec<Vec<(usize, u32)>>,
    branch: Vec<bool>,
    used_vertex: Vec<bool>,
    used_edge: Vec<bool>,
    pairs: Vec<(u32, u32)>,
    paths: Vec<PathPiece>,
    budget: u64,
    out_of_budget: bool,
    _g: &'g TopGraph,
}

impl<'g> Search<'g> {
    fn route(&mut self, k: usize) -> bool {
        if self.out_of_budget {
            return false;
        }
        if k == self.pairs.len() {
            return true;
        }
        let (from, to) = self.pairs[k];
        self.paths.push(PathPiece {
            from,
            to,
            edges: Vec::new(),
            internals: Vec::new(),
        });
        let ok = self.extend(k, from, to);
        if !ok {
            self.paths.pop();
        }
        ok
    }

    fn extend(&mut self, k: usize, v: u32, target: u32) -> bool {
        if self.budget == 0 {
            self.out_of_budget = true;
            return false;
        }
        self.budget -= 1;
        let deg = self.adj[v as usize].len();
        for idx in 0..deg {
            let (eid, w) = self.adj[v as usize][idx];
            if self.used_edge[eid] {
                continue;
            }
            if w == target {
                self.used_edge[eid] = true;
                self.paths[k].edges.push(eid);
                if self.route(k + 1) {
                    return true;
                }
                self.paths[k].edges.pop();
                self.used_edge[eid] = false;
                if self.out_of_budget {
                    return false;
                }
                continue;
            }
            if self.branch[w as usize] || self.used_vertex[w as usize] {
                continue;
            }
            self.used_vertex[w as usize] = true;
            self.used_edge[eid] = true;
            self.paths[k].edges.push(eid);
            self.paths[k].internals.push(w);
            if self.extend(k, w, target) {
                return true;
            }
            self.paths[k].edges.pop();
            self.paths[k].internals.pop();
            self.used_vertex[w as usize] = false;
            self.used_edge[eid] = false;
            if self.out_of_budget {
                return false;
            }
        }
        false
    }
}

pub fn find_k33(g: &TopGraph) -> K33Outcome {
    find_k33_with_budget(g, DEFAULT_BUDGET)
}

pub fn find_k33_with_budget(g: &TopGraph, budget: u64) -> K33Outcome {
    let n = g.num_vertices();
    let mut adj: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
    for (eid, e) in g.edges.iter().enumerate() {
        if let [Endpoint::Attached(a), Endpoint::Attached(b)] = e.ends {
            if a != b {
                adj[a as usize].push((eid, b));
                adj[b as usize].push((eid, a));
            }
        }
    }
    let candidates: Vec<u32> = (0..n as u32)
        .filter(|&v| adj[v as usize].len() >= 3)
        .collect();
    if candidates.len() < 6 {
        return K33Outcome::Absent;
    }

    let mut ran_out = false;
    let mut remaining = budget;
    // All 6-subsets of the candidates, then the 10 bipartitions of each.
    let m = candidates.len();
    let mut subset = [0usize; 6];
    fn subsets(
        m: usize,
        k: usize,
        start: usize,
        subset: &mut [usize; 6],
        f: &mut dyn FnMut(&[usize; 6]) -> bool,
    ) -> bool {
        if k == 6 {
            return f(subset);
        }
        for v in start..m {
            subset[k] = v;
            if subsets(m, k + 1, v + 1, subset, f) {
                return true;
            }
        }
        false
    }
    let mut found: Option<K33Witness> = None;
    subsets(m, 0, 0, &mut subset, &mut |sub| {
        let six: Vec<u32> = sub.iter().map(|&k| candidates[k]).collect();
        // Bipartitions with six[0] always on the left kill the side swap
        // symmetry.
        for mask in 0u32..32 {
            let mut left = vec![six[0]];
            let mut right = Vec::new();
            for (bit, &v) in six.iter().enumerate().skip(1) {
                if mask & (1 << (bit - 1)) != 0 {
                    left.push(v);
                } else {
                    right.push(v);
                }
            }
            if left.len() != 3 {
                continue;
            }
            let pairs: Vec<(u32, u32)> = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| (left[i], right[j]))
                .collect();
            let mut search = Search {
                adj: adj.clone(),
                branch: {
                    let mut b = vec![false; n];
                    for &v in &six {
                        b[v as usize] = true;
                    }
                    b
                },
                used_vertex: vec![false; n],
                used_edge: vec![false; g.num_edges()],
                pairs,
                paths: Vec::new(),
                budget: remaining,
                out_of_budget: false,
                _g: g,
            };
            let ok = search.route(0);
            remaining = search.budget;
            if ok {
                found = Some(K33Witness {
                    left: [left[0], left[1], left[2]],
                    right: [right[0], right[1], right[2]],
                    paths: search.paths,
                });
                return true;
            }
            if search.out_of_budget {
                ran_out = true;
                return true;
            }
        }
        false
    });

    match (found, ran_out) {
        (Some(w), _) => K33Outcome::Found(w),
        (None, true) => K33Outcome::Inconclusive,
        (None, false) => K33Outcome::Absent,
    }
}

/// Independent re-verification of a witness against the graph it refers to.
pub fn verify_k33(g: &TopGraph, w: &K33Witness) -> Result<(), String> {
    let mut branch = w.left.to_vec();
    branch.extend_from_slice(&w.right);
    branch.sort_unstable();
    let len_before = branch.len();
    branch.dedup();
    if branch.len() != len_before {
        return Err("branch vertices not distinct".into());
    }
    if w.paths.len() != 9 {
        return Err(format!("{} paths, expected 9", w.paths.len()));
    }
    let mut seen_internal: Vec<u32> = Vec::new();
    let mut seen_edges: Vec<usize> = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            let piece = &w.paths[3 * i + j];
            if piece.from != w.left[i] || piece.to != w.right[j] {
                return Err(format!("path ({i},{j}) endpoints wrong"));
            }
            if piece.edges.is_empty() || piece.internals.len() + 1 != piece.edges.len() {
                return Err(format!("path ({i},{j}) malformed"));
            }
            // Walk the edges.
            let mut at = piece.from;
            let mut internals = piece.internals.iter();
            for (step, &eid) in piece.edges.iter().enumerate() {
                let e = g
                    .edges
                    .get(eid)
                    .ok_or_else(|| format!("edge {eid} out of range"))?;
                let (a, b) = match e.ends {
                    [Endpoint::Attached(a), Endpoint::Attached(b)] => (a, b),
                    _ => return Err(format!("edge {eid} has a free end")),
                };
                let next = if a == at {
                    b
                } else if b == at {
                    a
                } else {
                    return Err(format!("edge {eid} does not continue path at v{at}"));
                };
                let last = step + 1 == piece.edges.len();
                if last {
                    if next != piece.to {
                        return Err(format!("path ({i},{j}) ends at v{next}"));
                    }
                } else {
                    let claimed = internals
                        .next()
                        .ok_or_else(|| format!("path ({i},{j}) missing internal"))?;
                    if *claimed != next {
                        return Err(format!("path ({i},{j}) internal mismatch"));
                    }
                    if branch.binary_search(&next).is_ok() {
                        return Err(format!("path ({i},{j}) passes through a branch vertex"));
                    }
                }
                at = next;
                seen_edges.push(eid);
            }
            seen_internal.extend_from_slice(&piece.internals);
        }
    }
    let before = seen_internal.len();
    seen_internal.sort_unstable();
    seen_internal.dedup();
    if seen_internal.len() != before {
        return Err("internal vertices shared between paths".into());
    }
    let before = seen_edges.len();
    seen_edges.sort_unstable();
    seen_edges.dedup();
    if seen_edges.len() != before {
        return Err("edges shared between paths".into());
    }
    // Euler sanity on the contracted pattern: 9 edges on 6 vertices breaks
    // the bipartite planar bound 2V - 4.
    debug_assert!(9 > 2 * 6 - 4);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{Endpoint as E, TopGraph, VertexKind as K};

    fn complete_bipartite(a: usize, b: usize) -> TopGraph {
        let mut g = TopGraph::default();
        let left: Vec<u32> = (0..a).map(|k| g.add_vertex(K::Anonymous, format!("l{k}"))).collect();
        let right: Vec<u32> = (0..b).map(|k| g.add_vertex(K::Anonymous, format!("r{k}"))).collect();
        for &l in &left {
            for &r in &right {
                g.add_edge(E::Attached(l), E::Attached(r), "", None);
            }
        }
        g
    }

    fn complete(n: usize) -> TopGraph {
        let mut g = TopGraph::default();
        let vs: Vec<u32> = (0..n).map(|k| g.add_vertex(K::Anonymous, format!("v{k}"))).collect();
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(E::Attached(vs[i]), E::Attached(vs[j]), "", None);
            }
        }
        g
    }

    #[test]
    fn k4_is_clean() {
        assert!(matches!(find_k33(&complete(4)), K33Outcome::Absent));
    }

    #[test]
    fn k33_found_and_verified() {
        let g = complete_bipartite(3, 3);
        match find_k33(&g) {
            K33Outcome::Found(w) => verify_k33(&g, &w).unwrap(),
            other => panic!("expected witness, got {other:?}"),
        }
    }

    #[test]
    fn subdivided_k33_found() {
        let mut g = complete_bipartite(3, 3);
        // subdivide every edge once
        let edges: Vec<_> = g.edges.clone();
        g.edges.clear();
        for e in edges {
            let mid = g.add_vertex(K::Anonymous, "m");
            g.add_edge(e.ends[0], E::Attached(mid), "", None);
            g.add_edge(E::Attached(mid), e.ends[1], "", None);
        }
        match find_k33(&g) {
            K33Outcome::Found(w) => verify_k33(&g, &w).unwrap(),
            other => panic!("expected witness, got {other:?}"),
        }
    }

    #[test]
    fn planar_graphs_yield_nothing() {
        // wheel on 6 spokes is planar
        let mut g = TopGraph::default();
        let hub = g.add_vertex(K::Anonymous, "hub");
        let rim: Vec<u32> = (0..6).map(|k| g.add_vertex(K::Anonymous, format!("r{k}"))).collect();
        for k in 0..6 {
            g.add_edge(E::Attached(hub), E::Attached(rim[k]), "", None);
            g.add_edge(E::Attached(rim[k]), E::Attached(rim[(k + 1) % 6]), "", None);
        }
        assert!(matches!(find_k33(&g), K33Outcome::Absent));
        assert!(matches!(find_k33(&complete(5)), K33Outcome::Absent));
    }

    #[test]
    fn tampered_witness_rejected() {
        let g = complete_bipartite(3, 3);
        if let K33Outcome::Found(mut w) = find_k33(&g) {
            w.paths[0].edges.clear();
            assert!(verify_k33(&g, &w).is_err());
        } else {
            panic!("no witness");
        }
    }
}
