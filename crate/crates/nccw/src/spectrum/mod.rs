//! Topological-graph models of diagonal spectra and generic 1-complexes.
//!
//! A [`TopGraph`] is a 1-complex given combinatorially: labelled vertices,
//! edges with two endpoints each of which is either attached to a vertex or
//! free (half-open). Quotient constructions only ever identify edge ends
//! with vertices, never interior points.

pub mod homeo;
pub mod k33;

use serde::{Deserialize, Serialize};

use crate::ids::{PIdx, XIdx, YIdx};
use crate::model::{twisted_target, DualData, TwistPerm, R0};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum VertexKind {
    /// A point of `X`.
    XClass,
    /// An opaque path-connected cell with a base point; treated as a single
    /// point by all graph algorithms.
    ZCell,
    Anonymous,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Endpoint {
    Attached(u32),
    Free,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopEdge {
    pub ends: [Endpoint; 2],
    /// Edge label for reporting (block and slot of origin, or synthetic).
    pub label: String,
    pub p_block: Option<PIdx>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TopGraph {
    pub vertex_kinds: Vec<VertexKind>,
    pub vertex_labels: Vec<String>,
    pub edges: Vec<TopEdge>,
}

impl TopGraph {
    pub fn add_vertex(&mut self, kind: VertexKind, label: impl Into<String>) -> u32 {
        self.vertex_kinds.push(kind);
        self.vertex_labels.push(label.into());
        self.vertex_kinds.len() as u32 - 1
    }

    pub fn add_edge(
        &mut self,
        a: Endpoint,
        b: Endpoint,
        label: impl Into<String>,
        p_block: Option<PIdx>,
    ) -> usize {
        self.edges.push(TopEdge {
            ends: [a, b],
            label: label.into(),
            p_block,
        });
        self.edges.len() - 1
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_kinds.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn free_end_count(&self) -> usize {
        self.edges
            .iter()
            .flat_map(|e| e.ends.iter())
            .filter(|e| matches!(e, Endpoint::Free))
            .count()
    }

    /// Degree of each vertex counting edge ends (a loop contributes two).
    pub fn degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.num_vertices()];
        for e in &self.edges {
            for end in &e.ends {
                if let Endpoint::Attached(v) = end {
                    deg[*v as usize] += 1;
                }
            }
        }
        deg
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph spectrum {\n");
        for (v, kind) in self.vertex_kinds.iter().enumerate() {
            let shape = match kind {
                VertexKind::XClass => "circle",
                VertexKind::ZCell => "doublecircle",
                VertexKind::Anonymous => "point",
            };
            out.push_str(&format!(
                "  v{v} [shape={shape}, label=\"{}\"];\n",
                self.vertex_labels[v]
            ));
        }
        let mut free = 0usize;
        for (k, e) in self.edges.iter().enumerate() {
            let name = |end: &Endpoint, free: &mut usize| match end {
                Endpoint::Attached(v) => format!("v{v}"),
                Endpoint::Free => {
                    *free += 1;
                    format!("free{}", *free - 1)
                }
            };
            let a = name(&e.ends[0], &mut free);
            let b = name(&e.ends[1], &mut free);
            out.push_str(&format!("  {a} -- {b} [label=\"{}:{}\"];\n", k, e.label));
        }
        for f in 0..free {
            out.push_str(&format!("  free{f} [shape=none, label=\"~\"];\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Spectrum of the twisted diagonal: vertices `X`, one edge per `y ∈ Y`
/// from `b0(y)` to `b1(σ(y))`, free where undefined.
pub fn spec_b(dual: &DualData, sigma: &TwistPerm) -> TopGraph {
    let mut g = TopGraph::default();
    for x in 0..dual.num_x() {
        g.add_vertex(VertexKind::XClass, format!("x{x}"));
    }
    for y in 0..dual.num_y() {
        let yid = YIdx(y as u32);
        let src = dual.b[R0][y]
            .map(|x| Endpoint::Attached(x.0))
            .unwrap_or(Endpoint::Free);
        let tgt = twisted_target(dual, sigma, yid)
            .map(|x| Endpoint::Attached(x.0))
            .unwrap_or(Endpoint::Free);
        g.add_edge(src, tgt, format!("y{y}"), Some(dual.y_p[y]));
    }
    g
}

/// Connectivity, articulation points and free ends of a 1-complex.
///
/// Free ends are modelled as pendant leaves for the articulation
/// computation, matching the topology (removing the attachment point
/// separates the half-open arc).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Analysis {
    pub pi0: usize,
    pub cut_vertices: Vec<u32>,
    pub free_ends: usize,
    /// `(effective_vertices, edges, components)`; first Betti number is
    /// `edges - vertices + components`.
    pub euler_data: (usize, usize, usize),
}

pub fn analyze(g: &TopGraph) -> Analysis {
    // Expand free ends into virtual leaf vertices.
    let base = g.num_vertices();
    let mut extra = 0usize;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); base];
    for (k, e) in g.edges.iter().enumerate() {
        let mut ends = [0usize; 2];
        for (slot, end) in e.ends.iter().enumerate() {
            ends[slot] = match end {
                Endpoint::Attached(v) => *v as usize,
                Endpoint::Free => {
                    adj.push(Vec::new());
                    extra += 1;
                    base + extra - 1
                }
            };
        }
        adj[ends[0]].push((ends[1], k));
        adj[ends[1]].push((ends[0], k));
    }
    let n = base + extra;

    // Components via DFS (also covers isolated vertices).
    let mut comp = vec![usize::MAX; n];
    let mut ncomp = 0usize;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = ncomp;
        while let Some(v) = stack.pop() {
            for &(w, _) in &adj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = ncomp;
                    stack.push(w);
                }
            }
        }
        ncomp += 1;
    }

    // Iterative articulation-point search (low-link). Loops are skipped:
    // they never affect connectivity.
    let mut disc = vec![0u32; n];
    let mut low = vec![0u32; n];
    let mut visited = vec![false; n];
    let mut is_cut = vec![false; n];
    let mut timer = 1u32;
    for start in 0..n {
        if visited[start] {
            continue;
        }
        // Frame: (vertex, parent edge id, adjacency cursor, child count at root)
        let mut stack: Vec<(usize, usize, usize)> = vec![(start, usize::MAX, 0)];
        let mut root_children = 0usize;
        visited[start] = true;
        disc[start] = timer;
        low[start] = timer;
        timer += 1;
        while let Some(&mut (v, pedge, ref mut cursor)) = stack.last_mut() {
            if *cursor < adj[v].len() {
                let (w, eid) = adj[v][*cursor];
                *cursor += 1;
                if w == v {
                    continue; // loop edge
                }
                if !visited[w] {
                    if v == start {
                        root_children += 1;
                    }
                    visited[w] = true;
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, eid, 0));
                } else if eid != pedge {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&mut (u, _, _)) = stack.last_mut() {
                    low[u] = low[u].min(low[v]);
                    if u != start && low[v] >= disc[u] {
                        is_cut[u] = true;
                    }
                }
            }
        }
        if root_children > 1 {
            is_cut[start] = true;
        }
    }

    let cut_vertices: Vec<u32> = (0..base)
        .filter(|&v| is_cut[v])
        .map(|v| v as u32)
        .collect();

    Analysis {
        pi0: ncomp,
        cut_vertices,
        free_ends: extra,
        euler_data: (n, g.num_edges(), ncomp),
    }
}

/// Vertex id helper for graphs built from `X`-sets.
pub fn xv(x: XIdx) -> Endpoint {
    Endpoint::Attached(x.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{dualize, example_r1};
    use crate::perm::Perm;

    #[test]
    fn r1_spec_b_two_loops_then_one_circle() {
        let data = example_r1();
        let dual = dualize(&data);
        let id = TwistPerm::identity(&dual);
        let g = spec_b(&dual, &id);
        let a = analyze(&g);
        assert_eq!(a.pi0, 2);
        assert!(a.cut_vertices.is_empty());

        let swap = TwistPerm {
            per_block: vec![Perm::parse_cycles(2, "(1 2)").unwrap()],
        };
        let g = spec_b(&dual, &swap);
        let a = analyze(&g);
        assert_eq!(a.pi0, 1);
        assert_eq!(a.free_ends, 0);
        assert_eq!(g.num_edges(), dual.num_y());
    }

    #[test]
    fn grave_data_has_free_end() {
        let data = crate::model::NccwData::with_canonical_layout(
            vec![3],
            vec![1],
            [vec![vec![3]], vec![vec![2]]],
        );
        let dual = dualize(&data);
        let g = spec_b(&dual, &TwistPerm::identity(&dual));
        let a = analyze(&g);
        assert_eq!(a.free_ends, 1);
        // edges - |Y_1| missing target ends, b0 total:
        assert_eq!(a.free_ends, dual.num_y() - 2);
    }

    #[test]
    fn path_of_two_edges_has_middle_cut_vertex() {
        let mut g = TopGraph::default();
        let v0 = g.add_vertex(VertexKind::Anonymous, "a");
        let v1 = g.add_vertex(VertexKind::Anonymous, "b");
        let v2 = g.add_vertex(VertexKind::Anonymous, "c");
        g.add_edge(Endpoint::Attached(v0), Endpoint::Attached(v1), "e0", None);
        g.add_edge(Endpoint::Attached(v1), Endpoint::Attached(v2), "e1", None);
        let a = analyze(&g);
        assert_eq!(a.pi0, 1);
        assert_eq!(a.cut_vertices, vec![v1]);
    }

    #[test]
    fn free_whisker_makes_cut_vertex() {
        // A circle with a half-open whisker: the attachment point separates.
        let mut g = TopGraph::default();
        let v = g.add_vertex(VertexKind::Anonymous, "v");
        let w = g.add_vertex(VertexKind::Anonymous, "w");
        g.add_edge(Endpoint::Attached(v), Endpoint::Attached(w), "e0", None);
        g.add_edge(Endpoint::Attached(w), Endpoint::Attached(v), "e1", None);
        g.add_edge(Endpoint::Attached(v), Endpoint::Free, "whisker", None);
        let a = analyze(&g);
        assert_eq!(a.cut_vertices, vec![v]);
        assert_eq!(a.free_ends, 1);
    }
}
