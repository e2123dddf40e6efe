//! Finite-stage non-planarity certificates: inside the part of a tower
//! sitting over any halfway basic open set, two levels up, nine paths
//! through the constant blocks assemble into a subdivided complete
//! bipartite graph on three plus three branch vertices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::connector::{ConnectorMap, SpecPoint};
use super::path::{emit_move, validate_path, DyadicPath, PathToken, Segment};
use super::{BlockClass, Tower, TowerError, XOrigin, YOrigin, UNDEF};
use crate::dyadic::Dyadic;
use crate::spectrum::k33::{find_k33, verify_k33, K33Outcome, K33Witness};
use crate::spectrum::{Endpoint, TopGraph, VertexKind};

#[derive(Debug, Error)]
pub enum K33Error {
    #[error("tower too shallow: need stages up to level {0}")]
    TooShallow(usize),
    #[error("missing halfway blocks: found {found} constant blocks over the base edge, need 9")]
    MissingMu { found: usize },
    #[error("no three lower-half blocks with pairwise distinct values over the anchor edge")]
    MissingNuLower,
    #[error("no three upper-half blocks with pairwise distinct values over the anchor edge")]
    MissingNuUpper,
    #[error("no matching block for path ({i},{j})")]
    NoMatchingBlock { i: usize, j: usize },
    #[error("witness verification failed: {0}")]
    Verify(String),
    #[error("projection audit failed: {0}")]
    Projection(String),
    #[error(transparent)]
    Tower(#[from] TowerError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct K33Report {
    pub base_level: u32,
    pub base_edge: u32,
    /// The nine paths at level `base_level + 2`, row-major.
    pub paths: Vec<DyadicPath>,
    /// Branch vertices at level `base_level + 2`.
    pub left: [u32; 3],
    pub right: [u32; 3],
    /// The witness subgraph and its re-verified subdivision witness.
    pub graph: TopGraph,
    pub witness: K33Witness,
}

/// Builds the certificate over the basic open set `interval x {y}` at the
/// given level; the interval must contain the halfway value.
pub fn k33_witness(
    tower: &Tower,
    level: usize,
    interval: (Dyadic, Dyadic),
    y: u32,
) -> Result<K33Report, K33Error> {
    assert!(
        interval.0 < Dyadic::HALF && Dyadic::HALF < interval.1,
        "basic open set must contain the halfway value"
    );
    if tower.depth() < level + 2 {
        return Err(K33Error::TooShallow(level + 2));
    }
    let conn1 = tower.connector(level);
    let conn2 = tower.connector(level + 1);
    let mid = conn1.upper;
    let top = conn2.upper;

    // nine constant blocks over the block of y
    let p = conn1.lower.y_p[y as usize];
    let mus: Vec<u32> = (0..mid.blocks.len() as u32)
        .filter(|&b| {
            let info = mid.blocks[b as usize];
            info.p == p && info.class.is_const()
        })
        .take(9)
        .collect();
    if mus.len() < 9 {
        return Err(K33Error::MissingMu { found: mus.len() });
    }
    // the nine halfway edges e_ij at the middle level
    let e: Vec<u32> = mus.iter().map(|&b| conn1.block_slot(b, y)).collect();
    let anchor = e[0];

    // three lower-half blocks with pairwise distinct values over the anchor
    let pick_distinct = |class: BlockClass, r: usize| -> Option<Vec<(u32, u32)>> {
        let mut picked: Vec<(u32, u32)> = Vec::new();
        for b in 0..top.blocks.len() as u32 {
            let info = top.blocks[b as usize];
            if info.class != class || info.p != mid.y_p[anchor as usize] {
                continue;
            }
            let slot = conn2.block_slot(b, anchor);
            let x = top.b[r][slot as usize];
            if x == UNDEF {
                continue;
            }
            if picked.iter().all(|&(_, px)| px != x) {
                picked.push((b, x));
                if picked.len() == 3 {
                    return Some(picked);
                }
            }
        }
        None
    };
    let nus_low = pick_distinct(BlockClass::PlusLower, 0).ok_or(K33Error::MissingNuLower)?;
    let nus_up = pick_distinct(BlockClass::PlusUpper, 1).ok_or(K33Error::MissingNuUpper)?;
    let left = [nus_low[0].1, nus_low[1].1, nus_low[2].1];
    let right = [nus_up[0].1, nus_up[1].1, nus_up[2].1];

    // per (i, j) and middle edge e_ij: blocks hitting the branch values
    let mut paths = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            let eij = e[3 * i + j];
            let find_block = |class: BlockClass, r: usize, want: u32| -> Option<u32> {
                (0..top.blocks.len() as u32).find(|&b| {
                    let info = top.blocks[b as usize];
                    if info.class != class || info.p != mid.y_p[eij as usize] {
                        return false;
                    }
                    let slot = conn2.block_slot(b, eij);
                    top.b[r][slot as usize] == want
                })
            };
            let nu_low = find_block(BlockClass::PlusLower, 0, left[i])
                .ok_or(K33Error::NoMatchingBlock { i, j })?;
            let nu_up = find_block(BlockClass::PlusUpper, 1, right[j])
                .ok_or(K33Error::NoMatchingBlock { i, j })?;
            let slot_low = conn2.block_slot(nu_low, eij);
            let slot_up = conn2.block_slot(nu_up, eij);
            // bridge through the embedded copy when the two halfway
            // vertices differ
            let m_ij = top.b[1][slot_low as usize];
            let e_ij_0 = top.b[0][slot_up as usize];
            let mut tokens = Vec::new();
            emit_move(&mut tokens, slot_low, Dyadic::ZERO, Dyadic::ONE);
            tokens.push(PathToken {
                y: slot_low,
                seg: Segment::Stay(Dyadic::ONE),
            });
            if m_ij != e_ij_0 {
                let emb = conn2
                    .embedded_slot(m_ij)
                    .expect("path towers carry the embedded copy");
                if top.b[1][emb as usize] != e_ij_0 {
                    return Err(K33Error::Verify(format!(
                        "embedded edge over x{m_ij} does not reach x{e_ij_0}"
                    )));
                }
                emit_move(&mut tokens, emb, Dyadic::ZERO, Dyadic::ONE);
                tokens.push(PathToken {
                    y: emb,
                    seg: Segment::Stay(Dyadic::ONE),
                });
            }
            emit_move(&mut tokens, slot_up, Dyadic::ZERO, Dyadic::ONE);
            let path = DyadicPath {
                tokens,
                p3_start: true,
                p3_end: true,
                closure: false,
            };
            validate_path(top, &path).map_err(|e| K33Error::Verify(e.to_string()))?;
            paths.push(path);
        }
    }

    // projection audit: every token projects into the basic open set after
    // two steps
    for path in &paths {
        for tok in &path.tokens {
            let probe = match tok.seg {
                Segment::Stay(v) => top.point(tok.y, v),
                Segment::Move { from, to } => {
                    // midpoint of the move stays interior
                    let mid_t = from.add(&to).halved();
                    SpecPoint::Interior { y: tok.y, t: mid_t }
                }
            };
            let down1 = conn2.project(probe);
            let down0 = conn1.project(down1);
            match down0 {
                SpecPoint::Interior { y: ly, t } => {
                    if ly != y || t <= interval.0 || t >= interval.1 {
                        return Err(K33Error::Projection(format!(
                            "token projects to [{t}, y{ly}] outside the basic open set"
                        )));
                    }
                }
                other => {
                    return Err(K33Error::Projection(format!(
                        "token projects to {other:?}"
                    )))
                }
            }
        }
    }

    // assemble the witness subgraph and re-verify with the generic detector
    let (graph, witness) = assemble_graph(top, &paths, &left, &right)?;
    Ok(K33Report {
        base_level: level as u32,
        base_edge: y,
        paths,
        left,
        right,
        graph,
        witness,
    })
}

fn assemble_graph(
    top: &super::TowerStage,
    paths: &[DyadicPath],
    left: &[u32; 3],
    right: &[u32; 3],
) -> Result<(TopGraph, K33Witness), K33Error> {
    let mut g = TopGraph::default();
    let mut vmap = std::collections::BTreeMap::new();
    let vertex = |g: &mut TopGraph, vmap: &mut std::collections::BTreeMap<u32, u32>, x: u32| {
        *vmap
            .entry(x)
            .or_insert_with(|| g.add_vertex(VertexKind::XClass, format!("x{x}")))
    };
    // one graph edge per distinct traversed edge slot
    let mut slots: Vec<u32> = paths
        .iter()
        .flat_map(|p| p.tokens.iter())
        .filter(|t| matches!(t.seg, Segment::Move { .. }))
        .map(|t| t.y)
        .collect();
    slots.sort_unstable();
    slots.dedup();
    for y in slots {
        let a = top.b[0][y as usize];
        let b = top.b[1][y as usize];
        debug_assert!(a != UNDEF && b != UNDEF);
        let va = vertex(&mut g, &mut vmap, a);
        let vb = vertex(&mut g, &mut vmap, b);
        g.add_edge(
            Endpoint::Attached(va),
            Endpoint::Attached(vb),
            format!("y{y}"),
            None,
        );
    }
    match find_k33(&g) {
        K33Outcome::Found(w) => {
            verify_k33(&g, &w).map_err(K33Error::Verify)?;
            // the six branch vertices must be exactly the chosen ones
            let mut got: Vec<u32> = w.left.iter().chain(w.right.iter()).copied().collect();
            got.sort_unstable();
            let mut want: Vec<u32> = left
                .iter()
                .chain(right.iter())
                .map(|x| vmap[x])
                .collect();
            want.sort_unstable();
            if got != want {
                return Err(K33Error::Verify(
                    "detected branch vertices differ from the construction".into(),
                ));
            }
            Ok((g, w))
        }
        other => Err(K33Error::Verify(format!(
            "generic detector did not confirm the witness: {other:?}"
        ))),
    }
}

/// Basic-open preimage growth: one step of the interval-halving argument
/// behind local path-connectedness. Returns, per upper edge over the given
/// lower edge, the parameter interval projecting into `interval`.
pub fn basic_open_preimage(
    conn: &ConnectorMap,
    interval: (Dyadic, Dyadic),
    ly: u32,
) -> Vec<(u32, (Dyadic, Dyadic))> {
    let mut out = Vec::new();
    for (bid, info) in conn.upper.blocks.iter().enumerate() {
        if info.p != conn.lower.y_p[ly as usize] {
            continue;
        }
        let lambda = info.class.lambda();
        if lambda.is_constant() {
            if interval.0 < Dyadic::HALF && Dyadic::HALF < interval.1 {
                out.push((
                    conn.block_slot(bid as u32, ly),
                    (Dyadic::ZERO, Dyadic::ONE),
                ));
            }
            continue;
        }
        let (ilo, ihi) = lambda.image();
        let lo = interval.0.max(ilo);
        let hi = interval.1.min(ihi);
        if lo < hi {
            let a = lambda.invert(&lo).unwrap();
            let b = lambda.invert(&hi).unwrap();
            out.push((
                conn.block_slot(bid as u32, ly),
                (a.min(b), a.max(b)),
            ));
        }
    }
    let _ = XOrigin::Seed;
    let _ = YOrigin::Seed;
    out
}
