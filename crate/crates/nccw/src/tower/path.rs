//! Exact dyadic path tokens, their invariants, the lifting algorithm for
//! connector maps, and in-stage path construction.
//!
//! Paths are token lists, not sampled curves: every reparametrisation in
//! sight is affine with dyadic coefficients, so projection identities are
//! decided exactly. Stops are materialized only at the three values
//! `0, 1/2, 1` where lifting switches edges; pauses at other dyadic values
//! never influence any downstream check.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::connector::{ConnectorMap, FiberElem, SpecPoint};
use super::{BlockClass, TowerStage, YOrigin, UNDEF};
use crate::dyadic::Dyadic;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Segment {
    Stay(Dyadic),
    Move { from: Dyadic, to: Dyadic },
}

impl Segment {
    pub fn start(&self) -> Dyadic {
        match self {
            Segment::Stay(v) => *v,
            Segment::Move { from, .. } => *from,
        }
    }

    pub fn end(&self) -> Dyadic {
        match self {
            Segment::Stay(v) => *v,
            Segment::Move { to, .. } => *to,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct PathToken {
    pub y: u32,
    pub seg: Segment,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DyadicPath {
    pub tokens: Vec<PathToken>,
    /// Start value is not a stop (the path leaves immediately).
    pub p3_start: bool,
    pub p3_end: bool,
    /// Allow free-end points (the end compactification).
    pub closure: bool,
}

#[derive(Debug, Error)]
pub enum PathError {
    #[error("path is empty")]
    Empty,
    #[error("malformed token {idx}: {detail}")]
    Malformed { idx: usize, detail: String },
    #[error("tokens {idx} and next do not glue")]
    Gluing { idx: usize },
    #[error("missing stop at token {idx}")]
    MissingStop { idx: usize },
    #[error("no stop value in 0, 1/2, 1 (P2)")]
    NoSpecialStop,
    #[error("endpoint projection mismatch: {0}")]
    EndpointMismatch(String),
    #[error("no admissible lift block for tokens {0}..{1}")]
    NoBlock(usize, usize),
    #[error("no route through the fiber over {0:?}")]
    NoRoute(String),
    #[error("points lie in distinct components")]
    Disconnected,
}

impl DyadicPath {
    pub fn start_point(&self, stage: &TowerStage) -> SpecPoint {
        let t = &self.tokens[0];
        stage.point(t.y, t.seg.start())
    }

    pub fn end_point(&self, stage: &TowerStage) -> SpecPoint {
        let t = self.tokens.last().unwrap();
        stage.point(t.y, t.seg.end())
    }

    pub fn is_constant(&self) -> bool {
        self.tokens
            .iter()
            .all(|t| matches!(t.seg, Segment::Stay(_)))
    }
}

fn is_special(v: &Dyadic) -> bool {
    v.is_special()
}

/// Checks the path invariants: monotone moves split at the halfway value,
/// token gluing as spectrum points, explicit stops at special values
/// (except at flagged ends), and the presence of a special stop unless the
/// path is constant.
pub fn validate_path(stage: &TowerStage, path: &DyadicPath) -> Result<(), PathError> {
    if path.tokens.is_empty() {
        return Err(PathError::Empty);
    }
    let n = path.tokens.len();
    for (idx, tok) in path.tokens.iter().enumerate() {
        if tok.y as usize >= stage.num_y() {
            return Err(PathError::Malformed {
                idx,
                detail: "edge out of range".into(),
            });
        }
        match tok.seg {
            Segment::Stay(v) => {
                if !v.in_unit_interval() {
                    return Err(PathError::Malformed {
                        idx,
                        detail: "stay value outside [0,1]".into(),
                    });
                }
            }
            Segment::Move { from, to } => {
                if from == to || !from.in_unit_interval() || !to.in_unit_interval() {
                    return Err(PathError::Malformed {
                        idx,
                        detail: "degenerate or out-of-range move".into(),
                    });
                }
                let (lo, hi) = (from.min(to), from.max(to));
                if lo < Dyadic::HALF && Dyadic::HALF < hi {
                    return Err(PathError::Malformed {
                        idx,
                        detail: "move crosses 1/2 without a stop".into(),
                    });
                }
            }
        }
        // free-end discipline
        if !path.closure {
            for (r, v) in [(0usize, tok.seg.start()), (1, tok.seg.end())] {
                let boundary = if r == 0 { v.is_zero() } else { v.is_one() };
                let other = if r == 0 { v.is_one() } else { v.is_zero() };
                let _ = other;
                if boundary && !stage.in_dom(r, tok.y) {
                    return Err(PathError::Malformed {
                        idx,
                        detail: format!("value {r} hits a free end"),
                    });
                }
            }
        }
    }
    for idx in 0..n - 1 {
        let a = &path.tokens[idx];
        let b = &path.tokens[idx + 1];
        if stage.point(a.y, a.seg.end()) != stage.point(b.y, b.seg.start()) {
            return Err(PathError::Gluing { idx });
        }
    }
    // stop discipline for moves touching special values
    for idx in 0..n {
        if let Segment::Move { from, to } = path.tokens[idx].seg {
            let y = path.tokens[idx].y;
            if is_special(&from) {
                let exempt = idx == 0 && path.p3_start;
                if !exempt {
                    let ok = idx > 0
                        && matches!(path.tokens[idx - 1].seg, Segment::Stay(_))
                        && stage.point(path.tokens[idx - 1].y, path.tokens[idx - 1].seg.end())
                            == stage.point(y, from);
                    if !ok {
                        return Err(PathError::MissingStop { idx });
                    }
                }
            }
            if is_special(&to) {
                let exempt = idx == n - 1 && path.p3_end;
                if !exempt {
                    let ok = idx + 1 < n
                        && matches!(path.tokens[idx + 1].seg, Segment::Stay(_))
                        && stage.point(path.tokens[idx + 1].y, path.tokens[idx + 1].seg.start())
                            == stage.point(y, to);
                    if !ok {
                        return Err(PathError::MissingStop { idx });
                    }
                }
            }
        }
    }
    // (P2)
    let has_special_stop = path
        .tokens
        .iter()
        .any(|t| matches!(t.seg, Segment::Stay(v) if is_special(&v)));
    if !has_special_stop && !path.is_constant() {
        return Err(PathError::NoSpecialStop);
    }
    Ok(())
}

/// Appends a move from `from` to `to` on edge `y`, splitting at the
/// halfway value and materializing the stops around it.
pub fn emit_move(tokens: &mut Vec<PathToken>, y: u32, from: Dyadic, to: Dyadic) {
    if from == to {
        return;
    }
    let (lo, hi) = (from.min(to), from.max(to));
    if lo < Dyadic::HALF && Dyadic::HALF < hi {
        tokens.push(PathToken {
            y,
            seg: Segment::Move {
                from,
                to: Dyadic::HALF,
            },
        });
        tokens.push(PathToken {
            y,
            seg: Segment::Stay(Dyadic::HALF),
        });
        tokens.push(PathToken {
            y,
            seg: Segment::Move {
                from: Dyadic::HALF,
                to,
            },
        });
    } else {
        tokens.push(PathToken {
            y,
            seg: Segment::Move { from, to },
        });
    }
}

/// Appends a stop at `v` unless the previous token already stays there.
fn emit_stay(tokens: &mut Vec<PathToken>, y: u32, v: Dyadic) {
    if let Some(last) = tokens.last() {
        if last.y == y && last.seg == Segment::Stay(v) {
            return;
        }
    }
    tokens.push(PathToken {
        y,
        seg: Segment::Stay(v),
    });
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum Item {
    /// Maximal run of stops at one special spectrum point.
    Plateau { point_tok: usize, range: (usize, usize) },
    /// Maximal run of non-special tokens; single edge, values within one
    /// half of the interval.
    Stretch { range: (usize, usize) },
}

fn segment(stage: &TowerStage, path: &DyadicPath) -> Vec<Item> {
    let special_stay = |tok: &PathToken| matches!(tok.seg, Segment::Stay(v) if is_special(&v));
    let mut items = Vec::new();
    let n = path.tokens.len();
    let mut k = 0;
    while k < n {
        if special_stay(&path.tokens[k]) {
            let start = k;
            while k < n && special_stay(&path.tokens[k]) {
                k += 1;
            }
            items.push(Item::Plateau {
                point_tok: start,
                range: (start, k),
            });
        } else {
            let start = k;
            while k < n && !special_stay(&path.tokens[k]) {
                k += 1;
            }
            items.push(Item::Stretch { range: (start, k) });
        }
    }
    let _ = stage;
    items
}

// ---------------------------------------------------------------------------
// Lifting
// ---------------------------------------------------------------------------

/// Options for the lift; `avoid` excludes one upper point from all plateau
/// routes (the rerouting mechanism behind the local-cut-point argument).
#[derive(Clone, Default)]
pub struct LiftOptions {
    pub avoid: Option<SpecPoint>,
}

pub struct Lifted {
    pub path: DyadicPath,
    /// For each output token, the index of the base token it covers.
    pub token_map: Vec<usize>,
}

struct FiberGraph {
    /// vertices of the fiber (upper vertex ids or end markers)
    nodes: Vec<SpecPoint>,
    /// edges: (node index, node index, upper edge, from-value, to-value)
    edges: Vec<(usize, usize, u32, Dyadic, Dyadic)>,
}

impl FiberGraph {
    fn build(conn: &ConnectorMap, lower_point: SpecPoint) -> FiberGraph {
        let mut nodes: Vec<SpecPoint> = Vec::new();
        let mut edges = Vec::new();
        let node_of = |nodes: &mut Vec<SpecPoint>, p: SpecPoint| -> usize {
            if let Some(k) = nodes.iter().position(|&q| q == p) {
                k
            } else {
                nodes.push(p);
                nodes.len() - 1
            }
        };
        for elem in conn.fiber_over(lower_point) {
            match elem {
                FiberElem::Point(p) => {
                    node_of(&mut nodes, p);
                }
                FiberElem::WholeEdge { y } => {
                    let a = conn.upper.point(y, Dyadic::ZERO);
                    let b = conn.upper.point(y, Dyadic::ONE);
                    let na = node_of(&mut nodes, a);
                    let nb = node_of(&mut nodes, b);
                    edges.push((na, nb, y, Dyadic::ZERO, Dyadic::ONE));
                }
            }
        }
        FiberGraph { nodes, edges }
    }

    fn node_of_point(&self, p: SpecPoint) -> Option<usize> {
        self.nodes.iter().position(|&q| q == p)
    }

    /// Shortest route between two nodes avoiding a point; emits tokens.
    fn route(
        &self,
        from: usize,
        to: usize,
        avoid: Option<SpecPoint>,
    ) -> Option<Vec<(u32, Dyadic, Dyadic)>> {
        let blocked = |n: usize| avoid.map_or(false, |a| self.nodes[n] == a);
        if blocked(from) || blocked(to) {
            return None;
        }
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.nodes.len()];
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        seen[from] = true;
        queue.push_back(from);
        while let Some(v) = queue.pop_front() {
            if v == to {
                break;
            }
            for (eid, &(a, b, _, _, _)) in self.edges.iter().enumerate() {
                for (s, t) in [(a, b), (b, a)] {
                    if s == v && !seen[t] && !blocked(t) {
                        seen[t] = true;
                        prev[t] = Some((v, eid));
                        queue.push_back(t);
                    }
                }
            }
        }
        if from != to && prev[to].is_none() {
            return None;
        }
        let mut hops = Vec::new();
        let mut at = to;
        while at != from {
            let (v, eid) = prev[at]?;
            let (a, _b, y, t0, t1) = self.edges[eid];
            if a == v {
                hops.push((y, t0, t1));
            } else {
                hops.push((y, t1, t0));
            }
            at = v;
        }
        hops.reverse();
        Some(hops)
    }
}

/// The entry point of a fiber element for bridging: interior points get
/// walked to an edge end first.
fn entry_tokens(
    conn: &ConnectorMap,
    fg: &FiberGraph,
    point: SpecPoint,
    tokens: &mut Vec<PathToken>,
    leaving: bool,
) -> Result<usize, PathError> {
    match point {
        SpecPoint::Interior { y, t } => {
            // walk to the 0-end of the carrying fiber edge (or 1-end when
            // the 0-end is not in the fiber, which cannot happen for
            // constant edges)
            let target = conn.upper.point(y, Dyadic::ZERO);
            let node = fg
                .node_of_point(target)
                .ok_or_else(|| PathError::NoRoute(format!("{target:?} not in fiber")))?;
            if leaving {
                emit_move(tokens, y, t, Dyadic::ZERO);
                emit_stay(tokens, y, Dyadic::ZERO);
            }
            Ok(node)
        }
        p => fg
            .node_of_point(p)
            .ok_or_else(|| PathError::NoRoute(format!("{p:?} not in fiber"))),
    }
}

/// Emits bridge tokens across a plateau fiber from `from` to `to`.
fn bridge(
    conn: &ConnectorMap,
    lower_point: SpecPoint,
    from: SpecPoint,
    to: SpecPoint,
    avoid: Option<SpecPoint>,
    tokens: &mut Vec<PathToken>,
) -> Result<(), PathError> {
    if from == to {
        if let SpecPoint::Interior { y, t } = from {
            let constant_over = !matches!(conn.upper.y_origin[y as usize],
                YOrigin::Block { block, .. }
                    if !conn.upper.blocks[block as usize].class.lambda().is_constant());
            if constant_over {
                // bounce to an end so the plateau pauses at a boundary value
                emit_move(tokens, y, t, Dyadic::ZERO);
                emit_stay(tokens, y, Dyadic::ZERO);
                emit_move(tokens, y, Dyadic::ZERO, t);
            }
            // full-interval blocks sit still; the caller emits the stop
            let _ = t;
        }
        return Ok(());
    }
    let fg = FiberGraph::build(conn, lower_point);
    let nf = entry_tokens(conn, &fg, from, tokens, true)?;
    let mut tail: Vec<PathToken> = Vec::new();
    let nt = entry_tokens(conn, &fg, to, &mut tail, false)?;
    let hops = fg
        .route(nf, nt, avoid)
        .ok_or_else(|| PathError::NoRoute(format!("{lower_point:?}")))?;
    for (y, a, b) in hops {
        emit_stay(tokens, y, a);
        emit_move(tokens, y, a, b);
        emit_stay(tokens, y, b);
    }
    if let SpecPoint::Interior { y, t } = to {
        emit_stay(tokens, y, Dyadic::ZERO);
        emit_move(tokens, y, Dyadic::ZERO, t);
    }
    let _ = tail;
    Ok(())
}

/// Candidate upper blocks able to carry a stretch with values in
/// `[lo, hi]` over lower block `p`, in canonical order; `prefer` is tried
/// first when present.
fn stretch_blocks(
    conn: &ConnectorMap,
    p: usize,
    lo: Dyadic,
    hi: Dyadic,
    prefer: Option<u32>,
) -> Vec<u32> {
    let mut out = Vec::new();
    for (id, info) in conn.upper.blocks.iter().enumerate() {
        if info.p as usize != p {
            continue;
        }
        let lambda = info.class.lambda();
        if lambda.is_constant() {
            continue;
        }
        let (ilo, ihi) = lambda.image();
        if ilo <= lo && hi <= ihi {
            out.push(id as u32);
        }
    }
    if let Some(pref) = prefer {
        if let Some(pos) = out.iter().position(|&b| b == pref) {
            out.remove(pos);
            out.insert(0, pref);
        }
    }
    out
}

/// Lifts a path through the connector, matching the given endpoint lifts
/// exactly. The output consists of the reparametrised stretches joined by
/// routes through the plateau fibers.
pub fn lift_path(
    conn: &ConnectorMap,
    base: &DyadicPath,
    lift0: SpecPoint,
    lift1: SpecPoint,
    opts: &LiftOptions,
) -> Result<Lifted, PathError> {
    validate_path(conn.lower, base)?;
    if conn.project(lift0) != base.start_point(conn.lower) {
        return Err(PathError::EndpointMismatch(format!(
            "{:?} projects to {:?}, path starts at {:?}",
            lift0,
            conn.project(lift0),
            base.start_point(conn.lower)
        )));
    }
    if conn.project(lift1) != base.end_point(conn.lower) {
        return Err(PathError::EndpointMismatch(format!(
            "{:?} does not lift the end point",
            lift1
        )));
    }

    let items = segment(conn.lower, base);
    let mut tokens: Vec<PathToken> = Vec::new();
    let mut token_map: Vec<usize> = Vec::new();
    // current upper position
    let mut cur = lift0;

    let record = |tokens: &mut Vec<PathToken>,
                  token_map: &mut Vec<usize>,
                  new_from: usize,
                  base_idx: usize| {
        while token_map.len() < tokens.len() {
            token_map.push(base_idx);
            let _ = new_from;
        }
    };

    for (it_idx, item) in items.iter().enumerate() {
        match item {
            Item::Plateau { point_tok, range } => {
                let tok = &base.tokens[*point_tok];
                let lower_point = conn.lower.point(tok.y, tok.seg.start());
                // target of the bridge: the entry point of the next stretch
                // or the final lift
                let target = if it_idx + 1 < items.len() {
                    match &items[it_idx + 1] {
                        Item::Stretch { range } => {
                            stretch_entry(conn, base, range.0, cur, lift1, items.len(), it_idx)?
                        }
                        _ => unreachable!("plateaus are maximal"),
                    }
                } else {
                    lift1
                };
                let before = tokens.len();
                bridge(conn, lower_point, cur, target, opts.avoid, &mut tokens)?;
                if tokens.len() == before {
                    // the plateau must pause somewhere
                    match target {
                        SpecPoint::Vertex { .. } | SpecPoint::End { .. } => {
                            let (y, v) = upper_rep_at(conn, target, tokens.last());
                            emit_stay(&mut tokens, y, v);
                        }
                        SpecPoint::Interior { y, t } => {
                            emit_stay(&mut tokens, y, t);
                        }
                    }
                }
                record(&mut tokens, &mut token_map, before, *point_tok);
                let _ = range;
                cur = target;
            }
            Item::Stretch { range } => {
                let (s, e) = *range;
                let first = &base.tokens[s];
                let ly = first.y;
                // forced block when an endpoint lift is interior
                let forced_start = if s == 0 {
                    interior_block(conn, lift0, ly)
                } else {
                    None
                };
                let forced_end = if e == base.tokens.len() {
                    interior_block(conn, lift1, ly)
                } else {
                    None
                };
                let (lo, hi) = stretch_bounds(base, s, e);
                let prefer = match cur {
                    SpecPoint::Interior { y, .. } => match conn.upper.y_origin[y as usize] {
                        YOrigin::Block { block, .. } => Some(block),
                        _ => None,
                    },
                    _ => None,
                };
                let candidates = match (forced_start, forced_end) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(PathError::NoBlock(s, e));
                    }
                    (Some(a), _) | (_, Some(a)) => vec![a],
                    (None, None) => {
                        stretch_blocks(conn, conn.lower.y_p[ly as usize] as usize, lo, hi, prefer)
                    }
                };
                let mut placed = false;
                for blk in candidates {
                    let info = conn.upper.blocks[blk as usize];
                    let lambda = info.class.lambda();
                    let slot = conn.block_slot(blk, ly);
                    // entry point of this stretch on the chosen block
                    let entry_t = match lambda.invert(&first.seg.start()) {
                        Some(t) => t,
                        None => continue,
                    };
                    let entry_point = conn.upper.point(slot, entry_t);
                    // connect from cur: if we are mid-path the previous
                    // plateau already routed us here; at the very start cur
                    // must equal the entry point
                    if s == 0 && cur != entry_point {
                        continue;
                    }
                    if s > 0 && cur != entry_point {
                        continue;
                    }
                    // emit the reparametrised tokens
                    let before = tokens.len();
                    let mut ok = true;
                    for (bi, tok) in base.tokens[s..e].iter().enumerate() {
                        debug_assert_eq!(tok.y, ly, "stretch stays on one edge");
                        let seg = match tok.seg {
                            Segment::Stay(v) => lambda.invert(&v).map(Segment::Stay),
                            Segment::Move { from, to } => {
                                match (lambda.invert(&from), lambda.invert(&to)) {
                                    (Some(a), Some(b)) => Some(Segment::Move { from: a, to: b }),
                                    _ => None,
                                }
                            }
                        };
                        match seg {
                            Some(Segment::Move { from, to }) => {
                                // doubling maps can drive a half-interval
                                // move across the upper halfway value
                                let at = tokens.len();
                                emit_move(&mut tokens, slot, from, to);
                                for _ in at..tokens.len() {
                                    token_map.push(s + bi);
                                }
                            }
                            Some(seg) => {
                                tokens.push(PathToken { y: slot, seg });
                                token_map.push(s + bi);
                            }
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok {
                        tokens.truncate(before);
                        token_map.truncate(before);
                        continue;
                    }
                    cur = conn
                        .upper
                        .point(slot, lambda.invert(&base.tokens[e - 1].seg.end()).unwrap());
                    placed = true;
                    break;
                }
                if !placed {
                    return Err(PathError::NoBlock(s, e));
                }
            }
        }
    }
    if cur != lift1 {
        // a trailing plateau handles this; otherwise the path must already
        // end at the requested lift
        return Err(PathError::EndpointMismatch(format!(
            "lift ends at {cur:?}, requested {lift1:?}"
        )));
    }

    let lifted = DyadicPath {
        tokens,
        p3_start: base.p3_start,
        p3_end: base.p3_end,
        closure: base.closure,
    };
    validate_path(conn.upper, &lifted)?;
    verify_lift(conn, base, &lifted, &token_map)?;
    Ok(Lifted {
        path: lifted,
        token_map,
    })
}

/// The entry point of the stretch starting at base token `s`, on the block
/// the lift will use; mirrors the candidate selection in the main loop.
fn stretch_entry(
    conn: &ConnectorMap,
    base: &DyadicPath,
    s: usize,
    cur: SpecPoint,
    lift1: SpecPoint,
    n_items: usize,
    _it_idx: usize,
) -> Result<SpecPoint, PathError> {
    let _ = n_items;
    let first = &base.tokens[s];
    let ly = first.y;
    // find the stretch end
    let mut e = s;
    while e < base.tokens.len()
        && !matches!(base.tokens[e].seg, Segment::Stay(v) if is_special(&v))
    {
        e += 1;
    }
    let forced_end = if e == base.tokens.len() {
        interior_block(conn, lift1, ly)
    } else {
        None
    };
    let (lo, hi) = stretch_bounds(base, s, e);
    let prefer = match cur {
        SpecPoint::Interior { y, .. } => match conn.upper.y_origin[y as usize] {
            YOrigin::Block { block, .. } => Some(block),
            _ => None,
        },
        _ => None,
    };
    let candidates = match forced_end {
        Some(b) => vec![b],
        None => stretch_blocks(conn, conn.lower.y_p[ly as usize] as usize, lo, hi, prefer),
    };
    for blk in candidates {
        let info = conn.upper.blocks[blk as usize];
        let lambda = info.class.lambda();
        if let Some(t) = lambda.invert(&first.seg.start()) {
            let slot = conn.block_slot(blk, ly);
            return Ok(conn.upper.point(slot, t));
        }
    }
    Err(PathError::NoBlock(s, e))
}

fn stretch_bounds(base: &DyadicPath, s: usize, e: usize) -> (Dyadic, Dyadic) {
    let mut lo = base.tokens[s].seg.start();
    let mut hi = lo;
    for tok in &base.tokens[s..e] {
        for v in [tok.seg.start(), tok.seg.end()] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// When an endpoint lift is an interior point over the stretch edge, the
/// block is forced.
fn interior_block(conn: &ConnectorMap, lift: SpecPoint, ly: u32) -> Option<u32> {
    match lift {
        SpecPoint::Interior { y, .. } => match conn.upper.y_origin[y as usize] {
            YOrigin::Block { block, y: base_y } if base_y == ly => Some(block),
            _ => None,
        },
        _ => None,
    }
}

/// A token-level representative of an upper vertex: some edge end glued to
/// it (preferring the previous token's edge).
fn upper_rep(conn: &ConnectorMap, p: SpecPoint) -> (u32, Dyadic) {
    upper_rep_at(conn, p, None)
}

fn upper_rep_at(conn: &ConnectorMap, p: SpecPoint, last: Option<&PathToken>) -> (u32, Dyadic) {
    match p {
        SpecPoint::Interior { y, t } => (y, t),
        SpecPoint::End { y, r } => (y, if r == 0 { Dyadic::ZERO } else { Dyadic::ONE }),
        SpecPoint::Vertex { x } => {
            if let Some(tok) = last {
                for (r, v) in [(0usize, Dyadic::ZERO), (1, Dyadic::ONE)] {
                    if conn.upper.b[r][tok.y as usize] == x {
                        return (tok.y, v);
                    }
                }
            }
            for y in 0..conn.upper.num_y() as u32 {
                for (r, v) in [(0usize, Dyadic::ZERO), (1, Dyadic::ONE)] {
                    if conn.upper.b[r][y as usize] == x {
                        return (y, v);
                    }
                }
            }
            unreachable!("vertex with no incident edge")
        }
    }
}

/// Token-wise projection audit, in exact dyadic arithmetic: the output
/// tokens covering one base token must project onto a chain reproducing
/// that token's trace; bridge tokens must sit over the base plateau point.
pub fn verify_lift(
    conn: &ConnectorMap,
    base: &DyadicPath,
    lifted: &DyadicPath,
    token_map: &[usize],
) -> Result<(), PathError> {
    if token_map.len() != lifted.tokens.len() {
        return Err(PathError::EndpointMismatch("token map length".into()));
    }
    if token_map.windows(2).any(|w| w[1] < w[0]) {
        return Err(PathError::EndpointMismatch("token map not monotone".into()));
    }
    let mut covered = vec![false; base.tokens.len()];
    // group output tokens per base token
    let mut k = 0usize;
    while k < lifted.tokens.len() {
        let bidx = token_map[k];
        let mut end = k;
        while end < lifted.tokens.len() && token_map[end] == bidx {
            end += 1;
        }
        covered[bidx] = true;
        let btok = &base.tokens[bidx];
        let group = &lifted.tokens[k..end];
        let moving = group.iter().any(|t| {
            matches!(t.seg, Segment::Move { .. })
                && matches!(conn.upper.y_origin[t.y as usize], YOrigin::Block { block, .. }
                    if !conn.upper.blocks[block as usize].class.lambda().is_constant())
        });
        if moving {
            // stretch group: projections chain across the base segment
            let mut expect = btok.seg.start();
            for (off, tok) in group.iter().enumerate() {
                let (block, ly) = match conn.upper.y_origin[tok.y as usize] {
                    YOrigin::Block { block, y } => (block, y),
                    other => {
                        return Err(PathError::EndpointMismatch(format!(
                            "stretch token {} with origin {other:?}",
                            k + off
                        )))
                    }
                };
                if ly != btok.y {
                    return Err(PathError::EndpointMismatch(format!(
                        "token {} projects to edge y{ly}, base on y{}",
                        k + off,
                        btok.y
                    )));
                }
                let lambda = conn.upper.blocks[block as usize].class.lambda();
                let pa = lambda.apply(&tok.seg.start());
                let pb = lambda.apply(&tok.seg.end());
                if pa != expect {
                    return Err(PathError::EndpointMismatch(format!(
                        "token {}: projection starts at {pa}, expected {expect}",
                        k + off
                    )));
                }
                expect = pb;
            }
            if expect != btok.seg.end() {
                return Err(PathError::EndpointMismatch(format!(
                    "base token {bidx}: projected chain ends at {expect}, base at {}",
                    btok.seg.end()
                )));
            }
        } else {
            // bridge group: every token projects to the plateau point
            if !matches!(btok.seg, Segment::Stay(_)) {
                return Err(PathError::EndpointMismatch(format!(
                    "bridge tokens mapped to a moving base token {bidx}"
                )));
            }
            let want = conn.lower.point(btok.y, btok.seg.start());
            for (off, tok) in group.iter().enumerate() {
                let got = match tok.seg {
                    Segment::Stay(v) => conn.project(conn.upper.point(tok.y, v)),
                    Segment::Move { from, to } => {
                        // constant-over edge: probe the interior midpoint
                        let mid = from.add(&to).halved();
                        conn.project(SpecPoint::Interior { y: tok.y, t: mid })
                    }
                };
                if got != want {
                    return Err(PathError::EndpointMismatch(format!(
                        "bridge token {}: {got:?} vs {want:?}",
                        k + off
                    )));
                }
            }
        }
        k = end;
    }
    // coverage: every moving or non-special base token must be covered;
    // a run of stops at one special point needs one covered member
    let special_stay = |tok: &PathToken| matches!(tok.seg, Segment::Stay(v) if v.is_special());
    let mut idx = 0usize;
    while idx < base.tokens.len() {
        if special_stay(&base.tokens[idx]) {
            let start = idx;
            while idx < base.tokens.len() && special_stay(&base.tokens[idx]) {
                idx += 1;
            }
            if !covered[start..idx].iter().any(|&c| c) {
                return Err(PathError::EndpointMismatch(format!(
                    "plateau at base tokens {start}..{idx} not covered"
                )));
            }
        } else {
            if !covered[idx] {
                return Err(PathError::EndpointMismatch(format!(
                    "base token {idx} not covered"
                )));
            }
            idx += 1;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// In-stage path construction
// ---------------------------------------------------------------------------

/// Builds a stop-disciplined path between two spectrum points of one
/// stage, walking through the vertex graph.
pub fn connect_points(
    stage: &TowerStage,
    a: SpecPoint,
    b: SpecPoint,
) -> Result<DyadicPath, PathError> {
    if a == b {
        let (y, v) = match a {
            SpecPoint::Interior { y, t } => (y, t),
            SpecPoint::Vertex { x } => vertex_rep(stage, x),
            SpecPoint::End { y, r } => (y, if r == 0 { Dyadic::ZERO } else { Dyadic::ONE }),
        };
        return Ok(DyadicPath {
            tokens: vec![PathToken {
                y,
                seg: Segment::Stay(v),
            }],
            p3_start: false,
            p3_end: false,
            closure: matches!(a, SpecPoint::End { .. }),
        });
    }
    let mut tokens: Vec<PathToken> = Vec::new();
    // reduce a to a vertex
    let va = match a {
        SpecPoint::Vertex { x } => x,
        SpecPoint::Interior { y, t } => {
            let (r, target) = nearest_glued_end(stage, y);
            emit_move(&mut tokens, y, t, target);
            emit_stay(&mut tokens, y, target);
            stage.b[r][y as usize]
        }
        SpecPoint::End { .. } => return Err(PathError::Disconnected),
    };
    let vb_tokens_rev;
    let vb = match b {
        SpecPoint::Vertex { x } => {
            vb_tokens_rev = Vec::new();
            x
        }
        SpecPoint::Interior { y, t } => {
            let (r, target) = nearest_glued_end(stage, y);
            let mut tail = Vec::new();
            emit_stay(&mut tail, y, target);
            emit_move(&mut tail, y, target, t);
            vb_tokens_rev = tail;
            stage.b[r][y as usize]
        }
        SpecPoint::End { .. } => return Err(PathError::Disconnected),
    };

    // BFS on vertices through fully glued edges
    let nx = stage.num_x();
    let mut adj: Vec<Vec<(u32, u32)>> = vec![Vec::new(); nx];
    for y in 0..stage.num_y() as u32 {
        if let (Some(x0), Some(x1)) = (stage.b_of(0, y), stage.b_of(1, y)) {
            adj[x0 as usize].push((y, x1));
            adj[x1 as usize].push((y, x0));
        }
    }
    let mut prev: Vec<Option<(u32, u32)>> = vec![None; nx];
    let mut seen = vec![false; nx];
    let mut queue = VecDeque::new();
    seen[va as usize] = true;
    queue.push_back(va);
    while let Some(v) = queue.pop_front() {
        if v == vb {
            break;
        }
        for &(y, w) in &adj[v as usize] {
            if !seen[w as usize] {
                seen[w as usize] = true;
                prev[w as usize] = Some((v, y));
                queue.push_back(w);
            }
        }
    }
    if va != vb && prev[vb as usize].is_none() {
        return Err(PathError::Disconnected);
    }
    let mut hops = Vec::new();
    let mut at = vb;
    while at != va {
        let (v, y) = prev[at as usize].unwrap();
        hops.push((y, v, at));
        at = v;
    }
    hops.reverse();
    for (y, from_x, _to_x) in hops {
        let (t0, t1) = if stage.b_of(0, y) == Some(from_x) {
            (Dyadic::ZERO, Dyadic::ONE)
        } else {
            (Dyadic::ONE, Dyadic::ZERO)
        };
        emit_stay(&mut tokens, y, t0);
        emit_move(&mut tokens, y, t0, t1);
        emit_stay(&mut tokens, y, t1);
    }
    if tokens.is_empty() {
        let (y, v) = vertex_rep(stage, va);
        emit_stay(&mut tokens, y, v);
    }
    tokens.extend(vb_tokens_rev);
    let path = DyadicPath {
        tokens,
        p3_start: false,
        p3_end: false,
        closure: false,
    };
    validate_path(stage, &path)?;
    Ok(path)
}

fn vertex_rep(stage: &TowerStage, x: u32) -> (u32, Dyadic) {
    for y in 0..stage.num_y() as u32 {
        if stage.b_of(0, y) == Some(x) {
            return (y, Dyadic::ZERO);
        }
        if stage.b_of(1, y) == Some(x) {
            return (y, Dyadic::ONE);
        }
    }
    unreachable!("isolated vertex")
}

fn nearest_glued_end(stage: &TowerStage, y: u32) -> (usize, Dyadic) {
    if stage.in_dom(0, y) {
        (0, Dyadic::ZERO)
    } else {
        debug_assert!(stage.in_dom(1, y));
        (1, Dyadic::ONE)
    }
}

/// Random stop-disciplined path on a stage; always contains a special stop.
pub fn random_path<R: Rng>(stage: &TowerStage, rng: &mut R, steps: usize) -> DyadicPath {
    let random_dyadic = |rng: &mut R| -> Dyadic {
        let e = rng.gen_range(0..=3u32);
        let num = rng.gen_range(0..=(1i64 << e));
        Dyadic::new(num, e)
    };
    // random glued start
    let y0 = loop {
        let y = rng.gen_range(0..stage.num_y()) as u32;
        if stage.in_dom(0, y) {
            break y;
        }
    };
    let mut tokens = Vec::new();
    let mut y = y0;
    let mut t = random_dyadic(rng);
    // keep away from free ends
    while (t.is_one() && !stage.in_dom(1, y)) || (t.is_zero() && !stage.in_dom(0, y)) {
        t = random_dyadic(rng);
    }
    let mut visited_special = false;
    emit_stay(&mut tokens, y, t);
    for _ in 0..steps {
        let target = {
            let mut v = random_dyadic(rng);
            while (v.is_one() && !stage.in_dom(1, y)) || v == t {
                v = random_dyadic(rng);
            }
            v
        };
        emit_move(&mut tokens, y, t, target);
        emit_stay(&mut tokens, y, target);
        if target.is_special() {
            visited_special = true;
        }
        t = target;
        // hop through a vertex when at a glued end
        let r = if t.is_zero() {
            Some(0)
        } else if t.is_one() {
            Some(1)
        } else {
            None
        };
        if let Some(r) = r {
            if rng.gen_bool(0.7) {
                let x = stage.b[r][y as usize];
                let incident: Vec<(u32, usize)> = (0..stage.num_y() as u32)
                    .filter_map(|cy| {
                        for cr in 0..2 {
                            if stage.b[cr][cy as usize] == x {
                                return Some((cy, cr));
                            }
                        }
                        None
                    })
                    .collect();
                let (ny, nr) = incident[rng.gen_range(0..incident.len())];
                y = ny;
                t = if nr == 0 { Dyadic::ZERO } else { Dyadic::ONE };
                emit_stay(&mut tokens, y, t);
            }
        }
    }
    if !visited_special {
        // route to the nearest special value and pause there
        let target = if t < Dyadic::HALF {
            Dyadic::ZERO
        } else {
            Dyadic::HALF
        };
        let target = if target.is_zero() && !stage.in_dom(0, y) {
            Dyadic::HALF
        } else {
            target
        };
        emit_move(&mut tokens, y, t, target);
        emit_stay(&mut tokens, y, target);
    }
    let path = DyadicPath {
        tokens,
        p3_start: false,
        p3_end: false,
        closure: false,
    };
    debug_assert!(validate_path(stage, &path).is_ok());
    path
}

/// All lift choices of a lower point, flattened to sample from: fiber
/// points plus a few interior parameters of fiber edges.
pub fn fiber_points(conn: &ConnectorMap, p: SpecPoint) -> Vec<SpecPoint> {
    let mut out = Vec::new();
    for elem in conn.fiber_over(p) {
        match elem {
            FiberElem::Point(pt) => out.push(pt),
            FiberElem::WholeEdge { y } => {
                out.push(SpecPoint::Interior {
                    y,
                    t: Dyadic::new(1, 2),
                });
                out.push(SpecPoint::Interior {
                    y,
                    t: Dyadic::new(1, 2).halved(),
                });
            }
        }
    }
    out.sort_by_key(|p| match p {
        SpecPoint::Vertex { x } => (0u8, *x, Dyadic::ZERO),
        SpecPoint::Interior { y, t } => (1, *y, *t),
        SpecPoint::End { y, r } => (2, *y, Dyadic::from_int(*r as i64)),
    });
    out.dedup();
    out
}

/// Groups lower copies by target positions, used by the condition sweeps.
pub fn position_of(upper: &TowerStage, x: u32) -> Option<(u32, u32)> {
    match upper.x_origin[x as usize] {
        super::XOrigin::FCopy { d, .. } => Some((upper.x_i[x as usize], d)),
        _ => None,
    }
}

/// Convenience: a map from `(class, r)` to the duty blocks, for sweeps.
pub fn blocks_by_class(upper: &TowerStage) -> BTreeMap<(BlockClass, u32), Vec<u32>> {
    let mut out: BTreeMap<(BlockClass, u32), Vec<u32>> = BTreeMap::new();
    for (id, info) in upper.blocks.iter().enumerate() {
        out.entry((info.class, info.p)).or_default().push(id as u32);
    }
    out
}

pub fn undef_guard(v: u32) -> Option<u32> {
    if v == UNDEF {
        None
    } else {
        Some(v)
    }
}
