//! Boundary data of one-dimensional NCCW complexes and its dual
//! combinatorics.
//!
//! An instance is a pair of finite-dimensional algebras `E = ⊕_p E^p`,
//! `F = ⊕_i F^i` together with two boundary maps, recorded purely by block
//! sizes, multiplicities `m_r(p,i)` and a diagonal slot layout. Dualizing
//! produces finite sets `Y` (diagonal slots of `E`, the edges) and `X`
//! (diagonal slots of `F`, the vertices) with partial source/target maps
//! `b0`, `b1`. Twisting the target by a block-preserving permutation of `Y`
//! yields the twisted graphs that classify diagonals up to conjugacy.

pub mod io;

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{CopyId, IIdx, PIdx, XIdx, YIdx};
use crate::perm::Perm;

pub const R0: usize = 0;
pub const R1: usize = 1;

/// Reference of one diagonal slot of `E^p` into the layout: which
/// `F`-summand, which multiplicity copy, and which position inside the copy.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SlotRef {
    pub i: IIdx,
    pub copy: u32,
    pub pos: u32,
}

/// Per `(r, p)`: for each diagonal slot of `E^p`, the image slot of the
/// boundary map if the slot is covered.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Layout {
    /// `assign[r][p][slot]`.
    pub assign: [Vec<Vec<Option<SlotRef>>>; 2],
}

/// Block sizes and boundary multiplicities of a 1-dimensional NCCW complex.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct NccwData {
    /// Matrix size `{p}` of each `E^p`.
    pub p_sizes: Vec<u32>,
    /// Matrix size `[i]` of each `F^i`.
    pub i_sizes: Vec<u32>,
    /// `mult[r][p][i] = m_r(p,i)`.
    pub mult: [Vec<Vec<u32>>; 2],
    pub layout: Layout,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty block list")]
    Empty,
    #[error("zero block size at {0}")]
    ZeroSize(String),
    #[error("multiplicity table shape mismatch")]
    MultShape,
    #[error("layout shape mismatch at (r={r}, p={p})")]
    LayoutShape { r: usize, p: usize },
    #[error("layout collision or gap at (r={r}, p={p}), copy ({i:?},{copy})")]
    LayoutBroken { r: usize, p: usize, i: IIdx, copy: u32 },
    #[error("twist permutation crosses p-blocks at y{0}")]
    TwistCrossesBlocks(u32),
    #[error("twist permutation has wrong length {got}, expected {want}")]
    TwistLength { got: usize, want: usize },
}

/// Outcome of structural validation, reported rather than panicked.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Per `(r, p)`: slot budget `sum_i m_r(p,i)*[i]` and whether it is
    /// within `{p}` (equality means the boundary map is unital there).
    pub slot_count_ok: [Vec<bool>; 2],
    pub unital: [Vec<bool>; 2],
    /// Injectivity of `(beta_0, beta_1)`: every `i` is hit by some
    /// multiplicity.
    pub a2_per_i: Vec<bool>,
    /// The unique block with non-unital `beta_1` when everything else is
    /// unital (stably projectionless shape).
    pub grave: Option<PIdx>,
    pub errors: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
            && self.slot_count_ok.iter().all(|v| v.iter().all(|&b| b))
            && self.a2_per_i.iter().all(|&b| b)
    }

    pub fn fully_unital(&self) -> bool {
        self.unital.iter().all(|v| v.iter().all(|&b| b))
    }
}

impl NccwData {
    /// Builds data with the canonical layout: within each `(r, p)`, copies
    /// ordered by `(i, copy)`, occupying consecutive slots from the first
    /// free one.
    pub fn with_canonical_layout(
        p_sizes: Vec<u32>,
        i_sizes: Vec<u32>,
        mult: [Vec<Vec<u32>>; 2],
    ) -> NccwData {
        let layout = canonical_layout(&p_sizes, &i_sizes, &mult);
        NccwData {
            p_sizes,
            i_sizes,
            mult,
            layout,
        }
    }

    pub fn num_p(&self) -> usize {
        self.p_sizes.len()
    }

    pub fn num_i(&self) -> usize {
        self.i_sizes.len()
    }

    pub fn m(&self, r: usize, p: PIdx, i: IIdx) -> u32 {
        self.mult[r][p.idx()][i.idx()]
    }

    /// `sum_i m_r(p,i) * [i]`.
    pub fn slot_budget(&self, r: usize, p: PIdx) -> u32 {
        self.i_sizes
            .iter()
            .enumerate()
            .map(|(i, &sz)| self.mult[r][p.idx()][i] * sz)
            .sum()
    }

    pub fn is_unital_at(&self, r: usize, p: PIdx) -> bool {
        self.slot_budget(r, p) == self.p_sizes[p.idx()]
    }

    pub fn total_y(&self) -> u32 {
        self.p_sizes.iter().sum()
    }

    pub fn total_x(&self) -> u32 {
        self.i_sizes.iter().sum()
    }
}

pub fn canonical_layout(p_sizes: &[u32], i_sizes: &[u32], mult: &[Vec<Vec<u32>>; 2]) -> Layout {
    let mut assign = [Vec::new(), Vec::new()];
    for r in 0..2 {
        for (p, &psz) in p_sizes.iter().enumerate() {
            let mut slots: Vec<Option<SlotRef>> = vec![None; psz as usize];
            let mut cursor = 0usize;
            for (i, &isz) in i_sizes.iter().enumerate() {
                for copy in 0..mult[r][p][i] {
                    for pos in 0..isz {
                        if cursor < slots.len() {
                            slots[cursor] = Some(SlotRef {
                                i: IIdx(i as u32),
                                copy,
                                pos,
                            });
                        }
                        cursor += 1;
                    }
                }
            }
            assign[r].push(slots);
        }
    }
    Layout { assign }
}

/// Structural validation; reports everything it finds, never panics.
pub fn validate_nccw(data: &NccwData) -> ValidationReport {
    let np = data.num_p();
    let ni = data.num_i();
    let mut errors = Vec::new();
    if np == 0 || ni == 0 {
        errors.push("empty P or I".to_string());
    }
    for (p, &s) in data.p_sizes.iter().enumerate() {
        if s == 0 {
            errors.push(format!("{{p{p}}} = 0"));
        }
    }
    for (i, &s) in data.i_sizes.iter().enumerate() {
        if s == 0 {
            errors.push(format!("[i{i}] = 0"));
        }
    }
    for r in 0..2 {
        if data.mult[r].len() != np || data.mult[r].iter().any(|row| row.len() != ni) {
            errors.push(format!("multiplicity table shape broken at r={r}"));
        }
        if data.layout.assign[r].len() != np {
            errors.push(format!("layout shape broken at r={r}"));
        }
    }

    let mut slot_count_ok = [vec![true; np], vec![true; np]];
    let mut unital = [vec![false; np], vec![false; np]];
    if errors.is_empty() {
        for r in 0..2 {
            for p in 0..np {
                let budget = data.slot_budget(r, PIdx(p as u32));
                let psz = data.p_sizes[p];
                slot_count_ok[r][p] = budget <= psz;
                unital[r][p] = budget == psz;
                // Layout must cover exactly the budgeted copies, injectively,
                // order-preserving within each (i, copy) block.
                let slots = &data.layout.assign[r][p];
                if slots.len() != psz as usize {
                    errors.push(format!("layout length mismatch at (r={r}, p=p{p})"));
                    continue;
                }
                let mut per_copy: BTreeMap<(IIdx, u32), Vec<u32>> = BTreeMap::new();
                for slot in slots.iter().flatten() {
                    per_copy
                        .entry((slot.i, slot.copy))
                        .or_default()
                        .push(slot.pos);
                }
                for (i, &isz) in data.i_sizes.iter().enumerate() {
                    for copy in 0..data.mult[r][p][i] {
                        match per_copy.get(&(IIdx(i as u32), copy)) {
                            Some(ps) if ps.len() == isz as usize => {
                                // order-preserving: positions must appear 0..isz in slot order
                                if ps.iter().enumerate().any(|(k, &v)| v != k as u32) {
                                    errors.push(format!(
                                        "layout not order-preserving at (r={r}, p=p{p}, i=i{i}, copy {copy})"
                                    ));
                                }
                            }
                            _ => errors.push(format!(
                                "layout misses copy (r={r}, p=p{p}, i=i{i}, copy {copy})"
                            )),
                        }
                    }
                }
                let covered: usize = slots.iter().filter(|s| s.is_some()).count();
                if covered != budget as usize {
                    errors.push(format!(
                        "layout covers {covered} slots at (r={r}, p=p{p}), budget {budget}"
                    ));
                }
            }
        }
    }

    let a2_per_i: Vec<bool> = (0..ni)
        .map(|i| {
            (0..2).any(|r| (0..np).any(|p| data.mult[r][p][i] > 0))
        })
        .collect();

    // Grave index: exactly one (p, r=1) non-unital, everything else unital.
    let mut grave = None;
    if errors.is_empty() {
        let beta0_all_unital = (0..np).all(|p| unital[R0][p]);
        let non_unital_1: Vec<usize> = (0..np).filter(|&p| !unital[R1][p]).collect();
        if beta0_all_unital && non_unital_1.len() == 1 {
            grave = Some(PIdx(non_unital_1[0] as u32));
        }
    }

    ValidationReport {
        slot_count_ok,
        unital,
        a2_per_i,
        grave,
        errors,
    }
}

/// One multiplicity copy of `F^i` inside `E^p` on side `r`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CopyInfo {
    pub p: PIdx,
    pub i: IIdx,
    pub copy: u32,
}

/// Finite sets `Y`, `X` with block partitions, partial boundary maps and
/// slot-block structure.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct DualData {
    pub p_sizes: Vec<u32>,
    pub i_sizes: Vec<u32>,
    /// Block of each `Y`-slot; `Y` is laid out block-contiguously.
    pub y_p: Vec<PIdx>,
    pub x_i: Vec<IIdx>,
    /// First `Y`-slot of each `p`-block.
    pub p_start: Vec<u32>,
    pub i_start: Vec<u32>,
    /// `b[r][y]`: image vertex, when defined.
    pub b: [Vec<Option<XIdx>>; 2],
    /// `slot_block[r][y]`: the copy the slot belongs to, when covered.
    pub slot_block: [Vec<Option<CopyId>>; 2],
    pub copies: [Vec<CopyInfo>; 2],
}

impl DualData {
    pub fn num_y(&self) -> usize {
        self.y_p.len()
    }

    pub fn num_x(&self) -> usize {
        self.x_i.len()
    }

    pub fn y_block(&self, p: PIdx) -> std::ops::Range<usize> {
        let start = self.p_start[p.idx()] as usize;
        start..start + self.p_sizes[p.idx()] as usize
    }

    pub fn x_block(&self, i: IIdx) -> std::ops::Range<usize> {
        let start = self.i_start[i.idx()] as usize;
        start..start + self.i_sizes[i.idx()] as usize
    }

    pub fn x_id(&self, i: IIdx, pos: u32) -> XIdx {
        XIdx(self.i_start[i.idx()] + pos)
    }

    pub fn b_of(&self, r: usize, y: YIdx) -> Option<XIdx> {
        self.b[r][y.idx()]
    }

    /// Domain indicator `y ∈ Y_r`.
    pub fn in_dom(&self, r: usize, y: YIdx) -> bool {
        self.b[r][y.idx()].is_some()
    }

    pub fn copy_of(&self, r: usize, c: CopyId) -> CopyInfo {
        self.copies[r][c.idx()]
    }

    /// Checks the fiber-count invariants: within each copy, `(slot_block, b_r)`
    /// hits each vertex of the copy's summand exactly once, and the fiber of
    /// `b_r` over `x ∈ X^i` inside `Y^p` has exactly `m_r(p,i)` elements.
    pub fn check_fibers(&self, mult: &[Vec<Vec<u32>>; 2]) -> Result<(), String> {
        for r in 0..2 {
            let mut copy_seen: Vec<Vec<bool>> = self.copies[r]
                .iter()
                .map(|c| vec![false; self.i_sizes[c.i.idx()] as usize])
                .collect();
            let mut fiber = vec![vec![0u32; self.num_x()]; self.p_sizes.len()];
            for y in 0..self.num_y() {
                match (self.b[r][y], self.slot_block[r][y]) {
                    (Some(x), Some(c)) => {
                        let info = self.copies[r][c.idx()];
                        if self.x_i[x.idx()] != info.i {
                            return Err(format!("copy {c:?} hits foreign summand at y{y}"));
                        }
                        let pos = x.0 - self.i_start[info.i.idx()];
                        if copy_seen[c.idx()][pos as usize] {
                            return Err(format!("copy {c:?} hits {x:?} twice"));
                        }
                        copy_seen[c.idx()][pos as usize] = true;
                        fiber[self.y_p[y].idx()][x.idx()] += 1;
                    }
                    (None, None) => {}
                    _ => return Err(format!("b and slot_block disagree at (r={r}, y{y})")),
                }
            }
            for (c, seen) in copy_seen.iter().enumerate() {
                if seen.iter().any(|&b| !b) {
                    return Err(format!("copy c{c} (r={r}) not fully covered"));
                }
            }
            for (p, row) in fiber.iter().enumerate() {
                for (x, &cnt) in row.iter().enumerate() {
                    let i = self.x_i[x];
                    if cnt != mult[r][p][i.idx()] {
                        return Err(format!(
                            "fiber of b_{r} over x{x} in p{p} has {cnt} points, expected {}",
                            mult[r][p][i.idx()]
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Extracts the dual combinatorics from validated data.
pub fn dualize(data: &NccwData) -> DualData {
    let np = data.num_p();
    let ni = data.num_i();
    let mut p_start = Vec::with_capacity(np);
    let mut y_p = Vec::new();
    for p in 0..np {
        p_start.push(y_p.len() as u32);
        y_p.extend(std::iter::repeat(PIdx(p as u32)).take(data.p_sizes[p] as usize));
    }
    let mut i_start = Vec::with_capacity(ni);
    let mut x_i = Vec::new();
    for i in 0..ni {
        i_start.push(x_i.len() as u32);
        x_i.extend(std::iter::repeat(IIdx(i as u32)).take(data.i_sizes[i] as usize));
    }

    let ny = y_p.len();
    let mut b = [vec![None; ny], vec![None; ny]];
    let mut slot_block = [vec![None; ny], vec![None; ny]];
    let mut copies: [Vec<CopyInfo>; 2] = [Vec::new(), Vec::new()];
    for r in 0..2 {
        let mut copy_ids: BTreeMap<(PIdx, IIdx, u32), CopyId> = BTreeMap::new();
        for p in 0..np {
            for (slot, sref) in data.layout.assign[r][p].iter().enumerate() {
                if let Some(sref) = sref {
                    let y = p_start[p] as usize + slot;
                    let x = XIdx(i_start[sref.i.idx()] + sref.pos);
                    let key = (PIdx(p as u32), sref.i, sref.copy);
                    let cid = *copy_ids.entry(key).or_insert_with(|| {
                        copies[r].push(CopyInfo {
                            p: PIdx(p as u32),
                            i: sref.i,
                            copy: sref.copy,
                        });
                        CopyId(copies[r].len() as u32 - 1)
                    });
                    b[r][y] = Some(x);
                    slot_block[r][y] = Some(cid);
                }
            }
        }
    }

    DualData {
        p_sizes: data.p_sizes.clone(),
        i_sizes: data.i_sizes.clone(),
        y_p,
        x_i,
        p_start,
        i_start,
        b,
        slot_block,
        copies,
    }
}

/// A block-preserving permutation of `Y`, one permutation per `p`-block.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TwistPerm {
    pub per_block: Vec<Perm>,
}

impl TwistPerm {
    pub fn identity(dual: &DualData) -> TwistPerm {
        TwistPerm {
            per_block: dual
                .p_sizes
                .iter()
                .map(|&s| Perm::identity(s as usize))
                .collect(),
        }
    }

    pub fn random<R: Rng>(dual: &DualData, rng: &mut R) -> TwistPerm {
        TwistPerm {
            per_block: dual
                .p_sizes
                .iter()
                .map(|&s| Perm::random(s as usize, rng))
                .collect(),
        }
    }

    pub fn validate(&self, dual: &DualData) -> Result<(), ModelError> {
        if self.per_block.len() != dual.p_sizes.len() {
            return Err(ModelError::TwistLength {
                got: self.per_block.len(),
                want: dual.p_sizes.len(),
            });
        }
        for (p, perm) in self.per_block.iter().enumerate() {
            if perm.len() != dual.p_sizes[p] as usize {
                return Err(ModelError::TwistLength {
                    got: perm.len(),
                    want: dual.p_sizes[p] as usize,
                });
            }
        }
        Ok(())
    }

    pub fn apply(&self, dual: &DualData, y: YIdx) -> YIdx {
        let p = dual.y_p[y.idx()];
        let start = dual.p_start[p.idx()];
        YIdx(start + self.per_block[p.idx()].apply((y.0 - start) as usize) as u32)
    }

    pub fn inverse(&self) -> TwistPerm {
        TwistPerm {
            per_block: self.per_block.iter().map(|p| p.inverse()).collect(),
        }
    }

    pub fn compose(&self, other: &TwistPerm) -> TwistPerm {
        TwistPerm {
            per_block: self
                .per_block
                .iter()
                .zip(&other.per_block)
                .map(|(a, b)| a.compose(b))
                .collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.per_block.iter().all(|p| p.is_identity())
    }
}

/// Twisted target map `b_1 ∘ σ`, defined where `σ(y) ∈ Y_1`.
pub fn twisted_target(dual: &DualData, sigma: &TwistPerm, y: YIdx) -> Option<XIdx> {
    dual.b[R1][sigma.apply(dual, y).idx()]
}

/// One directed multigraph per `p`-block: edges `Y^p`, vertices all of `X`,
/// source `b0`, target `b1 ∘ σ`; missing endpoints are half-open.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledMultigraph {
    pub p: PIdx,
    /// Per edge of the block: `(source, target)`.
    pub edges: Vec<(Option<XIdx>, Option<XIdx>)>,
    pub num_x: usize,
}

pub fn twisted_graphs(dual: &DualData, sigma: &TwistPerm) -> Vec<LabeledMultigraph> {
    (0..dual.p_sizes.len())
        .map(|p| {
            let p = PIdx(p as u32);
            let edges = dual
                .y_block(p)
                .map(|y| {
                    let y = YIdx(y as u32);
                    (dual.b[R0][y.idx()], twisted_target(dual, sigma, y))
                })
                .collect();
            LabeledMultigraph {
                p,
                edges,
                num_x: dual.num_x(),
            }
        })
        .collect()
}

impl fmt::Display for LabeledMultigraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "digraph block_{} {{", self.p.0)?;
        for (k, (s, t)) in self.edges.iter().enumerate() {
            let s = s.map_or("free".to_string(), |x| format!("x{}", x.0));
            let t = t.map_or("free".to_string(), |x| format!("x{}", x.0));
            writeln!(f, "  {s} -> {t} [label=\"y{k}\"];")?;
        }
        write!(f, "}}")
    }
}

/// The running example: one 2x2 block, two 1x1 summands, all multiplicities
/// one.
pub fn example_r1() -> NccwData {
    NccwData::with_canonical_layout(
        vec![2],
        vec![1, 1],
        [vec![vec![1, 1]], vec![vec![1, 1]]],
    )
}

/// Stabilized dimension drop data for parameters `(m, n, o)`:
/// `E = M_{mno}`, `F = M_{mo} ⊕ M_{no}`, `beta_0` of multiplicity `n` into
/// the first summand, `beta_1` of multiplicity `m` into the second.
pub fn dimension_drop(m: u32, n: u32, o: u32) -> NccwData {
    NccwData::with_canonical_layout(
        vec![m * n * o],
        vec![m * o, n * o],
        [vec![vec![n, 0]], vec![vec![0, m]]],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn r1_is_valid_and_unital() {
        let data = example_r1();
        let report = validate_nccw(&data);
        assert!(report.is_valid(), "{:?}", report.errors);
        assert!(report.fully_unital());
        assert_eq!(report.grave, None);
    }

    #[test]
    fn a2_violation_flagged() {
        // An i with no nonzero multiplicity anywhere: kernel contains F^i.
        let data = NccwData::with_canonical_layout(
            vec![2],
            vec![1, 1],
            [vec![vec![2, 0]], vec![vec![2, 0]]],
        );
        let report = validate_nccw(&data);
        assert!(!report.a2_per_i[1]);
        assert!(!report.is_valid());
    }

    #[test]
    fn grave_index_detected() {
        // beta_1 non-unital exactly at the single block.
        let data = NccwData::with_canonical_layout(
            vec![3],
            vec![1],
            [vec![vec![3]], vec![vec![2]]],
        );
        let report = validate_nccw(&data);
        assert!(report.is_valid());
        assert_eq!(report.grave, Some(PIdx(0)));
    }

    #[test]
    fn dualize_r1_table() {
        let data = example_r1();
        let dual = dualize(&data);
        assert_eq!(dual.num_y(), 2);
        assert_eq!(dual.num_x(), 2);
        for y in 0..2 {
            assert_eq!(dual.b[R0][y], Some(XIdx(y as u32)));
            assert_eq!(dual.b[R1][y], Some(XIdx(y as u32)));
        }
        dual.check_fibers(&data.mult).unwrap();
    }

    #[test]
    fn dualize_non_unital_block() {
        let data = NccwData::with_canonical_layout(
            vec![3],
            vec![1],
            [vec![vec![3]], vec![vec![2]]],
        );
        let dual = dualize(&data);
        let defined: usize = (0..3).filter(|&y| dual.b[R1][y].is_some()).count();
        assert_eq!(defined, 2);
        dual.check_fibers(&data.mult).unwrap();
    }

    #[test]
    fn twisted_graphs_r1() {
        let data = example_r1();
        let dual = dualize(&data);
        let id = TwistPerm::identity(&dual);
        let graphs = twisted_graphs(&dual, &id);
        // Two disjoint loops.
        assert_eq!(graphs[0].edges[0], (Some(XIdx(0)), Some(XIdx(0))));
        assert_eq!(graphs[0].edges[1], (Some(XIdx(1)), Some(XIdx(1))));

        let swap = TwistPerm {
            per_block: vec![Perm::parse_cycles(2, "(1 2)").unwrap()],
        };
        let graphs = twisted_graphs(&dual, &swap);
        // One directed 2-cycle x0 -> x1 -> x0.
        assert_eq!(graphs[0].edges[0], (Some(XIdx(0)), Some(XIdx(1))));
        assert_eq!(graphs[0].edges[1], (Some(XIdx(1)), Some(XIdx(0))));
    }

    #[test]
    fn twist_inverse_restores_graph() {
        let data = NccwData::with_canonical_layout(
            vec![3, 2],
            vec![1, 2],
            [vec![vec![1, 1], vec![0, 1]], vec![vec![3, 0], vec![2, 0]]],
        );
        let report = validate_nccw(&data);
        assert!(report.is_valid(), "{:?}", report.errors);
        let dual = dualize(&data);
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let sigma = TwistPerm::random(&dual, &mut rng);
            let back = sigma.compose(&sigma.inverse());
            assert!(back.is_identity());
            for y in 0..dual.num_y() {
                let y = YIdx(y as u32);
                assert_eq!(
                    twisted_target(&dual, &back, y),
                    dual.b[R1][y.idx()]
                );
            }
        }
    }

    #[test]
    fn per_block_fiber_sums() {
        // For every p: sum over x in X^i of fiber sizes equals m_r(p,i)*[i].
        let data = dimension_drop(3, 4, 1);
        let dual = dualize(&data);
        dual.check_fibers(&data.mult).unwrap();
        for r in 0..2 {
            for p in 0..data.num_p() {
                for i in 0..data.num_i() {
                    let total: u32 = dual
                        .x_block(IIdx(i as u32))
                        .map(|x| {
                            dual.y_block(PIdx(p as u32))
                                .filter(|&y| dual.b[r][y] == Some(XIdx(x as u32)))
                                .count() as u32
                        })
                        .sum();
                    assert_eq!(total, data.mult[r][p][i] * data.i_sizes[i]);
                }
            }
        }
    }
}
