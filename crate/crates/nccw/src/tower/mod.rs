//! Inductive systems of building blocks: stage construction under the
//! connectivity and path modifications, connector maps, exact dyadic path
//! lifting, condition checkers, ends trees, and tower invariants.
//!
//! A stage is one level of the system: the dual combinatorics of its
//! building block plus origin tables that record how every edge and vertex
//! arose from the previous level. Connector maps and all checkers are
//! derived from those tables.

pub mod build;
pub mod census;
pub mod conditions;
pub mod connector;
pub mod ends;
pub mod k33;
pub mod path;
pub mod presets;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::AffineMap;

pub const UNDEF: u32 = u32::MAX;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Flavor {
    Unital,
    StablyProjectionless,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum BaseKind {
    Conn,
    Path,
}

/// Classes of block diagonal entries of the connecting map, by their
/// reparametrisation.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum BlockClass {
    /// `1/2 + t/2`.
    PlusUpper,
    /// `t/2`.
    PlusLower,
    /// `1 - t/2`.
    MinusUpper,
    /// `1/2 - t/2`.
    MinusLower,
    /// constant `1/2`, half-ends wired to the `j0` copy.
    ConstLow,
    /// constant `1/2`, half-ends wired to the `j1` copy.
    ConstHigh,
    /// identity (connectivity modification).
    Ident,
}

pub const AFFINE_CLASSES: [BlockClass; 7] = [
    BlockClass::PlusUpper,
    BlockClass::PlusLower,
    BlockClass::MinusUpper,
    BlockClass::MinusLower,
    BlockClass::ConstLow,
    BlockClass::ConstHigh,
    BlockClass::Ident,
];

impl BlockClass {
    pub fn lambda(&self) -> AffineMap {
        match self {
            BlockClass::PlusUpper => AffineMap::PlusUpper,
            BlockClass::PlusLower => AffineMap::PlusLower,
            BlockClass::MinusUpper => AffineMap::MinusUpper,
            BlockClass::MinusLower => AffineMap::MinusLower,
            BlockClass::ConstLow | BlockClass::ConstHigh => AffineMap::ConstHalf,
            BlockClass::Ident => AffineMap::Ident,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, BlockClass::ConstLow | BlockClass::ConstHigh)
    }
}

/// Block table of one connecting map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConnectorSpec {
    pub num_q: usize,
    /// `m[class][q][p]` for the seven block classes.
    pub m_plus_upper: Vec<Vec<u32>>,
    pub m_plus_lower: Vec<Vec<u32>>,
    pub m_minus_upper: Vec<Vec<u32>>,
    pub m_minus_lower: Vec<Vec<u32>>,
    pub m_const_low: Vec<Vec<u32>>,
    pub m_const_high: Vec<Vec<u32>>,
    pub m_ident: Vec<Vec<u32>>,
    /// `m^{q,i}`: constant blocks carrying lower F-factors.
    pub m_f_factor: Vec<Vec<u32>>,
    /// `m(j,i)`: F-level multiplicities; rows define the upper summands.
    pub m_f: Vec<Vec<u32>>,
    /// Distinguished upper summands receiving `E^p` at the halfway point:
    /// `j_assign[r][p]`, absent for the grave block at `r = 1` and for the
    /// connectivity modification entirely.
    pub j_assign: [Vec<Option<u32>>; 2],
    /// Upper block carrying the embedded F-copy.
    pub frak_q: u32,
    /// Annotations of cell-valued blocks (connectivity modification): each
    /// records whether its evaluation path starts or ends at the base
    /// point. The cells themselves stay opaque.
    pub z_blocks: Vec<ZBlockAnn>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ZBlockAnn {
    pub q: u32,
    pub starts_at_base: bool,
    pub ends_at_base: bool,
}

impl ConnectorSpec {
    pub fn num_j(&self) -> usize {
        self.m_f.len()
    }

    pub fn class_table(&self, class: BlockClass) -> &Vec<Vec<u32>> {
        match class {
            BlockClass::PlusUpper => &self.m_plus_upper,
            BlockClass::PlusLower => &self.m_plus_lower,
            BlockClass::MinusUpper => &self.m_minus_upper,
            BlockClass::MinusLower => &self.m_minus_lower,
            BlockClass::ConstLow => &self.m_const_low,
            BlockClass::ConstHigh => &self.m_const_high,
            BlockClass::Ident => &self.m_ident,
        }
    }

    /// Total count of edge blocks contributed to `E^q` over one lower edge
    /// block `p`.
    pub fn affine_total(&self, q: usize, p: usize) -> u32 {
        AFFINE_CLASSES
            .iter()
            .map(|c| self.class_table(*c)[q][p])
            .sum()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Toggles {
    pub nlc1: bool,
    pub nlc2: bool,
    pub nop1: bool,
    pub nop2: bool,
    pub clsg: bool,
    pub np4ni: bool,
    pub sccb: bool,
}

impl Toggles {
    pub fn all_path() -> Toggles {
        Toggles {
            nlc1: true,
            nlc2: true,
            nop1: true,
            nop2: true,
            clsg: true,
            np4ni: true,
            sccb: false,
        }
    }
}

/// Deliberate wiring defects used by the mutation tests; each breaks
/// exactly one condition.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Sabotage {
    /// Collapse one class's spread to a single position.
    Nlc2,
    /// Cap the spread of the lower-half class at two positions.
    Nop2,
    /// Allow one block's pieces to share a target copy.
    Clsg,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TowerFamilySpec {
    pub base: BaseKind,
    pub flavor: Flavor,
    pub toggles: Toggles,
    /// Loop-insertion counts per level (the separating sequence); level `n`
    /// reads `insert_seq[n-1]`.
    pub insert_seq: Vec<u32>,
    /// Insertion summand per level, as an index into that level's own
    /// summand list; `UNDEF` lets the builder choose the first plain one.
    pub insert_j: Vec<u32>,
    pub sabotage: Option<Sabotage>,
}

impl TowerFamilySpec {
    pub fn plain(base: BaseKind, flavor: Flavor) -> TowerFamilySpec {
        TowerFamilySpec {
            base,
            flavor,
            toggles: Toggles::default(),
            insert_seq: Vec::new(),
            insert_j: Vec::new(),
            sabotage: None,
        }
    }
}

/// Origin of an edge slot of a stage.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum YOrigin {
    /// Level-1 slot of the seed data.
    Seed,
    /// Slot of an affine block over a lower edge.
    Block { block: u32, y: u32 },
    /// Slot of a constant lower-F-factor block over a lower vertex.
    FFactor { block: u32, x: u32 },
    /// Embedded copy of the stage's own vertex set (with cyclic twist).
    Embedded { x: u32 },
    /// Inserted identity loop over the stage's own vertex `x` (plain or
    /// twisted), from one insertion record.
    IdF { ins: u32, x: u32 },
}

/// Origin of a vertex slot of a stage.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum XOrigin {
    Seed,
    /// Halfway copy of a lower edge inside a distinguished summand.
    ECopy { y: u32 },
    /// `d`-th copy of the lower summand `i` inside this summand, at lower
    /// vertex `x`.
    FCopy { i: u32, d: u32, x: u32 },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct BlockInfo {
    pub class: BlockClass,
    pub q: u32,
    pub p: u32,
    pub copy: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FFactorInfo {
    pub q: u32,
    pub i: u32,
    pub copy: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum IdFKind {
    Plain,
    /// Self-gluing twist attached to the copy `(j, i, d)`; fixes the
    /// `(i, d)` sub-block pointwise and deranges every other copy.
    Sccb { i: u32, d: u32 },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct IdFInfo {
    pub q: u32,
    pub j: u32,
    pub kind: IdFKind,
}

/// Kind of an upper summand.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum IKind {
    Plain,
    /// Distinguished: contains the halfway copy of `E^p` for side `r`.
    Dist { p: u32, r: u8 },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CopyRef {
    pub q: u32,
    pub j: u32,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StageMeta {
    /// Block carrying the embedded copy of the stage's own vertex set.
    pub frak_block: Option<u32>,
    /// First slot of the embedded copy inside that block; the copy is laid
    /// out in vertex order.
    pub embedded_y0: Option<u32>,
    pub grave: Option<u32>,
    /// Kind of each of the stage's own summands.
    pub i_kind: Vec<IKind>,
    /// Z-cell marking: summand whose vertices carry opaque cells.
    pub z_dist: Option<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TowerStage {
    pub level: u32,
    pub flavor: Flavor,
    pub base: BaseKind,
    pub p_sizes: Vec<u32>,
    pub i_sizes: Vec<u32>,
    pub p_start: Vec<u32>,
    pub i_start: Vec<u32>,
    pub y_p: Vec<u32>,
    pub x_i: Vec<u32>,
    /// Boundary maps; `UNDEF` marks an undefined value.
    pub b: [Vec<u32>; 2],
    /// Slot-block copy per side.
    pub sb: [Vec<u32>; 2],
    pub copies: [Vec<CopyRef>; 2],
    pub y_origin: Vec<YOrigin>,
    pub x_origin: Vec<XOrigin>,
    pub blocks: Vec<BlockInfo>,
    pub ffactor_blocks: Vec<FFactorInfo>,
    pub insertions: Vec<IdFInfo>,
    pub meta: StageMeta,
}

impl TowerStage {
    pub fn num_y(&self) -> usize {
        self.y_p.len()
    }

    pub fn num_x(&self) -> usize {
        self.x_i.len()
    }

    pub fn y_block(&self, p: usize) -> std::ops::Range<usize> {
        let s = self.p_start[p] as usize;
        s..s + self.p_sizes[p] as usize
    }

    pub fn x_block(&self, i: usize) -> std::ops::Range<usize> {
        let s = self.i_start[i] as usize;
        s..s + self.i_sizes[i] as usize
    }

    pub fn b_of(&self, r: usize, y: u32) -> Option<u32> {
        let v = self.b[r][y as usize];
        if v == UNDEF {
            None
        } else {
            Some(v)
        }
    }

    pub fn in_dom(&self, r: usize, y: u32) -> bool {
        self.b[r][y as usize] != UNDEF
    }

    /// Multiplicity table recomputed from fibers.
    pub fn mult_table(&self) -> [Vec<Vec<u32>>; 2] {
        let np = self.p_sizes.len();
        let ni = self.i_sizes.len();
        let mut mult = [vec![vec![0u32; ni]; np], vec![vec![0u32; ni]; np]];
        for r in 0..2 {
            for y in 0..self.num_y() {
                let x = self.b[r][y];
                if x != UNDEF {
                    mult[r][self.y_p[y] as usize][self.x_i[x as usize] as usize] += 1;
                }
            }
        }
        for r in 0..2 {
            for row in mult[r].iter_mut() {
                for (i, m) in row.iter_mut().enumerate() {
                    *m /= self.i_sizes[i].max(1);
                }
            }
        }
        mult
    }

    /// Structural self-check: fiber invariants of the dual data.
    pub fn check_integrity(&self) -> Result<(), String> {
        for r in 0..2 {
            let mut copy_seen: Vec<Vec<bool>> = self.copies[r]
                .iter()
                .map(|c| vec![false; self.i_sizes[c.j as usize] as usize])
                .collect();
            let mut fiber = vec![vec![0u32; self.num_x()]; self.p_sizes.len()];
            for y in 0..self.num_y() {
                let (x, c) = (self.b[r][y], self.sb[r][y]);
                match (x != UNDEF, c != UNDEF) {
                    (true, true) => {
                        let info = self.copies[r][c as usize];
                        if self.x_i[x as usize] != info.j {
                            return Err(format!("copy {c} wired to foreign summand at y{y}"));
                        }
                        if info.q != self.y_p[y] {
                            return Err(format!("copy {c} crosses E-blocks at y{y}"));
                        }
                        let pos = x - self.i_start[info.j as usize];
                        if copy_seen[c as usize][pos as usize] {
                            return Err(format!("copy {c} (r={r}) covers x{x} twice"));
                        }
                        copy_seen[c as usize][pos as usize] = true;
                        fiber[self.y_p[y] as usize][x as usize] += 1;
                    }
                    (false, false) => {}
                    _ => return Err(format!("b and sb disagree at (r={r}, y{y})")),
                }
            }
            for (c, seen) in copy_seen.iter().enumerate() {
                if seen.iter().any(|&s| !s) {
                    return Err(format!("copy {c} (r={r}) incomplete"));
                }
            }
            // uniform fibers per (p, summand)
            for (p, row) in fiber.iter().enumerate() {
                for i in 0..self.i_sizes.len() {
                    let block: Vec<u32> = self.x_block(i).map(|x| row[x]).collect();
                    if block.windows(2).any(|w| w[0] != w[1]) {
                        return Err(format!("fiber of b_{r} not uniform on (p{p}, i{i})"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TowerError {
    #[error("condition {name} violated: {detail}")]
    Condition { name: &'static str, detail: String },
    #[error("connector spec malformed: {0}")]
    SpecShape(String),
    #[error("slot assembly infeasible: {0}")]
    Assembly(String),
    #[error("stage integrity: {0}")]
    Integrity(String),
    #[error("operation requires the stably projectionless flavor")]
    NeedsProjectionless,
    #[error("seed data invalid: {0:?}")]
    Seed(Vec<String>),
}

/// A built tower: stages plus the specs that connect them.
#[derive(Clone, Debug)]
pub struct Tower {
    pub family: TowerFamilySpec,
    pub stages: Vec<TowerStage>,
    pub specs: Vec<ConnectorSpec>,
}

impl Tower {
    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, level: usize) -> &TowerStage {
        &self.stages[level - 1]
    }

    /// Connector between consecutive levels (`lower_level >= 1`).
    pub fn connector(&self, lower_level: usize) -> connector::ConnectorMap<'_> {
        connector::ConnectorMap::new(
            &self.stages[lower_level - 1],
            &self.stages[lower_level],
            &self.specs[lower_level - 1],
        )
    }
}
