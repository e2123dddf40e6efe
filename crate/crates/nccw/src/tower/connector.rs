//! The groupoid connector between consecutive stages, restricted to its
//! unit space: a total map from upper spectrum points to lower spectrum
//! points, with fiber enumeration for path lifting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BlockClass, ConnectorSpec, TowerStage, XOrigin, YOrigin, UNDEF};
use crate::dyadic::Dyadic;

/// A point of the spectrum of one stage.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum SpecPoint {
    /// `[t, y]` with `t` strictly between the glued boundary values.
    Interior { y: u32, t: Dyadic },
    Vertex { x: u32 },
    /// A boundary point with undefined gluing: a free end (only present in
    /// the end compactification).
    End { y: u32, r: u8 },
}

impl TowerStage {
    /// Normalized spectrum point of value `t` on edge `y`.
    pub fn point(&self, y: u32, t: Dyadic) -> SpecPoint {
        if t.is_zero() {
            match self.b_of(0, y) {
                Some(x) => SpecPoint::Vertex { x },
                None => SpecPoint::End { y, r: 0 },
            }
        } else if t.is_one() {
            match self.b_of(1, y) {
                Some(x) => SpecPoint::Vertex { x },
                None => SpecPoint::End { y, r: 1 },
            }
        } else {
            SpecPoint::Interior { y, t }
        }
    }
}

/// An element of the fiber of the connector over a lower point: either a
/// single upper point or a whole upper edge lying constantly over it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FiberElem {
    Point(SpecPoint),
    WholeEdge { y: u32 },
}

pub struct ConnectorMap<'a> {
    pub lower: &'a TowerStage,
    pub upper: &'a TowerStage,
    pub spec: &'a ConnectorSpec,
    /// First slot of each affine block.
    block_y0: Vec<u32>,
    ffactor_y0: Vec<u32>,
    ins_y0: Vec<u32>,
    /// Blocks over each lower edge block.
    blocks_of_p: Vec<Vec<u32>>,
    ffactor_of_i: Vec<Vec<u32>>,
    /// Upper ECopy vertex of lower edge `ly` per distinguished summand.
    ecopy_x: BTreeMap<(u32, u32), u32>,
    /// Upper FCopy vertices of each lower vertex.
    fcopy_of_x: Vec<Vec<u32>>,
    /// Embedded / inserted edges over each upper vertex.
    const_edges_over_x: Vec<Vec<u32>>,
}

impl<'a> ConnectorMap<'a> {
    pub fn new(
        lower: &'a TowerStage,
        upper: &'a TowerStage,
        spec: &'a ConnectorSpec,
    ) -> ConnectorMap<'a> {
        let mut block_y0 = vec![UNDEF; upper.blocks.len()];
        let mut ffactor_y0 = vec![UNDEF; upper.ffactor_blocks.len()];
        let mut ins_y0 = vec![UNDEF; upper.insertions.len()];
        for (slot, origin) in upper.y_origin.iter().enumerate() {
            match *origin {
                YOrigin::Block { block, .. } => {
                    if block_y0[block as usize] == UNDEF {
                        block_y0[block as usize] = slot as u32;
                    }
                }
                YOrigin::FFactor { block, .. } => {
                    if ffactor_y0[block as usize] == UNDEF {
                        ffactor_y0[block as usize] = slot as u32;
                    }
                }
                YOrigin::IdF { ins, .. } => {
                    if ins_y0[ins as usize] == UNDEF {
                        ins_y0[ins as usize] = slot as u32;
                    }
                }
                _ => {}
            }
        }
        let mut blocks_of_p = vec![Vec::new(); lower.p_sizes.len()];
        for (id, info) in upper.blocks.iter().enumerate() {
            blocks_of_p[info.p as usize].push(id as u32);
        }
        let mut ffactor_of_i = vec![Vec::new(); lower.i_sizes.len()];
        for (id, info) in upper.ffactor_blocks.iter().enumerate() {
            ffactor_of_i[info.i as usize].push(id as u32);
        }
        let mut ecopy_x = BTreeMap::new();
        let mut fcopy_of_x = vec![Vec::new(); lower.num_x()];
        for (x, origin) in upper.x_origin.iter().enumerate() {
            match *origin {
                XOrigin::ECopy { y } => {
                    ecopy_x.insert((upper.x_i[x], y), x as u32);
                }
                XOrigin::FCopy { x: lx, .. } => {
                    fcopy_of_x[lx as usize].push(x as u32);
                }
                XOrigin::Seed => {}
            }
        }
        let mut const_edges_over_x = vec![Vec::new(); upper.num_x()];
        for (slot, origin) in upper.y_origin.iter().enumerate() {
            match *origin {
                YOrigin::Embedded { x } | YOrigin::IdF { x, .. } => {
                    const_edges_over_x[x as usize].push(slot as u32);
                }
                _ => {}
            }
        }
        ConnectorMap {
            lower,
            upper,
            spec,
            block_y0,
            ffactor_y0,
            ins_y0,
            blocks_of_p,
            ffactor_of_i,
            ecopy_x,
            fcopy_of_x,
            const_edges_over_x,
        }
    }

    /// The slot of lower edge `ly` inside an affine block.
    pub fn block_slot(&self, block: u32, ly: u32) -> u32 {
        let info = self.upper.blocks[block as usize];
        self.block_y0[block as usize] + (ly - self.lower.p_start[info.p as usize])
    }

    pub fn ffactor_slot(&self, block: u32, lx: u32) -> u32 {
        let info = self.upper.ffactor_blocks[block as usize];
        self.ffactor_y0[block as usize] + (lx - self.lower.i_start[info.i as usize])
    }

    pub fn embedded_slot(&self, x: u32) -> Option<u32> {
        self.upper.meta.embedded_y0.map(|y0| y0 + x)
    }

    pub fn ins_slot(&self, ins: u32, x: u32) -> u32 {
        let j = self.upper.insertions[ins as usize].j as usize;
        self.ins_y0[ins as usize] + (x - self.upper.i_start[j])
    }

    pub fn ecopy_vertex(&self, j: u32, ly: u32) -> Option<u32> {
        self.ecopy_x.get(&(j, ly)).copied()
    }

    /// Projection of an upper vertex.
    pub fn project_vertex(&self, x: u32) -> SpecPoint {
        match self.upper.x_origin[x as usize] {
            XOrigin::ECopy { y } => SpecPoint::Interior { y, t: Dyadic::HALF },
            XOrigin::FCopy { x: lx, .. } => SpecPoint::Vertex { x: lx },
            XOrigin::Seed => unreachable!("no connector below the first stage"),
        }
    }

    /// Total projection of upper spectrum points to lower ones.
    pub fn project(&self, p: SpecPoint) -> SpecPoint {
        match p {
            SpecPoint::Vertex { x } => self.project_vertex(x),
            SpecPoint::End { y, .. } => match self.upper.y_origin[y as usize] {
                YOrigin::Block { block, y: ly } => {
                    let info = self.upper.blocks[block as usize];
                    // free ends only arise on upward blocks at the upper end
                    debug_assert_eq!(info.class, BlockClass::PlusUpper);
                    SpecPoint::End { y: ly, r: 1 }
                }
                _ => unreachable!("free end with non-affine origin"),
            },
            SpecPoint::Interior { y, t } => match self.upper.y_origin[y as usize] {
                YOrigin::Block { block, y: ly } => {
                    let info = self.upper.blocks[block as usize];
                    let v = info.class.lambda().apply(&t);
                    self.lower.point(ly, v)
                }
                YOrigin::FFactor { x: lx, .. } => SpecPoint::Vertex { x: lx },
                YOrigin::Embedded { x } | YOrigin::IdF { x, .. } => self.project_vertex(x),
                YOrigin::Seed => unreachable!("seed edge above the first stage"),
            },
        }
    }

    /// The fiber of the projection over a lower point.
    pub fn fiber_over(&self, p: SpecPoint) -> Vec<FiberElem> {
        let mut out = Vec::new();
        match p {
            SpecPoint::Vertex { x: lx } => {
                for &ux in &self.fcopy_of_x[lx as usize] {
                    out.push(FiberElem::Point(SpecPoint::Vertex { x: ux }));
                    for &e in &self.const_edges_over_x[ux as usize] {
                        out.push(FiberElem::WholeEdge { y: e });
                    }
                }
                let i = self.lower.x_i[lx as usize] as usize;
                for &fb in &self.ffactor_of_i[i] {
                    out.push(FiberElem::WholeEdge {
                        y: self.ffactor_slot(fb, lx),
                    });
                }
            }
            SpecPoint::Interior { y: ly, t: v } => {
                let p_l = self.lower.y_p[ly as usize] as usize;
                for &blk in &self.blocks_of_p[p_l] {
                    let info = self.upper.blocks[blk as usize];
                    let lambda = info.class.lambda();
                    if lambda.is_constant() {
                        if v.is_half() {
                            out.push(FiberElem::WholeEdge {
                                y: self.block_slot(blk, ly),
                            });
                        }
                        continue;
                    }
                    if let Some(t) = lambda.invert(&v) {
                        let slot = self.block_slot(blk, ly);
                        let pt = self.upper.point(slot, t);
                        // interior preimages only; boundary preimages are
                        // the glued vertices handled below
                        if !t.is_zero() && !t.is_one() {
                            out.push(FiberElem::Point(pt));
                        } else {
                            out.push(FiberElem::Point(pt));
                        }
                    }
                }
                if v.is_half() {
                    // halfway vertices and the constant edges over them
                    for j in 0..self.upper.i_sizes.len() as u32 {
                        if let Some(ux) = self.ecopy_vertex(j, ly) {
                            out.push(FiberElem::Point(SpecPoint::Vertex { x: ux }));
                            for &e in &self.const_edges_over_x[ux as usize] {
                                out.push(FiberElem::WholeEdge { y: e });
                            }
                        }
                    }
                }
            }
            SpecPoint::End { y: ly, r } => {
                debug_assert_eq!(r, 1);
                for &blk in &self.blocks_of_p[self.lower.y_p[ly as usize] as usize] {
                    let info = self.upper.blocks[blk as usize];
                    if info.class == BlockClass::PlusUpper {
                        let slot = self.block_slot(blk, ly);
                        if !self.upper.in_dom(1, slot) {
                            out.push(FiberElem::Point(SpecPoint::End { y: slot, r: 1 }));
                        }
                    }
                }
            }
        }
        out.sort_by_key(|e| match e {
            FiberElem::Point(SpecPoint::Vertex { x }) => (0u8, *x, 0u32),
            FiberElem::Point(SpecPoint::Interior { y, .. }) => (1, *y, 0),
            FiberElem::Point(SpecPoint::End { y, r }) => (2, *y, *r as u32),
            FiberElem::WholeEdge { y } => (3, *y, 0),
        });
        out.dedup();
        out
    }

    /// Pointwise commutation sweep: for every upper edge and boundary side,
    /// the projection of the glued boundary point must agree with the
    /// reparametrised projection of the edge end.
    pub fn verify_commutation(&self) -> Result<(), String> {
        for y in 0..self.upper.num_y() as u32 {
            for r in 0..2usize {
                let via_b = match self.upper.b_of(r, y) {
                    Some(x) => self.project(SpecPoint::Vertex { x }),
                    None => {
                        // free end: must project to a lower free end
                        let p = self.project(SpecPoint::End { y, r: r as u8 });
                        match p {
                            SpecPoint::End { .. } => continue,
                            other => {
                                return Err(format!(
                                    "free end of y{y} at r={r} projects to {other:?}"
                                ))
                            }
                        }
                    }
                };
                let via_lambda = match self.upper.y_origin[y as usize] {
                    YOrigin::Block { block, y: ly } => {
                        let info = self.upper.blocks[block as usize];
                        let v = info
                            .class
                            .lambda()
                            .apply(&if r == 0 { Dyadic::ZERO } else { Dyadic::ONE });
                        self.lower.point(ly, v)
                    }
                    YOrigin::FFactor { x: lx, .. } => SpecPoint::Vertex { x: lx },
                    YOrigin::Embedded { x } | YOrigin::IdF { x, .. } => self.project_vertex(x),
                    YOrigin::Seed => continue,
                };
                if via_b != via_lambda {
                    return Err(format!(
                        "commutation fails at y{y}, r={r}: {via_b:?} vs {via_lambda:?}"
                    ));
                }
            }
        }
        Ok(())
    }
}
