//! Stage construction: the level-1 building block with its embedded vertex
//! copy and cyclic twist, the level-to-level assembly of boundary data from
//! a connector block table, and the loop insertions (separating sequences
//! and self-gluing blocks).

use std::collections::BTreeMap;

use super::*;
use crate::model::{dualize, validate_nccw, NccwData};

/// Whether a class contributes halfway-copy values at side `r`, and into
/// which distinguished summand (`0` = the `j0` family, `1` = the `j1`
/// family).
fn ecopy_side(class: BlockClass, r: usize) -> Option<u8> {
    use BlockClass::*;
    match (class, r) {
        (PlusUpper, 0) => Some(0),
        (MinusLower, 0) => Some(1),
        (PlusLower, 1) => Some(1),
        (MinusUpper, 1) => Some(0),
        (ConstLow, _) => Some(0),
        (ConstHigh, _) => Some(1),
        _ => None,
    }
}

/// Whether a class reads lower boundary values at side `r`; returns the
/// lower side `s` with `lambda(r) = s`.
fn fimg_side(class: BlockClass, r: usize) -> Option<usize> {
    use BlockClass::*;
    match (class, r) {
        (PlusLower, 0) => Some(0),
        (MinusUpper, 0) => Some(1),
        (PlusUpper, 1) => Some(1),
        (MinusLower, 1) => Some(0),
        (Ident, r) => Some(r),
        _ => None,
    }
}

/// The spread-duty classes: their blocks must reach distinct target
/// positions for every lower copy (two for the local-cut-point condition,
/// three for the non-planarity condition).
fn has_spread_duty(class: BlockClass, r: usize) -> bool {
    fimg_side(class, r).is_some() && class != BlockClass::Ident
}

pub fn validate_spec_shape(
    lower: &TowerStage,
    spec: &ConnectorSpec,
) -> Result<(), TowerError> {
    let np = lower.p_sizes.len();
    let ni = lower.i_sizes.len();
    let nq = spec.num_q;
    let nj = spec.num_j();
    for class in AFFINE_CLASSES {
        let t = spec.class_table(class);
        if t.len() != nq || t.iter().any(|row| row.len() != np) {
            return Err(TowerError::SpecShape(format!(
                "class table {class:?} must be {nq} x {np}"
            )));
        }
    }
    if spec.m_f_factor.len() != nq || spec.m_f_factor.iter().any(|r| r.len() != ni) {
        return Err(TowerError::SpecShape(format!(
            "F-factor table must be {nq} x {ni}"
        )));
    }
    if spec.m_f.iter().any(|r| r.len() != ni) {
        return Err(TowerError::SpecShape(format!(
            "F-level table rows must have {ni} columns"
        )));
    }
    if spec.j_assign[0].len() != np || spec.j_assign[1].len() != np {
        return Err(TowerError::SpecShape("j-assignment length".into()));
    }
    let mut seen = vec![false; nj];
    for r in 0..2 {
        for p in 0..np {
            if let Some(j) = spec.j_assign[r][p] {
                let j = j as usize;
                if j >= nj || seen[j] {
                    return Err(TowerError::SpecShape(format!(
                        "distinguished summand {j} reused or out of range"
                    )));
                }
                seen[j] = true;
            }
        }
    }
    if spec.frak_q as usize >= nq {
        return Err(TowerError::SpecShape("frak_q out of range".into()));
    }
    Ok(())
}

/// The multiplicity preconditions: the four halving classes must all be
/// present (off the grave pair in the projectionless flavor, with the
/// upward class plus one of the half-image classes surviving there).
pub fn check_m_ge_1(
    lower: &TowerStage,
    spec: &ConnectorSpec,
    flavor: Flavor,
) -> Result<(), TowerError> {
    let np = lower.p_sizes.len();
    let nq = spec.num_q;
    let grave_p = lower.meta.grave;
    let grave_q = derive_upper_grave(lower, spec);
    for q in 0..nq {
        for p in 0..np {
            let quad = [
                spec.m_plus_upper[q][p],
                spec.m_plus_lower[q][p],
                spec.m_minus_upper[q][p],
                spec.m_minus_lower[q][p],
            ];
            match flavor {
                Flavor::Unital => {
                    if quad.iter().any(|&m| m == 0) {
                        return Err(TowerError::Condition {
                            name: "m>1",
                            detail: format!(
                                "one of m+/m_+/m-/m_- vanishes at (q{q}, p{p}) in the unital flavor"
                            ),
                        });
                    }
                }
                Flavor::StablyProjectionless => {
                    let at_grave_pair =
                        grave_p == Some(p as u32) && grave_q == Some(q as u32);
                    if grave_p == Some(p as u32) {
                        // structural zeros off the grave pairing
                        if spec.m_minus_upper[q][p] != 0 || spec.m_const_high[q][p] != 0 {
                            return Err(TowerError::Condition {
                                name: "m>1",
                                detail: format!(
                                    "m- and m-bar must vanish over the grave block (q{q})"
                                ),
                            });
                        }
                        if !at_grave_pair && spec.m_plus_upper[q][p] != 0 {
                            return Err(TowerError::Condition {
                                name: "m>1",
                                detail: format!(
                                    "m+ over the grave block confined to the grave target, found at q{q}"
                                ),
                            });
                        }
                        if at_grave_pair {
                            if spec.m_plus_upper[q][p] < 1 {
                                return Err(TowerError::Condition {
                                    name: "m>1",
                                    detail: "m+(grave, grave) >= 1 required".into(),
                                });
                            }
                            if spec.m_plus_lower[q][p] + spec.m_minus_lower[q][p] < 1 {
                                return Err(TowerError::Condition {
                                    name: "m>1",
                                    detail: "m_+ or m_- >= 1 at the grave pair".into(),
                                });
                            }
                        }
                    } else if quad.iter().any(|&m| m == 0) {
                        return Err(TowerError::Condition {
                            name: "m>1",
                            detail: format!(
                                "one of m+/m_+/m-/m_- vanishes at (q{q}, p{p}) off the grave pair"
                            ),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// The upper grave block: the unique `q` with upward blocks over the lower
/// grave block.
pub fn derive_upper_grave(lower: &TowerStage, spec: &ConnectorSpec) -> Option<u32> {
    let gp = lower.meta.grave? as usize;
    let hits: Vec<u32> = (0..spec.num_q)
        .filter(|&q| spec.m_plus_upper[q][gp] > 0)
        .map(|q| q as u32)
        .collect();
    if hits.len() == 1 {
        Some(hits[0])
    } else {
        None
    }
}

pub struct UpperShape {
    i_kind: Vec<IKind>,
    i_sizes: Vec<u32>,
    i_start: Vec<u32>,
    x_i: Vec<u32>,
    x_origin: Vec<XOrigin>,
    /// For distinguished summands: first slot of the halfway copy.
    ecopy_base: Vec<Option<u32>>,
    /// `fcopy_base[j]`: slot of `(i, d, x=block start)` by linear offset.
    fcopy_base: Vec<Vec<u32>>,
}

impl UpperShape {
    fn ecopy_slot(&self, j: usize, lower: &TowerStage, ly: u32) -> u32 {
        let p = match self.i_kind[j] {
            IKind::Dist { p, .. } => p as usize,
            IKind::Plain => unreachable!("ecopy of plain summand"),
        };
        self.ecopy_base[j].unwrap() + (ly - lower.p_start[p])
    }

    fn fcopy_slot(&self, j: usize, i: usize, d: u32, lower: &TowerStage, lx: u32) -> u32 {
        self.fcopy_base[j][i] + d * lower.i_sizes[i] + (lx - lower.i_start[i])
    }
}

fn build_upper_shape(lower: &TowerStage, spec: &ConnectorSpec) -> UpperShape {
    let ni_l = lower.i_sizes.len();
    let nj = spec.num_j();
    let mut i_kind = vec![IKind::Plain; nj];
    for r in 0..2 {
        for (p, ja) in spec.j_assign[r].iter().enumerate() {
            if let Some(j) = ja {
                i_kind[*j as usize] = IKind::Dist {
                    p: p as u32,
                    r: r as u8,
                };
            }
        }
    }
    let mut i_sizes = Vec::with_capacity(nj);
    let mut i_start = Vec::with_capacity(nj);
    let mut x_i = Vec::new();
    let mut x_origin = Vec::new();
    let mut ecopy_base = vec![None; nj];
    let mut fcopy_base = vec![vec![0u32; ni_l]; nj];
    for j in 0..nj {
        i_start.push(x_i.len() as u32);
        let base = x_i.len() as u32;
        let mut size = 0u32;
        if let IKind::Dist { p, .. } = i_kind[j] {
            ecopy_base[j] = Some(base);
            for ly in lower.y_block(p as usize) {
                x_origin.push(XOrigin::ECopy { y: ly as u32 });
            }
            size += lower.p_sizes[p as usize];
        }
        for i in 0..ni_l {
            fcopy_base[j][i] = base + size;
            for d in 0..spec.m_f[j][i] {
                for lx in lower.x_block(i) {
                    x_origin.push(XOrigin::FCopy {
                        i: i as u32,
                        d,
                        x: lx as u32,
                    });
                }
                size += lower.i_sizes[i];
            }
        }
        i_sizes.push(size);
        x_i.extend(std::iter::repeat(j as u32).take(size as usize));
    }
    UpperShape {
        i_kind,
        i_sizes,
        i_start,
        x_i,
        x_origin,
        ecopy_base,
        fcopy_base,
    }
}

/// Placement bookkeeping for one `(q, r)` assembly.
struct Placer {
    /// Open copies per `(j, i, d)` unit: copy ids whose unit is still free.
    open: BTreeMap<(u32, u32, u32), Vec<u32>>,
    /// Remaining open units per copy.
    copy_open: Vec<u32>,
    /// Copies per summand (for singleton creation bookkeeping).
    singles_cursor: BTreeMap<u32, u32>,
}

impl Placer {
    fn new() -> Placer {
        Placer {
            open: BTreeMap::new(),
            copy_open: Vec::new(),
            singles_cursor: BTreeMap::new(),
        }
    }

    fn open_units_of_copy(
        &mut self,
        spec: &ConnectorSpec,
        copy: u32,
        j: usize,
        skip: Option<(u32, u32)>,
    ) {
        let mut count = 0;
        for (i, &m) in spec.m_f[j].iter().enumerate() {
            for d in 0..m {
                if skip == Some((i as u32, d)) {
                    continue;
                }
                self.open
                    .entry((j as u32, i as u32, d))
                    .or_default()
                    .push(copy);
                count += 1;
            }
        }
        if self.copy_open.len() <= copy as usize {
            self.copy_open.resize(copy as usize + 1, 0);
        }
        self.copy_open[copy as usize] += count;
    }

    fn take_unit(
        &mut self,
        key: (u32, u32, u32),
        forbidden: Option<&Vec<u32>>,
    ) -> Option<u32> {
        let q = self.open.get_mut(&key)?;
        let pos = q
            .iter()
            .position(|c| forbidden.map_or(true, |f| !f.contains(c)))?;
        let copy = q.remove(pos);
        self.copy_open[copy as usize] -= 1;
        Some(copy)
    }

    /// Any open unit of type `i`, preferring earlier keys.
    fn take_any_for_i(&mut self, i: u32, forbidden: Option<&Vec<u32>>) -> Option<(u32, u32, u32)> {
        let keys: Vec<(u32, u32, u32)> = self
            .open
            .iter()
            .filter(|(&(_, ki, _), v)| ki == i && !v.is_empty())
            .map(|(&k, _)| k)
            .collect();
        for key in keys {
            if let Some(copy) = self.take_unit(key, forbidden) {
                return Some((key.0, key.2, copy));
            }
        }
        None
    }
}

/// Copy processing order for one side: copies containing constant-block
/// slots first, then the rest in registry order.
fn priority_order(lower: &TowerStage, s: usize) -> Vec<usize> {
    let mut is_const = vec![false; lower.copies[s].len()];
    for y in 0..lower.num_y() {
        let c = lower.sb[s][y];
        if c == UNDEF {
            continue;
        }
        if let YOrigin::Block { block, .. } = lower.y_origin[y] {
            if lower.blocks[block as usize].class.is_const() {
                is_const[c as usize] = true;
            }
        }
    }
    let mut order: Vec<usize> = (0..lower.copies[s].len()).collect();
    order.sort_by_key(|&d| (!is_const[d], d));
    order
}

/// A singleton summand for lower type `i`: exactly one copy of `i` and
/// nothing else.
fn singleton_summands(spec: &ConnectorSpec, i: usize) -> Vec<u32> {
    (0..spec.num_j() as u32)
        .filter(|&j| {
            spec.m_f[j as usize]
                .iter()
                .enumerate()
                .all(|(k, &m)| if k == i { m == 1 } else { m == 0 })
        })
        .collect()
}

/// Builds the next stage from the previous one and a connector block
/// table.
pub fn build_stage(
    lower: &TowerStage,
    spec: &ConnectorSpec,
    family: &TowerFamilySpec,
) -> Result<TowerStage, TowerError> {
    validate_spec_shape(lower, spec)?;
    if family.base == BaseKind::Path {
        check_m_ge_1(lower, spec, family.flavor)?;
        conditions::precheck_spec(lower, spec, family)?;
    } else {
        // the connectivity modification needs full blocks everywhere
        if family.toggles != Toggles::default() && family.toggles.sccb {
            // sccb is applied as an insertion afterwards
        }
        for q in 0..spec.num_q {
            for p in 0..lower.p_sizes.len() {
                if spec.m_ident[q][p] == 0 {
                    return Err(TowerError::Condition {
                        name: "phiCfp",
                        detail: format!("no identity-type block for (q{q}, p{p})"),
                    });
                }
            }
        }
    }

    let shape = build_upper_shape(lower, spec);
    let nq = spec.num_q;
    let np_l = lower.p_sizes.len();
    let ni_l = lower.i_sizes.len();
    let num_x = shape.x_i.len();

    // Lower copy membership lists per side.
    let mut copy_members: [Vec<Vec<u32>>; 2] = [
        vec![Vec::new(); lower.copies[0].len()],
        vec![Vec::new(); lower.copies[1].len()],
    ];
    for r in 0..2 {
        for y in 0..lower.num_y() {
            let c = lower.sb[r][y];
            if c != UNDEF {
                copy_members[r][c as usize].push(y as u32);
            }
        }
    }

    // ---- lay out Y ----
    let mut y_p: Vec<u32> = Vec::new();
    let mut y_origin: Vec<YOrigin> = Vec::new();
    let mut p_start = Vec::with_capacity(nq);
    let mut p_sizes = Vec::with_capacity(nq);
    let mut blocks: Vec<BlockInfo> = Vec::new();
    let mut block_y0: Vec<u32> = Vec::new();
    let mut ffactor_blocks: Vec<FFactorInfo> = Vec::new();
    let mut ffactor_y0: Vec<u32> = Vec::new();
    let mut embedded_y0 = None;
    for q in 0..nq {
        p_start.push(y_p.len() as u32);
        for class in AFFINE_CLASSES {
            for p in 0..np_l {
                for copy in 0..spec.class_table(class)[q][p] {
                    let id = blocks.len() as u32;
                    blocks.push(BlockInfo {
                        class,
                        q: q as u32,
                        p: p as u32,
                        copy,
                    });
                    block_y0.push(y_p.len() as u32);
                    for ly in lower.y_block(p) {
                        y_p.push(q as u32);
                        y_origin.push(YOrigin::Block {
                            block: id,
                            y: ly as u32,
                        });
                    }
                }
            }
        }
        for i in 0..ni_l {
            for copy in 0..spec.m_f_factor[q][i] {
                let id = ffactor_blocks.len() as u32;
                ffactor_blocks.push(FFactorInfo {
                    q: q as u32,
                    i: i as u32,
                    copy,
                });
                ffactor_y0.push(y_p.len() as u32);
                for lx in lower.x_block(i) {
                    y_p.push(q as u32);
                    y_origin.push(YOrigin::FFactor {
                        block: id,
                        x: lx as u32,
                    });
                }
            }
        }
        if q as u32 == spec.frak_q {
            embedded_y0 = Some(y_p.len() as u32);
            for x in 0..num_x {
                y_p.push(q as u32);
                y_origin.push(YOrigin::Embedded { x: x as u32 });
            }
        }
        p_sizes.push(y_p.len() as u32 - p_start[q]);
    }
    let num_y = y_p.len();

    // ---- boundary maps ----
    let mut b = [vec![UNDEF; num_y], vec![UNDEF; num_y]];
    let mut sb = [vec![UNDEF; num_y], vec![UNDEF; num_y]];
    let mut copies: [Vec<CopyRef>; 2] = [Vec::new(), Vec::new()];

    // Embedded twist at r = 1 (needed below and by condition checks):
    // cyclic predecessor within each chain over (summand, copy) pairs for a
    // fixed lower vertex, plus the halfway-copy flip.
    let emb_twist = embedded_twist(lower, spec, &shape);

    for r in 0..2 {
        let mut placer = Placer::new();

        // halfway-copy contributors open the distinguished copies
        for (bid, info) in blocks.iter().enumerate() {
            if let Some(side) = ecopy_side(info.class, r) {
                let p = info.p as usize;
                let j = match side {
                    0 => spec.j_assign[0][p].or(spec.j_assign[1][p]),
                    _ => spec.j_assign[1][p].or(spec.j_assign[0][p]),
                };
                let j = j.ok_or_else(|| {
                    TowerError::Assembly(format!(
                        "class {:?} needs a distinguished summand for p{p}",
                        info.class
                    ))
                })? as usize;
                let copy = copies[r].len() as u32;
                copies[r].push(CopyRef {
                    q: info.q,
                    j: j as u32,
                });
                placer.open_units_of_copy(spec, copy, j, None);
                let y0 = block_y0[bid];
                for (k, ly) in lower.y_block(info.p as usize).enumerate() {
                    let slot = (y0 as usize + k) as usize;
                    b[r][slot] = shape.ecopy_slot(j, lower, ly as u32);
                    sb[r][slot] = copy;
                }
            }
        }

        // embedded copy: identity at r = 0, twisted at r = 1
        if let Some(y0) = embedded_y0 {
            let map: Vec<u32> = if r == 0 {
                (0..num_x as u32).collect()
            } else {
                emb_twist.clone()
            };
            // group into per-summand copies of the target
            let mut copy_of_j: BTreeMap<u32, u32> = BTreeMap::new();
            for (x, &tx) in map.iter().enumerate() {
                let j = shape.x_i[tx as usize];
                let copy = *copy_of_j.entry(j).or_insert_with(|| {
                    let c = copies[r].len() as u32;
                    copies[r].push(CopyRef {
                        q: spec.frak_q,
                        j,
                    });
                    placer.copy_open.resize(copies[r].len(), 0);
                    c
                });
                let slot = y0 as usize + x;
                b[r][slot] = tx;
                sb[r][slot] = copy;
            }
        }

        // image-reading classes: place pieces by template with spill.
        // Halfway-block copies go first so their wiring stays uniform (the
        // non-planarity certificates read it).
        let d_order: [Vec<usize>; 2] = [priority_order(lower, 0), priority_order(lower, 1)];
        let mut used_by_block: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (bid, info) in blocks.iter().enumerate() {
            let s = match fimg_side(info.class, r) {
                Some(s) => s,
                None => continue,
            };
            let p = info.p as usize;
            let k = info.copy;
            for &d in &d_order[s] {
                let members = &copy_members[s][d];
                if lower.copies[s][d].q != info.p || members.is_empty() {
                    continue;
                }
                let i = lower.copies[s][d].j as usize;
                // the local-cut-point mutation pins one class to a single
                // singleton summand, collapsing its spread entirely
                let force_single = matches!(family.sabotage, Some(Sabotage::Nlc2))
                    && info.class == BlockClass::MinusLower
                    && r == 1;
                // template position
                let template = if has_spread_duty(info.class, r) && !force_single {
                    let j_t = spec.j_assign[0][p]
                        .or(spec.j_assign[1][p])
                        .map(|j| j as usize);
                    match j_t {
                        Some(j_t) if spec.m_f[j_t][i] > 0 => {
                            let m = spec.m_f[j_t][i];
                            let d_t = match family.sabotage {
                                Some(Sabotage::Nop2)
                                    if (info.class == BlockClass::PlusLower && r == 0)
                                        || (info.class == BlockClass::PlusUpper && r == 1) =>
                                {
                                    k.min(1) % m
                                }
                                _ => k % m,
                            };
                            Some((j_t as u32, d_t))
                        }
                        _ => None,
                    }
                } else {
                    None
                };
                let forbidden = if family.sabotage == Some(Sabotage::Clsg) {
                    None
                } else {
                    Some(used_by_block.entry(bid as u32).or_default().clone())
                };
                let fref = forbidden.as_ref();
                // 1) template unit, 2) singleton summand rotated by block
                //    copy, 3) any open unit, 4) fresh copy of any singleton
                let fresh_single = |copies: &mut [Vec<CopyRef>; 2],
                                    placer: &mut Placer,
                                    rotate: usize|
                 -> Option<(u32, u32, u32)> {
                    let singles = singleton_summands(spec, i);
                    if singles.is_empty() {
                        return None;
                    }
                    let js = singles[rotate % singles.len()];
                    let copy = copies[r].len() as u32;
                    copies[r].push(CopyRef { q: info.q, j: js });
                    placer.copy_open.resize(copies[r].len(), 0);
                    Some((js, 0, copy))
                };
                let placed = if force_single {
                    fresh_single(&mut copies, &mut placer, 0)
                } else {
                    template
                        .and_then(|(j_t, d_t)| {
                            placer
                                .take_unit((j_t, i as u32, d_t), fref)
                                .map(|c| (j_t, d_t, c))
                        })
                        .or_else(|| fresh_single(&mut copies, &mut placer, k as usize))
                        .or_else(|| {
                            placer.take_any_for_i(i as u32, fref).map(|(j, d, c)| (j, d, c))
                        })
                };
                if std::env::var("NCCW_DEBUG_PLACE").is_ok()
                    && info.class == BlockClass::PlusLower
                    && r == 0
                    && lower.level == 2
                    && k == 0
                {
                    eprintln!(
                        "place block{bid} k{k} d{d} i{i} -> {:?} (template {:?})",
                        placed, template
                    );
                }
                let (j_t, d_t, copy) = placed.ok_or_else(|| {
                    TowerError::Assembly(format!(
                        "no target unit for piece (class {:?}, q{}, p{p}, copy {k}, lower copy {d})",
                        info.class, info.q
                    ))
                })?;
                used_by_block.entry(bid as u32).or_default().push(copy);
                let y0 = block_y0[bid];
                for &ly in members {
                    let slot = (y0 + (ly - lower.p_start[p])) as usize;
                    let lx = lower.b[s][ly as usize];
                    debug_assert_ne!(lx, UNDEF);
                    b[r][slot] = shape.fcopy_slot(j_t as usize, i, d_t, lower, lx);
                    sb[r][slot] = copy;
                }
            }
        }

        // lower F-factor blocks: fill remaining open units first, then
        // fresh singleton copies
        for (fid, info) in ffactor_blocks.iter().enumerate() {
            let i = info.i as usize;
            let placed = placer
                .take_any_for_i(i as u32, None)
                .map(|(j, d, c)| (j, d, c))
                .or_else(|| {
                    let singles = singleton_summands(spec, i);
                    if singles.is_empty() {
                        None
                    } else {
                        let cur = placer.singles_cursor.entry(info.i).or_insert(0);
                        let js = singles[(*cur as usize) % singles.len()];
                        *cur += 1;
                        let copy = copies[r].len() as u32;
                        copies[r].push(CopyRef { q: info.q, j: js });
                        placer.copy_open.resize(copies[r].len(), 0);
                        Some((js, 0, copy))
                    }
                });
            let (j_t, d_t, copy) = placed.ok_or_else(|| {
                TowerError::Assembly(format!(
                    "no target unit for F-factor block (q{}, i{i}, copy {})",
                    info.q, info.copy
                ))
            })?;
            let y0 = ffactor_y0[fid];
            for (kk, lx) in lower.x_block(i).enumerate() {
                let slot = (y0 as usize + kk) as usize;
                b[r][slot] = shape.fcopy_slot(j_t as usize, i, d_t, lower, lx as u32);
                sb[r][slot] = copy;
            }
        }

        // grave exception: upward blocks over missing lower values stay
        // undefined (free ends); everything else must be total, and no
        // copy may remain partially filled
        if placer.copy_open.iter().any(|&c| c > 0) {
            let deficit: u32 = placer.copy_open.iter().sum();
            return Err(TowerError::Assembly(format!(
                "side {r}: {deficit} copy units left unfilled (raise the F-factor multiplicities)"
            )));
        }
    }

    let stage = TowerStage {
        level: lower.level + 1,
        flavor: family.flavor,
        base: family.base,
        p_sizes,
        i_sizes: shape.i_sizes,
        p_start,
        i_start: shape.i_start,
        y_p,
        x_i: shape.x_i,
        b,
        sb,
        copies,
        y_origin,
        x_origin: shape.x_origin,
        blocks,
        ffactor_blocks,
        insertions: Vec::new(),
        meta: StageMeta {
            frak_block: Some(spec.frak_q),
            embedded_y0,
            grave: if family.flavor == Flavor::StablyProjectionless {
                derive_upper_grave(lower, spec)
            } else {
                None
            },
            i_kind: shape.i_kind,
            z_dist: None,
        },
    };
    stage
        .check_integrity()
        .map_err(TowerError::Integrity)?;
    if family.toggles.np4ni {
        conditions::check_np4ni_stage(&stage)?;
    }
    Ok(stage)
}

/// Predecessor twist on the stage's own vertex set: cyclic chains over the
/// `(summand, copy)` pairs for each `(lower summand, lower vertex)`, plus
/// the flip of the two halfway copies of each lower block (the grave copy,
/// having no partner, is fixed).
pub fn embedded_twist(
    lower: &TowerStage,
    spec: &ConnectorSpec,
    shape: &UpperShape,
) -> Vec<u32> {
    let num_x = shape.x_i.len();
    let mut w = vec![UNDEF; num_x];
    // chains per lower summand
    for i in 0..lower.i_sizes.len() {
        let chain: Vec<(usize, u32)> = (0..spec.num_j())
            .flat_map(|j| (0..spec.m_f[j][i]).map(move |d| (j, d)))
            .collect();
        if chain.is_empty() {
            continue;
        }
        for lx in lower.x_block(i) {
            for (pos, &(j, d)) in chain.iter().enumerate() {
                let pred = if pos == 0 { chain.len() - 1 } else { pos - 1 };
                let (pj, pd) = chain[pred];
                let from = shape.fcopy_slot(j, i, d, lower, lx as u32);
                let to = shape.fcopy_slot(pj, i, pd, lower, lx as u32);
                w[from as usize] = to;
            }
        }
    }
    // halfway-copy flips
    for p in 0..lower.p_sizes.len() {
        match (spec.j_assign[0][p], spec.j_assign[1][p]) {
            (Some(j0), Some(j1)) => {
                for ly in lower.y_block(p) {
                    let a = shape.ecopy_slot(j0 as usize, lower, ly as u32);
                    let c = shape.ecopy_slot(j1 as usize, lower, ly as u32);
                    w[a as usize] = c;
                    w[c as usize] = a;
                }
            }
            (Some(j0), None) => {
                for ly in lower.y_block(p) {
                    let a = shape.ecopy_slot(j0 as usize, lower, ly as u32);
                    w[a as usize] = a;
                }
            }
            (None, Some(j1)) => {
                for ly in lower.y_block(p) {
                    let a = shape.ecopy_slot(j1 as usize, lower, ly as u32);
                    w[a as usize] = a;
                }
            }
            (None, None) => {}
        }
    }
    debug_assert!(w.iter().all(|&v| v != UNDEF));
    w
}

/// Builds the first stage from seed data: the distinguished block is
/// enlarged by an embedded copy of the whole vertex set, with the global
/// cyclic twist as its target map.
pub fn build_level1(
    seed: &NccwData,
    family: &TowerFamilySpec,
    frak_p: Option<usize>,
) -> Result<TowerStage, TowerError> {
    let report = validate_nccw(seed);
    if !report.is_valid() {
        return Err(TowerError::Seed(report.errors));
    }
    let grave = report.grave.map(|p| p.0);
    if family.flavor == Flavor::StablyProjectionless && grave.is_none() {
        return Err(TowerError::Seed(vec![
            "projectionless flavor needs exactly one non-unital target block".into(),
        ]));
    }
    if family.flavor == Flavor::Unital && !report.fully_unital() {
        return Err(TowerError::Seed(vec![
            "unital flavor needs unital boundary maps".into(),
        ]));
    }
    let dual = dualize(seed);
    let np = seed.num_p();
    let ni = seed.num_i();
    let num_x = dual.num_x();

    let mut y_p = Vec::new();
    let mut y_origin = Vec::new();
    let mut p_start = Vec::with_capacity(np);
    let mut p_sizes = Vec::with_capacity(np);
    let mut b = [Vec::new(), Vec::new()];
    let mut sb = [Vec::new(), Vec::new()];
    let mut copies: [Vec<CopyRef>; 2] = [Vec::new(), Vec::new()];
    let mut copy_map: [BTreeMap<u32, u32>; 2] = [BTreeMap::new(), BTreeMap::new()];
    let mut embedded_y0 = None;
    for p in 0..np {
        p_start.push(y_p.len() as u32);
        for y in dual.y_block(crate::ids::PIdx(p as u32)) {
            y_p.push(p as u32);
            y_origin.push(YOrigin::Seed);
            for r in 0..2 {
                match (dual.b[r][y], dual.slot_block[r][y]) {
                    (Some(x), Some(c)) => {
                        let info = dual.copies[r][c.idx()];
                        let copy = *copy_map[r].entry(c.0).or_insert_with(|| {
                            copies[r].push(CopyRef {
                                q: info.p.0,
                                j: info.i.0,
                            });
                            copies[r].len() as u32 - 1
                        });
                        b[r].push(x.0);
                        sb[r].push(copy);
                    }
                    _ => {
                        b[r].push(UNDEF);
                        sb[r].push(UNDEF);
                    }
                }
            }
        }
        if frak_p == Some(p) {
            embedded_y0 = Some(y_p.len() as u32);
            // b0 = identity onto X; copies: one per summand
            let mut c0_of: BTreeMap<u32, u32> = BTreeMap::new();
            let mut c1_of: BTreeMap<u32, u32> = BTreeMap::new();
            for x in 0..num_x as u32 {
                y_p.push(p as u32);
                y_origin.push(YOrigin::Embedded { x });
                let i = dual.x_i[x as usize].0;
                let c0 = *c0_of.entry(i).or_insert_with(|| {
                    copies[0].push(CopyRef { q: p as u32, j: i });
                    copies[0].len() as u32 - 1
                });
                b[0].push(x);
                sb[0].push(c0);
                // global cyclic predecessor
                let tx = if x == 0 { num_x as u32 - 1 } else { x - 1 };
                let ti = dual.x_i[tx as usize].0;
                let c1 = *c1_of.entry(ti).or_insert_with(|| {
                    copies[1].push(CopyRef { q: p as u32, j: ti });
                    copies[1].len() as u32 - 1
                });
                b[1].push(tx);
                sb[1].push(c1);
            }
        }
        p_sizes.push(y_p.len() as u32 - p_start[p]);
    }

    let stage = TowerStage {
        level: 1,
        flavor: family.flavor,
        base: family.base,
        p_sizes,
        i_sizes: seed.i_sizes.clone(),
        p_start,
        i_start: dual.i_start.clone(),
        y_p,
        x_i: dual.x_i.iter().map(|i| i.0).collect(),
        b,
        sb,
        copies,
        y_origin,
        x_origin: vec![XOrigin::Seed; num_x],
        blocks: Vec::new(),
        ffactor_blocks: Vec::new(),
        insertions: Vec::new(),
        meta: StageMeta {
            frak_block: frak_p.map(|p| p as u32),
            embedded_y0,
            grave,
            i_kind: vec![IKind::Plain; ni],
            z_dist: None,
        },
    };
    stage.check_integrity().map_err(TowerError::Integrity)?;
    Ok(stage)
}

/// Appends `count` plain identity-loop copies of the stage's own summand
/// `j` to every edge block (the separating-sequence insertion).
pub fn insert_plain_loops(stage: &mut TowerStage, j: usize, count: u32) {
    if count == 0 {
        return;
    }
    for q in 0..stage.p_sizes.len() {
        for _ in 0..count {
            append_idf_copy(stage, q, j, IdFKind::Plain, None);
        }
    }
}

/// Appends the self-gluing insertion: one twisted copy of `X^j` per
/// `(j, i, d)` copy at the chosen block. The twist fixes the `(i, d)`
/// sub-block pointwise and shifts every other copy of the same type.
pub fn apply_sccb(stage: &mut TowerStage, q_tilde: usize) -> Result<(), TowerError> {
    let nj = stage.i_sizes.len();
    let mut jobs = Vec::new();
    for j in 0..nj {
        // copies of lower summands inside j
        let mut per_i: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for x in stage.x_block(j) {
            if let XOrigin::FCopy { i, d, .. } = stage.x_origin[x] {
                per_i.entry(i).or_default().push(d);
            } else if stage.level == 1 {
                // at level 1 the sub-blocks are the vertices themselves
            }
        }
        if stage.level == 1 {
            // level-1 twist: per vertex d of the summand
            for d in 0..stage.i_sizes[j] {
                jobs.push((j, j as u32, d, true));
            }
            continue;
        }
        for (i, ds) in per_i {
            let mut ds = ds;
            ds.sort_unstable();
            ds.dedup();
            for d in ds {
                jobs.push((j, i, d, false));
            }
        }
    }
    for (j, i, d, level1) in jobs {
        let kind = IdFKind::Sccb { i, d };
        let twist = sccb_twist(stage, j, i, d, level1)?;
        append_idf_copy(stage, q_tilde, j, kind, Some(twist));
    }
    Ok(())
}

/// The twist permutation for one self-gluing copy over `X^j`.
fn sccb_twist(
    stage: &TowerStage,
    j: usize,
    i: u32,
    d: u32,
    level1: bool,
) -> Result<Vec<u32>, TowerError> {
    let block: Vec<usize> = stage.x_block(j).collect();
    let size = block.len();
    let mut w: Vec<u32> = block.iter().map(|&x| x as u32).collect();
    if level1 {
        // fix the vertex at position d, cycle the others
        let others: Vec<usize> = (0..size).filter(|&k| k as u32 != d).collect();
        if others.len() == 1 {
            return Err(TowerError::Condition {
                name: "sccb",
                detail: format!("summand {j} has size 2; no derangement fixes one point"),
            });
        }
        for (pos, &k) in others.iter().enumerate() {
            let next = others[(pos + 1) % others.len().max(1)];
            w[k] = block[next] as u32;
        }
        return Ok(w);
    }
    // group positions by (origin kind): per (i', d') sub-blocks
    let mut sub: BTreeMap<(u32, u32), Vec<(usize, u32)>> = BTreeMap::new();
    for &x in &block {
        if let XOrigin::FCopy { i: fi, d: fd, x: lx } = stage.x_origin[x] {
            sub.entry((fi, fd)).or_default().push((x, lx));
        }
    }
    let mut d_lists: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &(fi, fd) in sub.keys() {
        d_lists.entry(fi).or_default().push(fd);
    }
    for (&fi, ds) in &d_lists {
        let n = ds.len();
        if fi == i {
            // fix d, cycle the rest
            let others: Vec<u32> = ds.iter().copied().filter(|&x| x != d).collect();
            if others.len() == 1 {
                return Err(TowerError::Condition {
                    name: "sccb",
                    detail: format!(
                        "summand {j}: two copies of type {fi}; no derangement fixes one"
                    ),
                });
            }
            for (pos, &fd) in others.iter().enumerate() {
                let to = others[(pos + 1) % others.len().max(1)];
                map_subblock(&sub, fi, fd, to, &mut w, stage);
            }
        } else {
            if n == 1 {
                return Err(TowerError::Condition {
                    name: "sccb",
                    detail: format!("summand {j}: single copy of type {fi} cannot be deranged"),
                });
            }
            for (pos, &fd) in ds.iter().enumerate() {
                let to = ds[(pos + 1) % n];
                map_subblock(&sub, fi, fd, to, &mut w, stage);
            }
        }
    }
    Ok(w)
}

fn map_subblock(
    sub: &BTreeMap<(u32, u32), Vec<(usize, u32)>>,
    fi: u32,
    from_d: u32,
    to_d: u32,
    w: &mut [u32],
    stage: &TowerStage,
) {
    let from = &sub[&(fi, from_d)];
    let to = &sub[&(fi, to_d)];
    // both lists are in ascending lower-vertex order by construction
    for (&(fx, flx), &(tx, tlx)) in from.iter().zip(to.iter()) {
        debug_assert_eq!(flx, tlx);
        let base = stage
            .x_block(stage.x_i[fx] as usize)
            .next()
            .unwrap();
        w[fx - base] = tx as u32;
    }
}

/// Appends one identity-loop copy of summand `j` at block `q`: one new edge
/// per vertex of `X^j`, with plain or twisted target.
fn append_idf_copy(
    stage: &mut TowerStage,
    q: usize,
    j: usize,
    kind: IdFKind,
    twist: Option<Vec<u32>>,
) {
    let ins = stage.insertions.len() as u32;
    stage.insertions.push(IdFInfo {
        q: q as u32,
        j: j as u32,
        kind,
    });
    let block: Vec<u32> = stage.x_block(j).map(|x| x as u32).collect();
    let insert_at = stage.p_start[q] as usize + stage.p_sizes[q] as usize;
    let count = block.len();
    // shift block starts after q
    for p in q + 1..stage.p_sizes.len() {
        stage.p_start[p] += count as u32;
    }
    stage.p_sizes[q] += count as u32;

    let c0 = stage.copies[0].len() as u32;
    stage.copies[0].push(CopyRef {
        q: q as u32,
        j: j as u32,
    });
    let c1 = stage.copies[1].len() as u32;
    stage.copies[1].push(CopyRef {
        q: q as u32,
        j: j as u32,
    });
    for (pos, &x) in block.iter().enumerate() {
        let target1 = match &twist {
            None => x,
            Some(w) => w[pos],
        };
        let at = insert_at + pos;
        stage.y_p.insert(at, q as u32);
        stage.y_origin.insert(at, YOrigin::IdF { ins, x });
        stage.b[0].insert(at, x);
        stage.sb[0].insert(at, c0);
        stage.b[1].insert(at, target1);
        stage.sb[1].insert(at, c1);
    }
    debug_assert!(stage.check_integrity().is_ok());
}
