//! Named tower recipes: seeds plus per-level connector tables, with the
//! bookkeeping that keeps the slot assembly feasible (safe F-factor
//! top-ups, singleton summands for spill placement).

use super::build::{build_level1, build_stage, insert_plain_loops, apply_sccb};
use super::*;
use crate::model::NccwData;

/// Per-level multiplicity choices of a path-modification tower.
#[derive(Clone, Copy, Debug)]
pub struct PathParams {
    pub m_plus_upper: u32,
    pub m_plus_lower: u32,
    pub m_minus_upper: u32,
    pub m_minus_lower: u32,
    pub m_const_low: u32,
    pub m_const_high: u32,
    /// Multiplicity of lower summands inside the distinguished upper ones.
    pub dist_mult: u32,
    /// Zero the distinguished multiplicities and pin the F-factor count
    /// (the local-connectedness mutation).
    pub starve_dist: bool,
}

impl PathParams {
    /// Parameters satisfying every §5 condition: three-fold spread and the
    /// nine halfway blocks.
    pub fn nop() -> PathParams {
        PathParams {
            m_plus_upper: 3,
            m_plus_lower: 3,
            m_minus_upper: 3,
            m_minus_lower: 3,
            m_const_low: 9,
            m_const_high: 0,
            dist_mult: 3,
            starve_dist: false,
        }
    }

    /// Small unital tower satisfying only the basic multiplicity bound.
    pub fn small() -> PathParams {
        PathParams {
            m_plus_upper: 2,
            m_plus_lower: 2,
            m_minus_upper: 2,
            m_minus_lower: 2,
            m_const_low: 2,
            m_const_high: 2,
            dist_mult: 3,
            starve_dist: false,
        }
    }

    /// Stably projectionless tower with two-fold branching at the ends.
    pub fn spl() -> PathParams {
        PathParams {
            m_plus_upper: 2,
            m_plus_lower: 2,
            m_minus_upper: 0,
            m_minus_lower: 0,
            m_const_low: 2,
            m_const_high: 0,
            dist_mult: 3,
            starve_dist: false,
        }
    }
}

const SINGLETONS_PER_TYPE: u32 = 3;

/// Connector table over the given stage: single target block, two
/// distinguished summands in the unital flavor (one when there is a grave
/// block), three singleton summands per lower type for spill placement,
/// and F-factor counts covering every halfway-copy unit.
pub fn path_spec_for(lower: &TowerStage, params: &PathParams, flavor: Flavor) -> ConnectorSpec {
    let np = lower.p_sizes.len();
    let ni = lower.i_sizes.len();
    assert_eq!(np, 1, "path recipes use a single block per level");
    let unital = flavor == Flavor::Unital;
    let n_dist = if unital { 2 } else { 1 };
    let nj = n_dist + (SINGLETONS_PER_TYPE as usize) * ni;
    let mut m_f = vec![vec![0u32; ni]; nj];
    for j in 0..n_dist {
        for i in 0..ni {
            m_f[j][i] = if params.starve_dist { 0 } else { params.dist_mult };
        }
    }
    for i in 0..ni {
        for k in 0..SINGLETONS_PER_TYPE as usize {
            m_f[n_dist + (SINGLETONS_PER_TYPE as usize) * i + k][i] = 1;
        }
    }
    let j_assign = if unital {
        [vec![Some(0u32)], vec![Some(1u32)]]
    } else {
        [vec![Some(0u32)], vec![None]]
    };

    // halfway-copy counts per side and distinguished summand
    let (c0_j0, c1_j0, c0_j1, c1_j1) = if unital {
        (
            params.m_plus_upper + params.m_const_low,
            params.m_minus_upper + params.m_const_low,
            params.m_minus_lower + params.m_const_high,
            params.m_plus_lower + params.m_const_high,
        )
    } else {
        // every half-end falls back onto the single distinguished summand
        (
            params.m_plus_upper + params.m_const_low + params.m_minus_lower,
            params.m_minus_upper + params.m_const_low + params.m_plus_lower,
            0,
            0,
        )
    };
    // safe top-up: enough F-factor blocks to fill every unit even when the
    // affine pieces all spill to singletons
    let m_f_factor: Vec<u32> = (0..ni)
        .map(|i| {
            let units_0 = c0_j0 * m_f[0][i] + if unital { c0_j1 * m_f[1][i] } else { 0 };
            let units_1 = c1_j0 * m_f[0][i] + if unital { c1_j1 * m_f[1][i] } else { 0 };
            units_0.max(units_1).max(2)
        })
        .collect();

    let one = |v: u32| vec![vec![v; np]; 1];
    ConnectorSpec {
        num_q: 1,
        m_plus_upper: one(params.m_plus_upper),
        m_plus_lower: one(params.m_plus_lower),
        m_minus_upper: one(params.m_minus_upper),
        m_minus_lower: one(params.m_minus_lower),
        m_const_low: one(params.m_const_low),
        m_const_high: one(params.m_const_high),
        m_ident: one(0),
        m_f_factor: vec![m_f_factor],
        m_f,
        j_assign,
        frak_q: 0,
        z_blocks: Vec::new(),
    }
}

/// Unital seed: one block of the smallest size clearing the size condition.
pub fn unital_seed() -> NccwData {
    NccwData::with_canonical_layout(vec![5], vec![1], [vec![vec![5]], vec![vec![5]]])
}

/// Stably projectionless seed: the target map misses one slot.
pub fn spl_seed() -> NccwData {
    NccwData::with_canonical_layout(vec![5], vec![1], [vec![vec![5]], vec![vec![4]]])
}

/// Two independent summands; with the distinguished block enabled, the
/// level-1 cycle runs through both vertex sets.
pub fn conn_two_summand_seed() -> NccwData {
    NccwData::with_canonical_layout(
        vec![2, 2],
        vec![1, 1],
        [vec![vec![2, 0], vec![0, 2]], vec![vec![2, 0], vec![0, 2]]],
    )
}

/// Connectivity-modification table: full-interval blocks everywhere, one
/// multi-type summand plus singletons.
pub fn conn_spec_for(lower: &TowerStage) -> ConnectorSpec {
    let np = lower.p_sizes.len();
    let ni = lower.i_sizes.len();
    let nj = 1 + (SINGLETONS_PER_TYPE as usize) * ni;
    let mut m_f = vec![vec![0u32; ni]; nj];
    for i in 0..ni {
        m_f[0][i] = 1;
        for k in 0..SINGLETONS_PER_TYPE as usize {
            m_f[1 + (SINGLETONS_PER_TYPE as usize) * i + k][i] = 1;
        }
    }
    let zero = vec![vec![0u32; np]; 1];
    ConnectorSpec {
        num_q: 1,
        m_plus_upper: zero.clone(),
        m_plus_lower: zero.clone(),
        m_minus_upper: zero.clone(),
        m_minus_lower: zero.clone(),
        m_const_low: zero.clone(),
        m_const_high: zero.clone(),
        m_ident: vec![vec![1; np]; 1],
        m_f_factor: vec![vec![1; ni]; 1],
        m_f,
        j_assign: [vec![None; np], vec![None; np]],
        frak_q: 0,
        z_blocks: Vec::new(),
    }
}

/// Drives a full tower build: level 1 with insertions, then per-level
/// connector tables, insertions and self-gluing blocks.
pub fn build_tower<F>(
    seed: &NccwData,
    frak_p: Option<usize>,
    family: TowerFamilySpec,
    depth: usize,
    spec_for: F,
) -> Result<Tower, TowerError>
where
    F: Fn(&TowerStage) -> ConnectorSpec,
{
    let mut stage = build_level1(seed, &family, frak_p)?;
    apply_insertions(&mut stage, &family, 1)?;
    let mut stages = vec![stage];
    let mut specs = Vec::new();
    for level in 2..=depth {
        let spec = spec_for(stages.last().unwrap());
        let mut next = build_stage(stages.last().unwrap(), &spec, &family)?;
        apply_insertions(&mut next, &family, level)?;
        specs.push(spec);
        stages.push(next);
    }
    Ok(Tower {
        family,
        stages,
        specs,
    })
}

fn apply_insertions(
    stage: &mut TowerStage,
    family: &TowerFamilySpec,
    level: usize,
) -> Result<(), TowerError> {
    let count = family.insert_seq.get(level - 1).copied().unwrap_or(0);
    if count > 0 {
        let j = match family.insert_j.get(level - 1).copied() {
            Some(j) if j != UNDEF => j as usize,
            _ => first_plain_summand(stage)?,
        };
        insert_plain_loops(stage, j, count);
    }
    if family.toggles.sccb {
        apply_sccb(stage, 0)?;
    }
    Ok(())
}

fn first_plain_summand(stage: &TowerStage) -> Result<usize, TowerError> {
    stage
        .meta
        .i_kind
        .iter()
        .position(|k| matches!(k, IKind::Plain))
        .ok_or_else(|| TowerError::SpecShape("no plain summand for loop insertion".into()))
}

// ---------------------------------------------------------------------------
// Named towers
// ---------------------------------------------------------------------------

/// Unital path tower with the full §5 condition set.
pub fn nop_tower(depth: usize) -> Result<Tower, TowerError> {
    let family = TowerFamilySpec {
        base: BaseKind::Path,
        flavor: Flavor::Unital,
        toggles: Toggles::all_path(),
        insert_seq: Vec::new(),
        insert_j: Vec::new(),
        sabotage: None,
    };
    build_tower(&unital_seed(), Some(0), family, depth, |lower| {
        path_spec_for(lower, &PathParams::nop(), Flavor::Unital)
    })
}

/// Small unital path tower (basic multiplicity bound only).
pub fn small_path_tower(depth: usize) -> Result<Tower, TowerError> {
    let family = TowerFamilySpec::plain(BaseKind::Path, Flavor::Unital);
    build_tower(&unital_seed(), Some(0), family, depth, |lower| {
        path_spec_for(lower, &PathParams::small(), Flavor::Unital)
    })
}

/// Stably projectionless tower with branching ends.
pub fn spl_tower(depth: usize) -> Result<Tower, TowerError> {
    let mut toggles = Toggles::default();
    toggles.nlc1 = true;
    let family = TowerFamilySpec {
        base: BaseKind::Path,
        flavor: Flavor::StablyProjectionless,
        toggles,
        insert_seq: Vec::new(),
        insert_j: Vec::new(),
        sabotage: None,
    };
    build_tower(&spl_seed(), Some(0), family, depth, |lower| {
        path_spec_for(lower, &PathParams::spl(), Flavor::StablyProjectionless)
    })
}

/// Connectivity tower over two independent summands; disabling the
/// distinguished block skips the level-1 modification entirely.
pub fn conn_tower(depth: usize, enable_frak: bool) -> Result<Tower, TowerError> {
    let family = TowerFamilySpec::plain(BaseKind::Conn, Flavor::Unital);
    build_tower(
        &conn_two_summand_seed(),
        if enable_frak { Some(0) } else { None },
        family,
        depth,
        conn_spec_for,
    )
}

/// Self-gluing tower with a separating insertion sequence.
pub fn sccb_tower(depth: usize, insert_seq: Vec<u32>) -> Result<Tower, TowerError> {
    let mut toggles = Toggles::default();
    toggles.clsg = true;
    toggles.np4ni = true;
    toggles.sccb = true;
    let family = TowerFamilySpec {
        base: BaseKind::Path,
        flavor: Flavor::Unital,
        toggles,
        insert_j: vec![UNDEF; insert_seq.len()],
        insert_seq,
        sabotage: None,
    };
    let params = PathParams {
        m_plus_upper: 2,
        m_plus_lower: 2,
        m_minus_upper: 2,
        m_minus_lower: 2,
        m_const_low: 1,
        m_const_high: 1,
        dist_mult: 3,
        starve_dist: false,
    };
    build_tower(&unital_seed(), Some(0), family, depth, move |lower| {
        path_spec_for(lower, &params, Flavor::Unital)
    })
}

/// The six single-condition mutants: each one breaks exactly its target.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mutant {
    Nlc1,
    Nlc2,
    Nop1,
    Nop2,
    Clsg,
    Np4ni,
}

pub const ALL_MUTANTS: [Mutant; 6] = [
    Mutant::Nlc1,
    Mutant::Nlc2,
    Mutant::Nop1,
    Mutant::Nop2,
    Mutant::Clsg,
    Mutant::Np4ni,
];

impl Mutant {
    pub fn condition_name(&self) -> &'static str {
        match self {
            Mutant::Nlc1 => "nlc1",
            Mutant::Nlc2 => "nlc2",
            Mutant::Nop1 => "nop1",
            Mutant::Nop2 => "nop2",
            Mutant::Clsg => "clsg",
            Mutant::Np4ni => "np4ni",
        }
    }
}

/// The stage pair of a mutant tower carrying the defect.
pub fn mutant_check_level(mutant: Mutant) -> usize {
    match mutant {
        // copy reuse needs several lower summand types in play
        Mutant::Clsg => 2,
        _ => 1,
    }
}

/// Builds the mutated tower (enforcement off, so the defect lands in the
/// built stages for the checker to find).
pub fn mutant_tower(mutant: Mutant) -> Result<Tower, TowerError> {
    let family = TowerFamilySpec {
        base: BaseKind::Path,
        flavor: Flavor::Unital,
        toggles: Toggles::default(),
        insert_seq: Vec::new(),
        insert_j: Vec::new(),
        sabotage: match mutant {
            Mutant::Nlc2 => Some(Sabotage::Nlc2),
            Mutant::Nop2 => Some(Sabotage::Nop2),
            Mutant::Clsg => Some(Sabotage::Clsg),
            _ => None,
        },
    };
    let seed = match mutant {
        // the size bound fails already at the first level
        Mutant::Np4ni => {
            NccwData::with_canonical_layout(vec![3], vec![1], [vec![vec![3]], vec![vec![3]]])
        }
        _ => unital_seed(),
    };
    let params = match mutant {
        Mutant::Nop1 => PathParams {
            m_const_low: 8,
            m_const_high: 0,
            ..PathParams::nop()
        },
        Mutant::Nlc1 => PathParams {
            starve_dist: true,
            ..PathParams::nop()
        },
        _ => PathParams::nop(),
    };
    let depth = mutant_check_level(mutant) + 1;
    build_tower(&seed, Some(0), family, depth, move |lower| {
        let mut spec = path_spec_for(lower, &params, Flavor::Unital);
        if mutant == Mutant::Nlc1 {
            // a single F-factor block per type breaks the two-fold bound
            // while staying assemblable (no halfway units to fill)
            for row in spec.m_f_factor.iter_mut() {
                for v in row.iter_mut() {
                    *v = 1;
                }
            }
        }
        spec
    })
}

/// The spectrum of a tower stage as a 1-complex: vertices are the stage's
/// vertex slots (cells where marked), one edge per edge slot, free where a
/// boundary value is missing.
pub fn spec_b_gen(stage: &TowerStage) -> crate::spectrum::TopGraph {
    use crate::spectrum::{Endpoint, TopGraph, VertexKind};
    let mut g = TopGraph::default();
    for x in 0..stage.num_x() as u32 {
        let kind = if stage.meta.z_dist == Some(stage.x_i[x as usize]) {
            VertexKind::ZCell
        } else {
            VertexKind::XClass
        };
        g.add_vertex(kind, format!("x{x}"));
    }
    for y in 0..stage.num_y() as u32 {
        let e = |r: usize| match stage.b_of(r, y) {
            Some(x) => Endpoint::Attached(x),
            None => Endpoint::Free,
        };
        g.add_edge(e(0), e(1), format!("y{y}"), None);
    }
    g
}
