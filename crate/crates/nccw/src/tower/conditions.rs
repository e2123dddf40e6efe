//! Condition checkers: finite quantifier sweeps over the block tables and
//! boundary maps of a stage pair. Each check reports a concrete violating
//! tuple when it fails.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::build::check_m_ge_1;
use super::connector::ConnectorMap;
use super::{
    BaseKind, BlockClass, ConnectorSpec, TowerError, TowerFamilySpec, TowerStage, XOrigin, UNDEF,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CondStatus {
    Pass,
    Fail(String),
    NotApplicable,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionOutcome {
    pub name: &'static str,
    pub status: CondStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub outcomes: Vec<ConditionOutcome>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes
            .iter()
            .all(|o| !matches!(o.status, CondStatus::Fail(_)))
    }

    pub fn status(&self, name: &str) -> Option<&CondStatus> {
        self.outcomes
            .iter()
            .find(|o| o.name == name)
            .map(|o| &o.status)
    }

    pub fn failures(&self) -> Vec<&ConditionOutcome> {
        self.outcomes
            .iter()
            .filter(|o| matches!(o.status, CondStatus::Fail(_)))
            .collect()
    }
}

impl std::fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for o in &self.outcomes {
            match &o.status {
                CondStatus::Pass => writeln!(f, "  [pass] {}", o.name)?,
                CondStatus::NotApplicable => writeln!(f, "  [ -- ] {}", o.name)?,
                CondStatus::Fail(w) => writeln!(f, "  [FAIL] {}: {}", o.name, w)?,
            }
        }
        Ok(())
    }
}

/// Spec-level inequalities checked before building, so a violated toggle is
/// a typed error naming the failing inequality.
pub fn precheck_spec(
    lower: &TowerStage,
    spec: &ConnectorSpec,
    family: &TowerFamilySpec,
) -> Result<(), TowerError> {
    if family.toggles.nlc1 {
        if let CondStatus::Fail(w) = nlc1_status(lower, spec) {
            return Err(TowerError::Condition {
                name: "nlc1",
                detail: w,
            });
        }
    }
    if family.toggles.nop1 {
        if let CondStatus::Fail(w) = nop1_status(lower, spec) {
            return Err(TowerError::Condition {
                name: "nop1",
                detail: w,
            });
        }
    }
    Ok(())
}

fn nlc1_status(lower: &TowerStage, spec: &ConnectorSpec) -> CondStatus {
    let np = lower.p_sizes.len();
    let classes = [
        ("m+", &spec.m_plus_upper),
        ("m_+", &spec.m_plus_lower),
        ("m-", &spec.m_minus_upper),
        ("m_-", &spec.m_minus_lower),
    ];
    for p in 0..np {
        for (name, table) in &classes {
            let total: u32 = (0..spec.num_q).map(|q| table[q][p]).sum();
            if total == 1 {
                return CondStatus::Fail(format!(
                    "sum_q {name}(q, p{p}) = 1, must be 0 or >= 2"
                ));
            }
        }
        let half: u32 = (0..spec.num_q)
            .map(|q| spec.m_const_low[q][p] + spec.m_const_high[q][p])
            .sum();
        if half < 2 {
            return CondStatus::Fail(format!(
                "sum_q (m_underline + m_overline)(q, p{p}) = {half} < 2"
            ));
        }
    }
    for i in 0..lower.i_sizes.len() {
        let total: u32 = (0..spec.num_q).map(|q| spec.m_f_factor[q][i]).sum();
        if total < 2 {
            return CondStatus::Fail(format!("sum_q m^(q, i{i}) = {total} < 2"));
        }
    }
    CondStatus::Pass
}

fn nop1_status(lower: &TowerStage, spec: &ConnectorSpec) -> CondStatus {
    let np = lower.p_sizes.len();
    for p in 0..np {
        let up: u32 = (0..spec.num_q).map(|q| spec.m_plus_upper[q][p]).sum();
        let low: u32 = (0..spec.num_q).map(|q| spec.m_plus_lower[q][p]).sum();
        if up < 1 || low < 1 {
            return CondStatus::Fail(format!("sum_q m+ or m_+ vanishes at p{p}"));
        }
        let cl: u32 = (0..spec.num_q).map(|q| spec.m_const_low[q][p]).sum();
        let ch: u32 = (0..spec.num_q).map(|q| spec.m_const_high[q][p]).sum();
        if cl < 9 && ch < 9 {
            return CondStatus::Fail(format!(
                "sum_q m_underline(q, p{p}) = {cl} and sum_q m_overline = {ch}, neither >= 9"
            ));
        }
    }
    CondStatus::Pass
}

pub fn check_np4ni_stage(stage: &TowerStage) -> Result<(), TowerError> {
    for (p, &psz) in stage.p_sizes.iter().enumerate() {
        for (i, &isz) in stage.i_sizes.iter().enumerate() {
            if psz <= 4 * isz {
                return Err(TowerError::Condition {
                    name: "np4ni",
                    detail: format!(
                        "{{n,p{p}}} = {psz} <= 4 * [n,i{i}] = {}",
                        4 * isz
                    ),
                });
            }
        }
    }
    Ok(())
}

fn np4ni_status(stage: &TowerStage) -> CondStatus {
    match check_np4ni_stage(stage) {
        Ok(()) => CondStatus::Pass,
        Err(TowerError::Condition { detail, .. }) => CondStatus::Fail(detail),
        Err(_) => unreachable!(),
    }
}

/// Duty pairs of the spread sweeps: each halving class at the side where
/// its reparametrisation takes a boundary value.
const NLC2_DUTY: [(BlockClass, usize); 4] = [
    (BlockClass::PlusUpper, 1),
    (BlockClass::PlusLower, 0),
    (BlockClass::MinusUpper, 0),
    (BlockClass::MinusLower, 1),
];

const NOP2_DUTY: [(BlockClass, usize); 2] =
    [(BlockClass::PlusLower, 0), (BlockClass::PlusUpper, 1)];

/// Position of a boundary value inside the upper vertex table: which
/// summand-copy slot carries it.
fn target_position(upper: &TowerStage, x: u32) -> (u32, u32) {
    match upper.x_origin[x as usize] {
        XOrigin::FCopy { d, .. } => (upper.x_i[x as usize], d),
        XOrigin::ECopy { .. } => (upper.x_i[x as usize], u32::MAX),
        XOrigin::Seed => unreachable!(),
    }
}

fn lambda_side(class: BlockClass, r: usize) -> Option<usize> {
    use BlockClass::*;
    match (class, r) {
        (PlusLower, 0) | (MinusLower, 1) => Some(0),
        (MinusUpper, 0) | (PlusUpper, 1) => Some(1),
        (Ident, r) => Some(r),
        _ => None,
    }
}

struct Sweep<'a> {
    conn: ConnectorMap<'a>,
    /// Lower copy members per side.
    copy_members: [Vec<Vec<u32>>; 2],
}

impl<'a> Sweep<'a> {
    fn new(lower: &'a TowerStage, upper: &'a TowerStage, spec: &'a ConnectorSpec) -> Sweep<'a> {
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
        Sweep {
            conn: ConnectorMap::new(lower, upper, spec),
            copy_members,
        }
    }

    /// Spread check: for every lower copy of side `s` over block `p`, the
    /// blocks of `class` must reach at least `need` distinct positions.
    fn spread(&self, duty: &[(BlockClass, usize)], need: usize) -> CondStatus {
        let lower = self.conn.lower;
        let upper = self.conn.upper;
        for &(class, r) in duty {
            let s = lambda_side(class, r).unwrap();
            let blocks: Vec<u32> = (0..upper.blocks.len() as u32)
                .filter(|&b| upper.blocks[b as usize].class == class)
                .collect();
            if blocks.is_empty() {
                continue;
            }
            for (d, members) in self.copy_members[s].iter().enumerate() {
                if members.is_empty() {
                    continue;
                }
                let p = lower.copies[s][d].q;
                let ly = members[0];
                let mine: Vec<u32> = blocks
                    .iter()
                    .copied()
                    .filter(|&b| upper.blocks[b as usize].p == p)
                    .collect();
                if mine.is_empty() {
                    continue;
                }
                let mut positions = BTreeSet::new();
                for &b in &mine {
                    let slot = self.conn.block_slot(b, ly);
                    let x = upper.b[r][slot as usize];
                    if x == UNDEF {
                        continue;
                    }
                    positions.insert(target_position(upper, x));
                }
                if positions.len() < need.min(mine.len().max(1)) || positions.len() < need {
                    return CondStatus::Fail(format!(
                        "class {class:?} at r={r}: lower copy {d} over p{p} reaches only {} \
                         distinct positions (need {need}); witness edge y{ly}",
                        positions.len()
                    ));
                }
            }
        }
        CondStatus::Pass
    }

    /// Per-block injectivity of the copy assignment over the lower copies.
    fn clsg(&self) -> CondStatus {
        let lower = self.conn.lower;
        let upper = self.conn.upper;
        for r in 0..2 {
            for (bid, info) in upper.blocks.iter().enumerate() {
                let s = match lambda_side(info.class, r) {
                    Some(s) => s,
                    None => continue,
                };
                let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
                for (d, members) in self.copy_members[s].iter().enumerate() {
                    if members.is_empty() || lower.copies[s][d].q != info.p {
                        continue;
                    }
                    let slot = self.conn.block_slot(bid as u32, members[0]);
                    let copy = upper.sb[r][slot as usize];
                    if copy == UNDEF {
                        continue;
                    }
                    if let Some(prev) = seen.insert(copy, d) {
                        return CondStatus::Fail(format!(
                            "block {bid} ({:?} over q{} p{}) sends lower copies {prev} and {d} \
                             into the same upper copy {copy} at r={r}",
                            info.class, info.q, info.p
                        ));
                    }
                }
            }
        }
        CondStatus::Pass
    }
}

/// Runs every checker on a stage pair; conditions whose construction is
/// absent report `NotApplicable`.
pub fn check_conditions(
    lower: &TowerStage,
    upper: &TowerStage,
    spec: &ConnectorSpec,
    family: &TowerFamilySpec,
) -> ConditionReport {
    let mut outcomes = Vec::new();
    let path_base = family.base == BaseKind::Path;

    outcomes.push(ConditionOutcome {
        name: "m>1",
        status: if path_base {
            match check_m_ge_1(lower, spec, family.flavor) {
                Ok(()) => CondStatus::Pass,
                Err(TowerError::Condition { detail, .. }) => CondStatus::Fail(detail),
                Err(_) => unreachable!(),
            }
        } else {
            CondStatus::NotApplicable
        },
    });

    outcomes.push(ConditionOutcome {
        name: "nlc1",
        status: if path_base {
            nlc1_status(lower, spec)
        } else {
            CondStatus::NotApplicable
        },
    });
    outcomes.push(ConditionOutcome {
        name: "nop1",
        status: if path_base {
            nop1_status(lower, spec)
        } else {
            CondStatus::NotApplicable
        },
    });

    let sweep = Sweep::new(lower, upper, spec);
    outcomes.push(ConditionOutcome {
        name: "nlc2",
        status: if path_base {
            sweep.spread(&NLC2_DUTY, 2)
        } else {
            CondStatus::NotApplicable
        },
    });
    outcomes.push(ConditionOutcome {
        name: "nop2",
        status: if path_base {
            sweep.spread(&NOP2_DUTY, 3)
        } else {
            CondStatus::NotApplicable
        },
    });
    outcomes.push(ConditionOutcome {
        name: "clsg",
        status: sweep.clsg(),
    });
    outcomes.push(ConditionOutcome {
        name: "np4ni",
        status: match np4ni_status(lower) {
            CondStatus::Pass => np4ni_status(upper),
            fail => fail,
        },
    });

    // conditions of the connectivity modification
    let conn_base = family.base == BaseKind::Conn;
    outcomes.push(ConditionOutcome {
        name: "phiCfp",
        status: if conn_base {
            let mut st = CondStatus::Pass;
            'outer: for q in 0..spec.num_q {
                for p in 0..lower.p_sizes.len() {
                    if spec.m_ident[q][p] == 0 {
                        st = CondStatus::Fail(format!(
                            "no full-interval block entry for (q{q}, p{p})"
                        ));
                        break 'outer;
                    }
                }
            }
            st
        } else {
            CondStatus::NotApplicable
        },
    });
    outcomes.push(ConditionOutcome {
        name: "phiCl",
        status: if conn_base {
            let bad = (0..spec.num_q).find_map(|q| {
                (0..lower.p_sizes.len()).find_map(|p| {
                    if spec.m_const_low[q][p] + spec.m_const_high[q][p] > 0 {
                        Some((q, p))
                    } else {
                        None
                    }
                })
            });
            match bad {
                Some((q, p)) => CondStatus::Fail(format!(
                    "constant block at (q{q}, p{p}) takes no boundary value at either end"
                )),
                None => CondStatus::Pass,
            }
        } else {
            CondStatus::NotApplicable
        },
    });
    outcomes.push(ConditionOutcome {
        name: "phiCx",
        status: if conn_base {
            match spec
                .z_blocks
                .iter()
                .enumerate()
                .find(|(_, z)| !z.starts_at_base && !z.ends_at_base)
            {
                Some((k, z)) => CondStatus::Fail(format!(
                    "cell-valued block {k} (q{}) neither starts nor ends at the base point",
                    z.q
                )),
                None => CondStatus::Pass,
            }
        } else {
            CondStatus::NotApplicable
        },
    });

    ConditionReport { outcomes }
}
