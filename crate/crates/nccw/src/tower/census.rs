//! Arrow-level bisection census, the edge-count invariant sequence, and
//! the separation criterion for tower families.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Tower, TowerStage, YOrigin, UNDEF};

/// Arrow pairs outside both boundary domains label the bisection
/// components; the degree of the attached multisection is the block size.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CensusReport {
    pub level: u32,
    /// Per block: (census count of ordered pairs, degree = block size).
    pub per_block: Vec<(u64, u32)>,
    /// A few witness pairs `(y, y')` per block.
    pub samples: Vec<(u32, u32)>,
}

impl CensusReport {
    pub fn total(&self) -> u64 {
        self.per_block.iter().map(|(c, _)| *c).sum()
    }
}

/// An ordered pair `(y, y')` with `y != y'` in one block lies in the domain
/// of the side-`r` arrow map iff both slots are glued on side `r` and share
/// the slot block there (the tensor-block rule). Census entries avoid both
/// domains.
pub fn bisection_census(stage: &TowerStage, max_samples: usize) -> CensusReport {
    let mut per_block = Vec::new();
    let mut samples = Vec::new();
    for p in 0..stage.p_sizes.len() {
        let ys: Vec<usize> = stage.y_block(p).collect();
        let n = ys.len() as u64;
        let mut in0: BTreeMap<u32, u64> = BTreeMap::new();
        let mut in1: BTreeMap<u32, u64> = BTreeMap::new();
        let mut in01: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        for &y in &ys {
            let c0 = stage.sb[0][y];
            let c1 = stage.sb[1][y];
            if c0 != UNDEF {
                *in0.entry(c0).or_insert(0) += 1;
            }
            if c1 != UNDEF {
                *in1.entry(c1).or_insert(0) += 1;
            }
            if c0 != UNDEF && c1 != UNDEF {
                *in01.entry((c0, c1)).or_insert(0) += 1;
            }
        }
        let pairs = n * n.saturating_sub(1);
        let a0: u64 = in0.values().map(|&k| k * (k - 1)).sum();
        let a1: u64 = in1.values().map(|&k| k * (k - 1)).sum();
        let a01: u64 = in01.values().map(|&k| k * (k - 1)).sum();
        let census = pairs - a0 - a1 + a01;
        per_block.push((census, stage.p_sizes[p]));
        // witness samples
        if samples.len() < max_samples {
            'outer: for &y in &ys {
                for &y2 in &ys {
                    if y == y2 {
                        continue;
                    }
                    let dom0 = stage.sb[0][y] != UNDEF
                        && stage.sb[0][y] == stage.sb[0][y2];
                    let dom1 = stage.sb[1][y] != UNDEF
                        && stage.sb[1][y] == stage.sb[1][y2];
                    if !dom0 && !dom1 {
                        samples.push((y as u32, y2 as u32));
                        if samples.len() >= max_samples {
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    CensusReport {
        level: stage.level,
        per_block,
        samples,
    }
}

/// Edge counts per level and block: the distinguishing invariant.
pub fn invariant_sequence(tower: &Tower, depth: usize) -> Vec<Vec<u32>> {
    (1..=depth.min(tower.depth()))
        .map(|lvl| tower.stage(lvl).p_sizes.clone())
        .collect()
}

/// Slot-arithmetic consistency of one stage against its origins.
pub fn verify_slot_arithmetic(stage: &TowerStage) -> Result<(), String> {
    let mut count_per_p = vec![0u32; stage.p_sizes.len()];
    for y in 0..stage.num_y() {
        count_per_p[stage.y_p[y] as usize] += 1;
    }
    if count_per_p != stage.p_sizes {
        return Err("block sizes disagree with slot table".into());
    }
    // embedded copy covers the vertex set exactly once
    if let Some(fb) = stage.meta.frak_block {
        let emb: usize = (0..stage.num_y())
            .filter(|&y| matches!(stage.y_origin[y], YOrigin::Embedded { .. }))
            .count();
        if emb != stage.num_x() {
            return Err(format!(
                "embedded copy covers {emb} slots, vertex set has {}",
                stage.num_x()
            ));
        }
        let all_in_frak = (0..stage.num_y()).all(|y| {
            !matches!(stage.y_origin[y], YOrigin::Embedded { .. })
                || stage.y_p[y] == fb
        });
        if !all_in_frak {
            return Err("embedded slots stray outside the distinguished block".into());
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    Distinguished {
        level: u32,
        /// The minimal block size of the smaller tower at that level; it
        /// appears in its own invariant but not in the other one.
        value: u32,
    },
    IndistinguishableToDepth(u32),
}

/// Separation of two towers built from the same recipe with different
/// insertion sequences: at the first differing level, the smaller tower's
/// minimal edge count cannot appear anywhere in the other invariant, by
/// strict level-to-level growth.
pub fn compare_towers(t1: &Tower, t2: &Tower, depth: usize) -> Result<Comparison, String> {
    let depth = depth.min(t1.depth()).min(t2.depth());
    let seq1 = &t1.family.insert_seq;
    let seq2 = &t2.family.insert_seq;
    let first_diff = (0..depth).find(|&k| {
        seq1.get(k).copied().unwrap_or(0) != seq2.get(k).copied().unwrap_or(0)
    });
    let level = match first_diff {
        None => return Ok(Comparison::IndistinguishableToDepth(depth as u32)),
        Some(k) => k + 1,
    };
    let inv1 = invariant_sequence(t1, depth);
    let inv2 = invariant_sequence(t2, depth);
    // monotone growth certificates
    for (name, inv) in [("first", &inv1), ("second", &inv2)] {
        for n in 0..inv.len() - 1 {
            let max_low = inv[n].iter().max().copied().unwrap_or(0);
            let min_high = inv[n + 1].iter().min().copied().unwrap_or(0);
            if min_high <= max_low {
                return Err(format!(
                    "{name} tower lacks strict growth between levels {} and {}",
                    n + 1,
                    n + 2
                ));
            }
        }
    }
    let (small, big, small_inv, big_inv) =
        if seq1.get(level - 1).copied().unwrap_or(0) < seq2.get(level - 1).copied().unwrap_or(0) {
            (t1, t2, &inv1, &inv2)
        } else {
            (t2, t1, &inv2, &inv1)
        };
    let _ = (small, big);
    let value = *small_inv[level - 1].iter().min().unwrap();
    // the value appears in the small invariant by construction; it must be
    // absent from the big one at every computed level
    let appears_in_big = big_inv.iter().any(|lvl| lvl.contains(&value));
    if appears_in_big {
        return Err(format!(
            "separation criterion inconclusive: {value} appears in both invariants"
        ));
    }
    Ok(Comparison::Distinguished {
        level: level as u32,
        value,
    })
}
