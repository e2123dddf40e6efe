//! The forest of free-end classes under the connector parent map; its
//! branching certifies the Cantor structure of the end space.

use serde::{Deserialize, Serialize};

use super::{Tower, TowerError, Flavor, YOrigin, BlockClass, UNDEF};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EndsTree {
    /// Free-end edges per level (1-based levels, index 0 = level 1).
    pub levels: Vec<Vec<u32>>,
    /// For level k >= 1: parent index into `levels[k-1]` per node.
    pub parents: Vec<Vec<u32>>,
    /// Minimum number of children over all non-leaf nodes.
    pub min_branching: usize,
    pub cantor_branching: bool,
}

impl EndsTree {
    pub fn level_count(&self, level: usize) -> usize {
        self.levels[level - 1].len()
    }
}

/// Builds the ends tree of a stably projectionless tower down to `depth`.
pub fn ends_tree(tower: &Tower, depth: usize) -> Result<EndsTree, TowerError> {
    if tower.family.flavor != Flavor::StablyProjectionless {
        return Err(TowerError::NeedsProjectionless);
    }
    let depth = depth.min(tower.depth());
    let mut levels: Vec<Vec<u32>> = Vec::new();
    let mut parents: Vec<Vec<u32>> = Vec::new();
    for level in 1..=depth {
        let stage = tower.stage(level);
        let grave = stage.meta.grave.ok_or(TowerError::Integrity(
            "projectionless stage without grave block".into(),
        ))?;
        let free: Vec<u32> = (0..stage.num_y() as u32)
            .filter(|&y| stage.b[1][y as usize] == UNDEF)
            .collect();
        for &y in &free {
            if stage.y_p[y as usize] != grave {
                return Err(TowerError::Integrity(format!(
                    "free end y{y} outside the grave block"
                )));
            }
        }
        if level > 1 {
            let prev = &levels[level - 2];
            let mut par = Vec::with_capacity(free.len());
            for &y in &free {
                let ly = match stage.y_origin[y as usize] {
                    YOrigin::Block { block, y: ly } => {
                        let info = stage.blocks[block as usize];
                        if info.class != BlockClass::PlusUpper {
                            return Err(TowerError::Integrity(format!(
                                "free end y{y} from class {:?}",
                                info.class
                            )));
                        }
                        ly
                    }
                    other => {
                        return Err(TowerError::Integrity(format!(
                            "free end y{y} with origin {other:?}"
                        )))
                    }
                };
                let idx = prev
                    .iter()
                    .position(|&p| p == ly)
                    .ok_or_else(|| {
                        TowerError::Integrity(format!(
                            "parent of free end y{y} is not a lower free end"
                        ))
                    })?;
                par.push(idx as u32);
            }
            parents.push(par);
        }
        levels.push(free);
    }
    // children counts
    let mut min_branching = usize::MAX;
    for k in 0..parents.len() {
        let mut children = vec![0usize; levels[k].len()];
        for &p in &parents[k] {
            children[p as usize] += 1;
        }
        for &c in &children {
            min_branching = min_branching.min(c);
        }
    }
    if min_branching == usize::MAX {
        min_branching = 0;
    }
    Ok(EndsTree {
        cantor_branching: depth > 1 && min_branching >= 2,
        levels,
        parents,
        min_branching,
    })
}
