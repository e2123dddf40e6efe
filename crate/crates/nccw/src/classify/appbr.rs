//! Generator for the pair of twists on a square building block whose
//! biadjacency matrices are not congruent although the underlying
//! unoriented bipartite graphs are isomorphic. This separates conjugacy of
//! the pairs from isomorphism of the diagonals alone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::congruence::IntMatrix;
use crate::ids::IIdx;
use crate::model::{dualize, DualData, Layout, NccwData, SlotRef, TwistPerm};
use crate::perm::Perm;

#[derive(Debug, Error)]
pub enum AppbrError {
    #[error("nu must be a non-prime integer >= 6, got {0}")]
    BadNu(u32),
    #[error("delta must divide nu and lie in 3..=nu-3, got {0}")]
    BadDelta(u32),
    #[error("no base matrix with the required row/column structure found within the search budget")]
    NoMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AppbrInstance {
    pub nu: u32,
    pub delta: u32,
    /// The 0/1 base matrix: `delta` ones per row and column, two identical
    /// rows, pairwise distinct columns.
    pub m: IntMatrix,
    pub m_sigma: IntMatrix,
    pub m_tau: IntMatrix,
    pub sigma: TwistPerm,
    pub tau: TwistPerm,
    pub data: NccwData,
}

/// Searches for the base matrix by backtracking over rows with column
/// budgets; the first two rows are pinned equal.
fn find_base_matrix(nu: usize, delta: usize, budget: &mut u64) -> Option<IntMatrix> {
    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for v in start..n {
                cur.push(v);
                rec(n, k + 0, v + 1, cur, out);
                cur.pop();
                if cur.len() + (n - v - 1) < k {
                    break;
                }
            }
        }
        rec(n, k, 0, &mut cur, &mut out);
        out.retain(|s| s.len() == k);
        out
    }
    let all_rows = subsets(nu, delta);

    fn columns_distinct(rows: &[Vec<usize>], nu: usize) -> bool {
        let grid: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| {
                let mut v = vec![false; nu];
                for &c in r {
                    v[c] = true;
                }
                v
            })
            .collect();
        for a in 0..nu {
            for b in a + 1..nu {
                if (0..rows.len()).all(|r| grid[r][a] == grid[r][b]) {
                    return false;
                }
            }
        }
        true
    }

    struct S<'a> {
        nu: usize,
        delta: usize,
        all_rows: &'a [Vec<usize>],
        col_count: Vec<usize>,
        rows: Vec<Vec<usize>>,
        budget: &'a mut u64,
    }
    impl<'a> S<'a> {
        fn place(&mut self, r: usize) -> bool {
            if *self.budget == 0 {
                return false;
            }
            *self.budget -= 1;
            if r == self.nu {
                return columns_distinct(&self.rows, self.nu);
            }
            for cand in self.all_rows {
                if cand.iter().any(|&c| self.col_count[c] == self.delta) {
                    continue;
                }
                // rows beyond the pinned pair must not recreate row 0
                if r >= 2 && *cand == self.rows[0] {
                    continue;
                }
                for &c in cand {
                    self.col_count[c] += 1;
                }
                self.rows.push(cand.clone());
                if self.place(r + 1) {
                    return true;
                }
                self.rows.pop();
                for &c in cand {
                    self.col_count[c] -= 1;
                }
            }
            false
        }
    }

    for first in &all_rows {
        let mut s = S {
            nu,
            delta,
            all_rows: &all_rows,
            col_count: vec![0; nu],
            rows: Vec::new(),
            budget,
        };
        for &c in first {
            s.col_count[c] += 2;
        }
        if s.col_count.iter().any(|&c| c > delta) {
            continue;
        }
        s.rows.push(first.clone());
        s.rows.push(first.clone());
        if s.place(2) {
            let rows = s.rows;
            return Some(
                rows.iter()
                    .map(|r| {
                        let mut v = vec![0u32; nu];
                        for &c in r {
                            v[c] = 1;
                        }
                        v
                    })
                    .collect(),
            );
        }
        if *budget == 0 {
            return None;
        }
    }
    None
}

fn block_diag(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let n = a.len() + b.len();
    let mut out = vec![vec![0u32; n]; n];
    for (r, row) in a.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            out[r][c] = v;
        }
    }
    for (r, row) in b.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            out[a.len() + r][a.len() + c] = v;
        }
    }
    out
}

fn scale(m: &IntMatrix, c: u32) -> IntMatrix {
    m.iter()
        .map(|r| r.iter().map(|&v| c * v).collect())
        .collect()
}

/// Square building block with product edge labelling: `E = M_{(2nu)^2}`,
/// `F = M_{2nu} ⊕ M_{2nu}`, source reads the first coordinate, target the
/// second. The explicit layout realizes `b0(y) = y mod 2nu`,
/// `b1(y) = y div 2nu`.
fn square_block_data(two_nu: u32) -> NccwData {
    let e = two_nu * two_nu;
    let mut assign0 = vec![None; e as usize];
    let mut assign1 = vec![None; e as usize];
    for y in 0..e {
        assign0[y as usize] = Some(SlotRef {
            i: IIdx(0),
            copy: y / two_nu,
            pos: y % two_nu,
        });
        assign1[y as usize] = Some(SlotRef {
            i: IIdx(1),
            copy: y % two_nu,
            pos: y / two_nu,
        });
    }
    NccwData {
        p_sizes: vec![e],
        i_sizes: vec![two_nu, two_nu],
        mult: [vec![vec![two_nu, 0]], vec![vec![0, two_nu]]],
        layout: Layout {
            assign: [vec![assign0], vec![assign1]],
        },
    }
}

/// Deterministic greedy row-major assignment realizing the pair-count
/// condition `#{y : (b0(y), b1(perm(y))) = (x0, x1)} = target[x0][x1]`.
fn realize_pair_counts(two_nu: u32, target: &IntMatrix) -> Perm {
    let e = (two_nu * two_nu) as usize;
    // Y-elements grouped by row (b0 = y mod 2nu) and by column of the image
    // (b1 = y div 2nu).
    let mut row_members: Vec<Vec<usize>> = vec![Vec::new(); two_nu as usize];
    let mut col_members: Vec<Vec<usize>> = vec![Vec::new(); two_nu as usize];
    for y in 0..e {
        row_members[y % two_nu as usize].push(y);
        col_members[y / two_nu as usize].push(y);
    }
    let mut col_cursor = vec![0usize; two_nu as usize];
    let mut images = vec![u32::MAX; e];
    for x0 in 0..two_nu as usize {
        let mut row_cursor = 0usize;
        for x1 in 0..two_nu as usize {
            for _ in 0..target[x0][x1] {
                let y = row_members[x0][row_cursor];
                row_cursor += 1;
                let t = col_members[x1][col_cursor[x1]];
                col_cursor[x1] += 1;
                images[y] = t as u32;
            }
        }
        debug_assert_eq!(row_cursor, two_nu as usize);
    }
    Perm::from_images(images).expect("greedy assignment is a bijection")
}

/// The realized pair-count matrix of a twist on the square block.
pub fn pair_count_matrix(dual: &DualData, twist: &TwistPerm, two_nu: u32) -> IntMatrix {
    let mut out = vec![vec![0u32; two_nu as usize]; two_nu as usize];
    for y in 0..dual.num_y() {
        let x0 = dual.b[0][y].expect("b0 total").0 as usize;
        let x1 = crate::model::twisted_target(dual, twist, crate::ids::YIdx(y as u32))
            .expect("b1 total");
        // X is laid out as X^{i0} then X^{i1}.
        out[x0][(x1.0 - two_nu) as usize] += 1;
    }
    out
}

pub fn build_appbr(nu: u32, delta: u32) -> Result<AppbrInstance, AppbrError> {
    if nu < 6 || (2..nu).all(|d| nu % d != 0) {
        return Err(AppbrError::BadNu(nu));
    }
    if delta < 3 || delta > nu - 3 || nu % delta != 0 {
        return Err(AppbrError::BadDelta(delta));
    }
    let mut budget = 5_000_000u64;
    let m = find_base_matrix(nu as usize, delta as usize, &mut budget).ok_or(AppbrError::NoMatrix)?;
    let c = 2 * nu / delta;
    let cm = scale(&m, c);
    let cmt = super::congruence::transpose(&cm);
    let m_sigma = block_diag(&cm, &cm);
    let m_tau = block_diag(&cm, &cmt);

    let two_nu = 2 * nu;
    let data = square_block_data(two_nu);
    let sigma = TwistPerm {
        per_block: vec![realize_pair_counts(two_nu, &m_sigma)],
    };
    let tau = TwistPerm {
        per_block: vec![realize_pair_counts(two_nu, &m_tau)],
    };

    // Post-hoc check of the pair-count condition.
    let dual = dualize(&data);
    debug_assert_eq!(pair_count_matrix(&dual, &sigma, two_nu), m_sigma);
    debug_assert_eq!(pair_count_matrix(&dual, &tau, two_nu), m_tau);

    Ok(AppbrInstance {
        nu,
        delta,
        m,
        m_sigma,
        m_tau,
        sigma,
        tau,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::congruence::transpose;

    #[test]
    fn base_matrix_structure() {
        let inst = build_appbr(6, 3).unwrap();
        let m = &inst.m;
        for r in m {
            assert_eq!(r.iter().sum::<u32>(), 3);
        }
        for c in transpose(m) {
            assert_eq!(c.iter().sum::<u32>(), 3);
        }
        assert_eq!(m[0], m[1]);
        let t = transpose(m);
        for a in 0..t.len() {
            for b in a + 1..t.len() {
                assert_ne!(t[a], t[b], "columns {a} and {b} equal");
            }
        }
    }

    #[test]
    fn row_and_column_sums_are_two_nu() {
        let inst = build_appbr(6, 3).unwrap();
        for m in [&inst.m_sigma, &inst.m_tau] {
            for r in m {
                assert_eq!(r.iter().sum::<u32>(), 12);
            }
            for c in transpose(m) {
                assert_eq!(c.iter().sum::<u32>(), 12);
            }
        }
    }

    #[test]
    fn pair_counts_realized() {
        let inst = build_appbr(6, 3).unwrap();
        let dual = dualize(&inst.data);
        assert_eq!(dual.num_y(), 144);
        assert_eq!(dual.num_x(), 24);
        assert_eq!(pair_count_matrix(&dual, &inst.sigma, 12), inst.m_sigma);
        assert_eq!(pair_count_matrix(&dual, &inst.tau, 12), inst.m_tau);
    }

    #[test]
    fn bad_parameters_rejected() {
        assert!(matches!(build_appbr(7, 3), Err(AppbrError::BadNu(7))));
        assert!(matches!(build_appbr(4, 2), Err(AppbrError::BadNu(4))));
        assert!(matches!(build_appbr(6, 2), Err(AppbrError::BadDelta(2))));
        assert!(matches!(build_appbr(6, 4), Err(AppbrError::BadDelta(4))));
    }
}
