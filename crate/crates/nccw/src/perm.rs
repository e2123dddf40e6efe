//! Plain permutations on `0..n` with cycle-notation parsing and printing.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Perm {
    map: Vec<u32>,
}

#[derive(Debug, Error)]
pub enum PermError {
    #[error("not a permutation: image {0} repeated or out of range")]
    NotBijective(u32),
    #[error("cycle notation parse error: {0}")]
    Parse(String),
}

impl Perm {
    pub fn identity(n: usize) -> Perm {
        Perm {
            map: (0..n as u32).collect(),
        }
    }

    pub fn from_images(map: Vec<u32>) -> Result<Perm, PermError> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v as usize >= n || seen[v as usize] {
                return Err(PermError::NotBijective(v));
            }
            seen[v as usize] = true;
        }
        Ok(Perm { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, k: usize) -> usize {
        self.map[k] as usize
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(k, &v)| k as u32 == v)
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0u32; self.map.len()];
        for (k, &v) in self.map.iter().enumerate() {
            inv[v as usize] = k as u32;
        }
        Perm { map: inv }
    }

    /// `self` after `other`: `(self * other)(k) = self(other(k))`.
    pub fn compose(&self, other: &Perm) -> Perm {
        assert_eq!(self.len(), other.len());
        Perm {
            map: other.map.iter().map(|&k| self.map[k as usize]).collect(),
        }
    }

    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Perm {
        let mut map: Vec<u32> = (0..n as u32).collect();
        // Fisher-Yates
        for k in (1..n).rev() {
            let j = rng.gen_range(0..=k);
            map.swap(k, j);
        }
        Perm { map }
    }

    /// Cycle notation over 1-based points, e.g. `"(1 3 2)(4 5)"`.
    /// Fixed points may be omitted.
    pub fn parse_cycles(n: usize, text: &str) -> Result<Perm, PermError> {
        let mut map: Vec<u32> = (0..n as u32).collect();
        let mut moved = vec![false; n];
        let body = text.trim();
        if body.is_empty() || body == "id" {
            return Ok(Perm { map });
        }
        let mut rest = body;
        while !rest.is_empty() {
            rest = rest.trim_start();
            if rest.is_empty() {
                break;
            }
            if !rest.starts_with('(') {
                return Err(PermError::Parse(format!("expected '(' at `{rest}`")));
            }
            let close = rest
                .find(')')
                .ok_or_else(|| PermError::Parse("unclosed cycle".into()))?;
            let inner = &rest[1..close];
            rest = &rest[close + 1..];
            let pts: Result<Vec<usize>, _> = inner
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<usize>())
                .collect();
            let pts = pts.map_err(|e| PermError::Parse(e.to_string()))?;
            if pts.is_empty() {
                continue;
            }
            for &pt in &pts {
                if pt == 0 || pt > n {
                    return Err(PermError::Parse(format!("point {pt} out of range 1..={n}")));
                }
                if moved[pt - 1] {
                    return Err(PermError::Parse(format!("point {pt} appears twice")));
                }
                moved[pt - 1] = true;
            }
            for w in 0..pts.len() {
                let from = pts[w] - 1;
                let to = pts[(w + 1) % pts.len()] - 1;
                map[from] = to as u32;
            }
        }
        Perm::from_images(map)
    }

    pub fn to_cycles(&self) -> String {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut out = String::new();
        for start in 0..n {
            if seen[start] || self.apply(start) == start {
                seen[start] = true;
                continue;
            }
            out.push('(');
            let mut k = start;
            let mut first = true;
            while !seen[k] {
                seen[k] = true;
                if !first {
                    out.push(' ');
                }
                out.push_str(&(k + 1).to_string());
                first = false;
                k = self.apply(k);
            }
            out.push(')');
        }
        if out.is_empty() {
            out.push_str("id");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_round_trip() {
        let p = Perm::parse_cycles(5, "(1 3 2)(4 5)").unwrap();
        assert_eq!(p.apply(0), 2);
        assert_eq!(p.apply(2), 1);
        assert_eq!(p.apply(1), 0);
        assert_eq!(p.apply(3), 4);
        let q = Perm::parse_cycles(5, &p.to_cycles()).unwrap();
        assert_eq!(p, q);
        assert!(p.compose(&p.inverse()).is_identity());
    }

    #[test]
    fn rejects_bad_cycles() {
        assert!(Perm::parse_cycles(3, "(1 1)").is_err());
        assert!(Perm::parse_cycles(3, "(1 4)").is_err());
        assert!(Perm::parse_cycles(3, "1 2").is_err());
    }
}
