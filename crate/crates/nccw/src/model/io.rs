//! Input schema for boundary data and twists.
//!
//! Two dialects are accepted: a TOML config dialect and JSON interchange.
//! Both deserialize into [`InputSpec`]. Twists are given in cycle notation
//! per `p`-block. Graphs export as DOT text.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    canonical_layout, dualize, validate_nccw, DualData, Layout, LabeledMultigraph, NccwData,
    SlotRef, TwistPerm,
};
use crate::ids::IIdx;
use crate::perm::Perm;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputSpec {
    pub p_blocks: Vec<u32>,
    pub i_blocks: Vec<u32>,
    /// Entries `(r, p, i, count)`, zero entries may be omitted.
    pub mult: Vec<(u8, u32, u32, u32)>,
    /// Optional explicit layout; canonical when absent. `layout[r][p]` lists
    /// for each covered slot `(slot, i, copy, pos)`.
    #[serde(default)]
    pub layout: Option<Vec<Vec<Vec<(u32, u32, u32, u32)>>>>,
    /// Cycle notation per p-block, e.g. `["(1 2)", "id"]`.
    #[serde(default)]
    pub sigma: Option<Vec<String>>,
    #[serde(default)]
    pub tau: Option<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum InputError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("structural error: {0}")]
    Structure(String),
    #[error("invalid data: {0:?}")]
    Invalid(Vec<String>),
}

pub struct ParsedInput {
    pub data: NccwData,
    pub dual: DualData,
    pub sigma: TwistPerm,
    pub tau: TwistPerm,
}

impl InputSpec {
    /// Accepts JSON when the text starts with `{`, TOML otherwise.
    pub fn parse(text: &str) -> Result<InputSpec, InputError> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            serde_json::from_str(text).map_err(|e| InputError::Parse(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| InputError::Parse(e.to_string()))
        }
    }

    pub fn build(&self) -> Result<ParsedInput, InputError> {
        let np = self.p_blocks.len();
        let ni = self.i_blocks.len();
        let mut mult = [vec![vec![0u32; ni]; np], vec![vec![0u32; ni]; np]];
        for &(r, p, i, c) in &self.mult {
            if r > 1 || p as usize >= np || i as usize >= ni {
                return Err(InputError::Structure(format!(
                    "mult entry ({r},{p},{i},{c}) out of range"
                )));
            }
            mult[r as usize][p as usize][i as usize] = c;
        }
        let layout = match &self.layout {
            None => canonical_layout(&self.p_blocks, &self.i_blocks, &mult),
            Some(table) => {
                if table.len() != 2 || table.iter().any(|t| t.len() != np) {
                    return Err(InputError::Structure("layout table shape".into()));
                }
                let mut assign = [Vec::new(), Vec::new()];
                for r in 0..2 {
                    for p in 0..np {
                        let mut slots = vec![None; self.p_blocks[p] as usize];
                        for &(slot, i, copy, pos) in &table[r][p] {
                            if slot as usize >= slots.len() || i as usize >= ni {
                                return Err(InputError::Structure(format!(
                                    "layout entry out of range at (r={r}, p={p})"
                                )));
                            }
                            slots[slot as usize] = Some(SlotRef {
                                i: IIdx(i),
                                copy,
                                pos,
                            });
                        }
                        assign[r].push(slots);
                    }
                }
                Layout { assign }
            }
        };
        let data = NccwData {
            p_sizes: self.p_blocks.clone(),
            i_sizes: self.i_blocks.clone(),
            mult,
            layout,
        };
        let report = validate_nccw(&data);
        if !report.is_valid() {
            return Err(InputError::Invalid(report.errors));
        }
        let dual = dualize(&data);
        let parse_twist = |spec: &Option<Vec<String>>| -> Result<TwistPerm, InputError> {
            match spec {
                None => Ok(TwistPerm::identity(&dual)),
                Some(cycles) => {
                    if cycles.len() != np {
                        return Err(InputError::Structure(format!(
                            "twist has {} blocks, expected {np}",
                            cycles.len()
                        )));
                    }
                    let per_block: Result<Vec<Perm>, _> = cycles
                        .iter()
                        .enumerate()
                        .map(|(p, text)| {
                            Perm::parse_cycles(self.p_blocks[p] as usize, text)
                                .map_err(|e| InputError::Parse(e.to_string()))
                        })
                        .collect();
                    Ok(TwistPerm {
                        per_block: per_block?,
                    })
                }
            }
        };
        let sigma = parse_twist(&self.sigma)?;
        let tau = parse_twist(&self.tau)?;
        Ok(ParsedInput {
            data,
            dual,
            sigma,
            tau,
        })
    }
}

/// DOT export of the full twisted-graph collection.
pub fn graphs_to_dot(graphs: &[LabeledMultigraph]) -> String {
    let mut out = String::from("digraph twisted {\n");
    for g in graphs {
        for (k, (s, t)) in g.edges.iter().enumerate() {
            let s = s.map_or(format!("free_p{}_{}s", g.p.0, k), |x| format!("x{}", x.0));
            let t = t.map_or(format!("free_p{}_{}t", g.p.0, k), |x| format!("x{}", x.0));
            out.push_str(&format!("  {s} -> {t} [label=\"p{}:y{}\"];\n", g.p.0, k));
        }
    }
    out.push_str("}\n");
    out
}

/// Dual data as structured text, stable ordering.
pub fn dual_to_text(dual: &DualData) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Y: {} slots in {} blocks; X: {} slots in {} blocks\n",
        dual.num_y(),
        dual.p_sizes.len(),
        dual.num_x(),
        dual.i_sizes.len()
    ));
    for y in 0..dual.num_y() {
        let b0 = dual.b[0][y].map_or("-".into(), |x| format!("x{}", x.0));
        let b1 = dual.b[1][y].map_or("-".into(), |x| format!("x{}", x.0));
        out.push_str(&format!(
            "y{y} ({}) b0={b0} b1={b1}\n",
            dual.y_p[y]
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML_EXAMPLE: &str = r#"
p_blocks = [2]
i_blocks = [1, 1]
mult = [[0, 0, 0, 1], [0, 0, 1, 1], [1, 0, 0, 1], [1, 0, 1, 1]]
sigma = ["(1 2)"]
"#;

    #[test]
    fn toml_dialect_round_trip() {
        let spec = InputSpec::parse(TOML_EXAMPLE).unwrap();
        let parsed = spec.build().unwrap();
        assert_eq!(parsed.data, super::super::example_r1());
        assert!(!parsed.sigma.is_identity());
        assert!(parsed.tau.is_identity());
    }

    #[test]
    fn json_dialect_accepted() {
        let json = serde_json::json!({
            "p_blocks": [2],
            "i_blocks": [1, 1],
            "mult": [[0,0,0,1],[0,0,1,1],[1,0,0,1],[1,0,1,1]],
        })
        .to_string();
        let spec = InputSpec::parse(&json).unwrap();
        let parsed = spec.build().unwrap();
        assert_eq!(parsed.data, super::super::example_r1());
    }

    #[test]
    fn malformed_rejected() {
        assert!(InputSpec::parse("p_blocks = [").is_err());
        let bad = InputSpec {
            p_blocks: vec![2],
            i_blocks: vec![1],
            mult: vec![(0, 0, 5, 1)],
            layout: None,
            sigma: None,
            tau: None,
        };
        assert!(bad.build().is_err());
    }
}
