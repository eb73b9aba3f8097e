//! Character-level minimum-cost alignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::UnitSeq;

/// Per-operation costs. A match always costs 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostScheme {
    pub substitution: u32,
    pub insertion: u32,
    pub deletion: u32,
}

impl CostScheme {
    pub fn new(substitution: u32, insertion: u32, deletion: u32) -> Result<Self> {
        if substitution == 0 || insertion == 0 || deletion == 0 {
            return Err(Error::Argument(
                "substitution, insertion and deletion costs must be positive".into(),
            ));
        }
        Ok(Self {
            substitution,
            insertion,
            deletion,
        })
    }

    pub const fn unit() -> Self {
        Self {
            substitution: 1,
            insertion: 1,
            deletion: 1,
        }
    }

    pub fn cost(&self, kind: OpKind) -> u32 {
        match kind {
            OpKind::Match => 0,
            OpKind::Sub => self.substitution,
            OpKind::Ins => self.insertion,
            OpKind::Del => self.deletion,
        }
    }
}

impl Default for CostScheme {
    fn default() -> Self {
        Self::unit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Match,
    Sub,
    Ins,
    Del,
}

impl OpKind {
    /// Units of (source, target) consumed by the operation.
    pub fn advance(self) -> (usize, usize) {
        match self {
            OpKind::Match | OpKind::Sub => (1, 1),
            OpKind::Ins => (0, 1),
            OpKind::Del => (1, 0),
        }
    }
}

/// One step of an alignment. `src_index`/`tgt_index` are the positions
/// *before* the step; an insertion happens in front of `src_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignOp {
    pub kind: OpKind,
    pub src_index: usize,
    pub tgt_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentPath {
    pub ops: Vec<AlignOp>,
    pub total_cost: u32,
}

impl AlignmentPath {
    /// Checks the path invariants against the sequences it claims to align.
    pub fn validate(&self, src: &UnitSeq, tgt: &UnitSeq, costs: &CostScheme) -> Result<()> {
        let (mut i, mut j, mut cost) = (0usize, 0usize, 0u32);
        for op in &self.ops {
            if (op.src_index, op.tgt_index) != (i, j) {
                return Err(Error::Structural(format!(
                    "op at ({}, {}) does not continue from ({i}, {j})",
                    op.src_index, op.tgt_index
                )));
            }
            match op.kind {
                OpKind::Match if src.get(i).is_none() || src.get(i) != tgt.get(j) => {
                    return Err(Error::Structural(format!(
                        "match at ({i}, {j}) on unequal units"
                    )));
                }
                OpKind::Sub if src.get(i).is_none() || tgt.get(j).is_none() => {
                    return Err(Error::Structural(format!(
                        "substitution at ({i}, {j}) out of range"
                    )));
                }
                _ => {}
            }
            let (di, dj) = op.kind.advance();
            i += di;
            j += dj;
            cost += costs.cost(op.kind);
        }
        if (i, j) != (src.len(), tgt.len()) {
            return Err(Error::Structural(format!(
                "path ends at ({i}, {j}), expected ({}, {})",
                src.len(),
                tgt.len()
            )));
        }
        if cost != self.total_cost {
            return Err(Error::Structural(format!(
                "total_cost {} but ops sum to {cost}",
                self.total_cost
            )));
        }
        Ok(())
    }
}

/// Global minimum-cost alignment of `src` onto `tgt`.
///
/// Among optimal paths the one taken is found by walking forward from (0, 0)
/// and preferring, at every cell, match > substitution > deletion > insertion.
/// Matches are therefore consumed as early as possible and edits land at the
/// rightmost optimal position.
pub fn align(src: &UnitSeq, tgt: &UnitSeq, costs: &CostScheme) -> AlignmentPath {
    let (s, t) = (src.units(), tgt.units());
    let (n, m) = (s.len(), t.len());
    let width = m + 1;
    // rest[i * width + j]: cheapest alignment of s[i..] onto t[j..].
    let mut rest = vec![0u32; (n + 1) * width];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            let idx = i * width + j;
            rest[idx] = if i == n {
                (m - j) as u32 * costs.insertion
            } else if j == m {
                (n - i) as u32 * costs.deletion
            } else {
                let diag = rest[(i + 1) * width + j + 1]
                    + if s[i] == t[j] { 0 } else { costs.substitution };
                let del = rest[(i + 1) * width + j] + costs.deletion;
                let ins = rest[i * width + j + 1] + costs.insertion;
                diag.min(del).min(ins)
            };
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let here = rest[i * width + j];
        let kind = if i < n && j < m && s[i] == t[j] && rest[(i + 1) * width + j + 1] == here {
            OpKind::Match
        } else if i < n
            && j < m
            && s[i] != t[j]
            && rest[(i + 1) * width + j + 1] + costs.substitution == here
        {
            OpKind::Sub
        } else if i < n && rest[(i + 1) * width + j] + costs.deletion == here {
            OpKind::Del
        } else {
            OpKind::Ins
        };
        ops.push(AlignOp {
            kind,
            src_index: i,
            tgt_index: j,
        });
        let (di, dj) = kind.advance();
        i += di;
        j += dj;
    }
    AlignmentPath {
        ops,
        total_cost: rest[0],
    }
}

/// Largest `n + m` accepted by [`oracle_min_cost`].
pub const ORACLE_MAX_UNITS: usize = 12;

/// Minimum alignment cost by plain exhaustive recursion (no memoization).
///
/// Exponential; intended as a reference for [`align`] on short inputs.
pub fn oracle_min_cost(src: &UnitSeq, tgt: &UnitSeq, costs: &CostScheme) -> Result<u32> {
    let len = src.len() + tgt.len();
    if len > ORACLE_MAX_UNITS {
        return Err(Error::TooLong {
            len,
            limit: ORACLE_MAX_UNITS,
        });
    }
    fn go(s: &[char], t: &[char], c: &CostScheme) -> u32 {
        match (s.split_first(), t.split_first()) {
            (None, _) => t.len() as u32 * c.insertion,
            (_, None) => s.len() as u32 * c.deletion,
            (Some((a, s_rest)), Some((b, t_rest))) => {
                let diag = go(s_rest, t_rest, c) + if a == b { 0 } else { c.substitution };
                let del = go(s_rest, t, c) + c.deletion;
                let ins = go(s, t_rest, c) + c.insertion;
                diag.min(del).min(ins)
            }
        }
    }
    Ok(go(src.units(), tgt.units(), costs))
}
