use std::fmt;

use super::{structural_relation, Group, Relation};
use crate::data::Dataset;
use crate::par::{map_indexed, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Symbolically overlapping without containment.
    Crossing,
    /// Overlapping without containment on the dataset's rows.
    CrossingOnData,
    /// Two ids with the same predicate.
    Duplicate,
    /// The pair cannot be related (unknown attribute, mixed row/conjunction).
    Undecidable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub first: String,
    pub second: String,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}) {:?}", self.first, self.second, self.kind)?;
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "VALID");
        }
        writeln!(f, "INVALID")?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Checks that every pair of groups is disjoint or nested.
///
/// Conjunctions are compared symbolically. When a dataset is given, every
/// pair is additionally checked on its rows: any two groups sharing a row
/// must be nested on that dataset.
pub fn validate_hierarchical(groups: &[Group], ds: Option<&Dataset>) -> Verdict {
    let mut violations = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    for g in groups {
        if !seen_ids.insert(g.id.as_str()) {
            violations.push(Violation {
                first: g.id.clone(),
                second: g.id.clone(),
                kind: ViolationKind::Duplicate,
                detail: "id used twice".into(),
            });
        }
    }

    let mut crossing = vec![false; groups.len() * groups.len()];
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let (a, b) = (&groups[i], &groups[j]);
            let kind = match structural_relation(a, b) {
                Some(Relation::Crossing) => Some((ViolationKind::Crossing, String::new())),
                Some(Relation::Equal) => {
                    Some((ViolationKind::Duplicate, "same predicate".to_string()))
                }
                Some(_) => None,
                // Row-set vs conjunction pairs are only checkable on data.
                None if ds.is_some() => None,
                None => Some((
                    ViolationKind::Undecidable,
                    "row-set group needs a dataset".to_string(),
                )),
            };
            if let Some((kind, detail)) = kind {
                crossing[i * groups.len() + j] = true;
                violations.push(Violation {
                    first: a.id.clone(),
                    second: b.id.clone(),
                    kind,
                    detail,
                });
            }
        }
    }

    if let Some(ds) = ds {
        let words = ds.len().div_ceil(64);
        let mut masks = Vec::with_capacity(groups.len());
        for g in groups {
            match g.compile(ds.attributes()) {
                Ok(c) => {
                    let mut bits = vec![0u64; words];
                    for row in ds.rows() {
                        if c.contains(&row) {
                            bits[row.index() / 64] |= 1 << (row.index() % 64);
                        }
                    }
                    masks.push(Some(bits));
                }
                Err(e) => {
                    violations.push(Violation {
                        first: g.id.clone(),
                        second: g.id.clone(),
                        kind: ViolationKind::Undecidable,
                        detail: e.to_string(),
                    });
                    masks.push(None);
                }
            }
        }
        let counts: Vec<u32> = masks
            .iter()
            .map(|m| m.as_ref().map_or(0, |b| b.iter().map(|w| w.count_ones()).sum()))
            .collect();

        let found = map_indexed(Exec::Parallel, groups.len(), |i| {
            let mut out = Vec::new();
            let Some(a) = &masks[i] else { return out };
            for j in i + 1..groups.len() {
                if crossing[i * groups.len() + j] {
                    continue;
                }
                let Some(b) = &masks[j] else { continue };
                let inter: u32 = a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum();
                if inter > 0 && inter != counts[i] && inter != counts[j] {
                    out.push((j, inter));
                }
            }
            out
        });
        for (i, hits) in found.into_iter().enumerate() {
            for (j, inter) in hits {
                violations.push(Violation {
                    first: groups[i].id.clone(),
                    second: groups[j].id.clone(),
                    kind: ViolationKind::CrossingOnData,
                    detail: format!(
                        "{inter} shared rows, sizes {} and {}",
                        counts[i], counts[j]
                    ),
                });
            }
        }
    }

    Verdict { violations }
}
