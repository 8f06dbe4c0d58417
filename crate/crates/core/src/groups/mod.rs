//! Group predicates and hierarchically structured group collections.

mod tree;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::{AttributeSet, Dataset, Row};
use crate::error::{Error, Result};

pub use tree::{build_hierarchy, deepest_containing, CompiledTree, GroupTree, HierarchySpec, TreeNode};
pub use validate::{validate_hierarchical, Verdict, Violation, ViolationKind};

pub const ROOT_ID: &str = "ALL";

/// One `attribute = category` test.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Literal {
    pub attribute: String,
    pub category: String,
}

impl Literal {
    pub fn new(attribute: impl Into<String>, category: impl Into<String>) -> Self {
        Literal {
            attribute: attribute.into(),
            category: category.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    /// Conjunction of equality tests; empty means the whole space.
    Conjunction(Vec<Literal>),
    /// Explicit sorted row indices of a specific dataset (test fixtures).
    Rows(Vec<usize>),
}

/// A named subset of the input space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GroupRepr", into = "GroupRepr")]
pub struct Group {
    pub id: String,
    pub predicate: Predicate,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupRepr {
    id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    conjuncts: Vec<Literal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<Vec<usize>>,
}

impl TryFrom<GroupRepr> for Group {
    type Error = String;

    fn try_from(r: GroupRepr) -> std::result::Result<Self, String> {
        match r.rows {
            Some(_) if !r.conjuncts.is_empty() => Err(format!(
                "group `{}` has both conjuncts and rows",
                r.id
            )),
            Some(rows) => Ok(Group::rows(r.id, rows)),
            None => Ok(Group::conjunction(r.id, r.conjuncts)),
        }
    }
}

impl From<Group> for GroupRepr {
    fn from(g: Group) -> Self {
        match g.predicate {
            Predicate::Conjunction(conjuncts) => GroupRepr {
                id: g.id,
                conjuncts,
                rows: None,
            },
            Predicate::Rows(rows) => GroupRepr {
                id: g.id,
                conjuncts: vec![],
                rows: Some(rows),
            },
        }
    }
}

impl Group {
    pub fn whole_space() -> Group {
        Group {
            id: ROOT_ID.into(),
            predicate: Predicate::Conjunction(vec![]),
        }
    }

    pub fn conjunction(id: impl Into<String>, literals: Vec<Literal>) -> Group {
        Group {
            id: id.into(),
            predicate: Predicate::Conjunction(literals),
        }
    }

    pub fn rows(id: impl Into<String>, mut rows: Vec<usize>) -> Group {
        rows.sort_unstable();
        rows.dedup();
        Group {
            id: id.into(),
            predicate: Predicate::Rows(rows),
        }
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(&self.predicate, Predicate::Conjunction(l) if l.is_empty())
    }

    pub fn literals(&self) -> &[Literal] {
        match &self.predicate {
            Predicate::Conjunction(l) => l,
            Predicate::Rows(_) => &[],
        }
    }

    /// Resolves attribute names against a dataset's catalog. A category the
    /// catalog does not know makes the group empty on that dataset; an
    /// unknown attribute is an error.
    pub fn compile(&self, attrs: &AttributeSet) -> Result<CompiledGroup> {
        match &self.predicate {
            Predicate::Conjunction(literals) => {
                let tests = literals
                    .iter()
                    .map(|lit| {
                        let a = attrs
                            .index(&lit.attribute)
                            .ok_or_else(|| Error::UnknownAttribute(lit.attribute.clone()))?;
                        Ok((a, attrs.get(a).code(&lit.category)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(CompiledGroup::Conjunction(tests))
            }
            Predicate::Rows(rows) => Ok(CompiledGroup::Rows(rows.clone())),
        }
    }

    /// `g(x)` for a single example.
    pub fn contains(&self, row: &Row<'_>) -> Result<bool> {
        Ok(self.compile(row.dataset().attributes())?.contains(row))
    }
}

#[derive(Debug, Clone)]
pub enum CompiledGroup {
    Conjunction(Vec<(usize, Option<u32>)>),
    Rows(Vec<usize>),
}

impl CompiledGroup {
    pub fn contains(&self, row: &Row<'_>) -> bool {
        match self {
            CompiledGroup::Conjunction(tests) => tests
                .iter()
                .all(|&(a, code)| code == Some(row.code(a))),
            CompiledGroup::Rows(rows) => rows.binary_search(&row.index()).is_ok(),
        }
    }
}

/// Boolean membership mask of `g` over the rows of `ds`.
pub fn membership_vector(g: &Group, ds: &Dataset) -> Result<Vec<bool>> {
    let compiled = g.compile(ds.attributes())?;
    Ok(ds.rows().map(|r| compiled.contains(&r)).collect())
}

/// Set relation between two groups, as far as it can be decided without data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Equal,
    Disjoint,
    /// The first group is a strict subset of the second.
    Subset,
    Superset,
    Crossing,
}

/// Decides the relation symbolically. Two conjunctions are disjoint iff they
/// bind some attribute to different categories. Returns `None` when one side
/// is a row set and the other a non-trivial conjunction.
pub fn structural_relation(a: &Group, b: &Group) -> Option<Relation> {
    match (&a.predicate, &b.predicate) {
        (Predicate::Conjunction(la), Predicate::Conjunction(lb)) => {
            Some(conjunction_relation(la, lb))
        }
        (Predicate::Rows(ra), Predicate::Rows(rb)) => Some(row_relation(ra, rb)),
        (Predicate::Conjunction(l), Predicate::Rows(_)) if l.is_empty() => Some(Relation::Superset),
        (Predicate::Rows(_), Predicate::Conjunction(l)) if l.is_empty() => Some(Relation::Subset),
        _ => None,
    }
}

fn literal_map(lits: &[Literal]) -> Option<BTreeMap<&str, &str>> {
    let mut map = BTreeMap::new();
    for lit in lits {
        match map.insert(lit.attribute.as_str(), lit.category.as_str()) {
            Some(prev) if prev != lit.category => return None,
            _ => {}
        }
    }
    Some(map)
}

fn conjunction_relation(a: &[Literal], b: &[Literal]) -> Relation {
    let (ma, mb) = match (literal_map(a), literal_map(b)) {
        (Some(ma), Some(mb)) => (ma, mb),
        // A self-contradictory conjunction is empty.
        _ => return Relation::Disjoint,
    };
    if ma
        .iter()
        .any(|(attr, cat)| mb.get(attr).is_some_and(|c| c != cat))
    {
        return Relation::Disjoint;
    }
    let a_in_b = mb.iter().all(|(k, v)| ma.get(k) == Some(v));
    let b_in_a = ma.iter().all(|(k, v)| mb.get(k) == Some(v));
    match (a_in_b, b_in_a) {
        (true, true) => Relation::Equal,
        // More literals means a smaller set.
        (true, false) => Relation::Subset,
        (false, true) => Relation::Superset,
        (false, false) => Relation::Crossing,
    }
}

fn row_relation(a: &[usize], b: &[usize]) -> Relation {
    let sa: BTreeSet<_> = a.iter().collect();
    let sb: BTreeSet<_> = b.iter().collect();
    let inter = sa.intersection(&sb).count();
    if sa == sb {
        Relation::Equal
    } else if inter == 0 {
        Relation::Disjoint
    } else if inter == sa.len() {
        Relation::Subset
    } else if inter == sb.len() {
        Relation::Superset
    } else {
        Relation::Crossing
    }
}
