use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{losses_on, Prepared};
use crate::bounds::{extended_f64, EpsilonSpec};
use crate::data::{Dataset, Row};
use crate::error::{Error, Result};
use crate::groups::{CompiledGroup, Group, GroupTree};
use crate::learners::{Classifier, LearnerSpec, Predictor};
use crate::par::Exec;
use crate::risk::{masked_mean, row_losses, Loss};

/// `(g_t, h_t)`; `hypothesis` indexes [`DecisionList::hypotheses`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListEntry {
    pub group: Group,
    pub hypothesis: usize,
    /// `L_S(f_t | g) - L_S(h | g) - ε_n(g)` when the pair was selected.
    pub violation: f64,
    #[serde(with = "extended_f64")]
    pub epsilon: f64,
}

/// Entries are scanned front to back (most recent first); the first group
/// containing the example decides, otherwise `default` applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionList {
    pub learner: LearnerSpec,
    pub epsilon: EpsilonSpec,
    pub entries: Vec<ListEntry>,
    /// Candidate hypotheses: the group ERMs of non-empty nodes, root first.
    pub hypotheses: Vec<Arc<Predictor>>,
    pub default: usize,
}

impl DecisionList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn compile(&self, ds: &Dataset) -> Result<Vec<CompiledGroup>> {
        self.entries
            .iter()
            .map(|e| e.group.compile(ds.attributes()))
            .collect()
    }

    fn pick(&self, compiled: &[CompiledGroup], row: &Row<'_>) -> usize {
        compiled
            .iter()
            .position(|g| g.contains(row))
            .map_or(self.default, |t| self.entries[t].hypothesis)
    }
}

impl Classifier for DecisionList {
    fn score(&self, row: &Row<'_>) -> Result<f64> {
        let compiled = self.compile(row.dataset())?;
        Ok(self.hypotheses[self.pick(&compiled, row)].score_features(row.features()))
    }

    fn scores(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let compiled = self.compile(ds)?;
        Ok(ds
            .rows()
            .map(|r| self.hypotheses[self.pick(&compiled, &r)].score_features(r.features()))
            .collect())
    }
}

/// Default bound on the number of prepends: `4·|G|`.
pub fn default_cap(groups: usize) -> usize {
    4 * groups.max(1)
}

pub fn prepend(
    train: &Dataset,
    tree: &GroupTree,
    spec: &LearnerSpec,
    eps: &EpsilonSpec,
    loss: &Loss,
    cap: usize,
) -> Result<DecisionList> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("training set is empty".into()));
    }
    let prepared = Prepared::new(train, tree, spec, eps, Exec::Parallel)?;
    prepend_prepared(train, tree, &prepared, loss, cap)
}

/// Node ids of the fitted group ERMs, root first.
fn candidates(prepared: &Prepared) -> Vec<usize> {
    (0..prepared.erms.len())
        .filter(|&g| prepared.erms.get(g).is_some())
        .collect()
}

/// Greedy decision-list construction. Each round picks the pair maximizing
/// `L_S(f_t | g) - L_S(h | g) - ε_n(g)` (first maximum in node order wins)
/// and prepends it while that value is non-negative and the pair strictly
/// lowers the risk on `g`.
pub fn prepend_prepared(
    train: &Dataset,
    tree: &GroupTree,
    prepared: &Prepared,
    loss: &Loss,
    cap: usize,
) -> Result<DecisionList> {
    if cap == 0 {
        return Err(Error::Config("prepend cap must be at least 1".into()));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset("training set is empty".into()));
    }
    let cand = candidates(prepared);
    let hypotheses: Vec<Arc<Predictor>> = cand
        .iter()
        .map(|&g| prepared.erms.get(g).unwrap().clone())
        .collect();
    let all: Vec<usize> = (0..train.len()).collect();
    let table: Vec<Vec<f64>> = hypotheses
        .iter()
        .map(|h| losses_on(h, train, &all, loss))
        .collect();
    // risk[h][g]
    let risk: Vec<Vec<Option<f64>>> = table
        .iter()
        .map(|l| prepared.members.iter().map(|m| masked_mean(l, m).value).collect())
        .collect();

    let mut list = DecisionList {
        learner: prepared.erms.spec().clone(),
        epsilon: prepared.epsilon_spec,
        entries: Vec::new(),
        hypotheses,
        default: 0,
    };
    let mut f_loss = table[0].clone();

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (g, rows) in prepared.members.iter().enumerate() {
            let Some(cur) = masked_mean(&f_loss, rows).value else {
                continue;
            };
            let eps = prepared.epsilons[g];
            for (h, r) in risk.iter().enumerate() {
                let r = r[g].expect("non-empty group");
                let value = cur - r - eps;
                if value >= 0.0 && cur - r > 0.0 && best.is_none_or(|(b, _, _)| value > b) {
                    best = Some((value, g, h));
                }
            }
        }
        let Some((value, g, h)) = best else {
            return Ok(list);
        };
        if list.entries.len() == cap {
            return Err(Error::PrependCap {
                cap,
                partial: Box::new(list),
            });
        }
        for &i in &prepared.members[g] {
            f_loss[i] = table[h][i];
        }
        list.entries.insert(
            0,
            ListEntry {
                group: tree.node(g).group.clone(),
                hypothesis: h,
                violation: value,
                epsilon: prepared.epsilons[g],
            },
        );
    }
}

/// A pair another round would still select.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrependViolation {
    pub group: String,
    pub hypothesis: String,
    pub value: f64,
}

/// Rescans every (group, candidate) pair against the finished list, scoring
/// the list through its public evaluation path.
pub fn prepend_violations(
    list: &DecisionList,
    train: &Dataset,
    tree: &GroupTree,
    prepared: &Prepared,
    loss: &Loss,
) -> Result<Vec<PrependViolation>> {
    let f_loss = row_losses(list, train, loss)?;
    let all: Vec<usize> = (0..train.len()).collect();
    let mut out = Vec::new();
    for h in candidates(prepared) {
        let h_loss = losses_on(prepared.erms.get(h).unwrap(), train, &all, loss);
        for (g, rows) in prepared.members.iter().enumerate() {
            let (Some(cur), Some(r)) = (
                masked_mean(&f_loss, rows).value,
                masked_mean(&h_loss, rows).value,
            ) else {
                continue;
            };
            let value = cur - r - prepared.epsilons[g];
            if value >= 0.0 && cur - r > 0.0 {
                out.push(PrependViolation {
                    group: tree.node(g).group.id.clone(),
                    hypothesis: tree.node(h).group.id.clone(),
                    value,
                });
            }
        }
    }
    Ok(out)
}
