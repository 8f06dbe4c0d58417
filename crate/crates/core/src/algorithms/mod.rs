//! The multi-group learners: MGL-Tree, Prepend and decoupled group ERM.

mod audit;
mod decoupled;
mod mgl_tree;
mod prepend;

use serde::{Deserialize, Serialize};

pub use audit::{monotonicity_audit, AuditReport, AuditViolation, AuditViolationKind};
pub use decoupled::{decoupled, decoupled_prepared, Fallback, PartitionPredictor};
pub use mgl_tree::{mgl_tree, mgl_tree_prepared, Decision, NodeRecord, TreePredictor};
pub use prepend::{
    default_cap, prepend, prepend_prepared, prepend_violations, DecisionList, ListEntry,
    PrependViolation,
};

use crate::bounds::{epsilon, EpsilonSpec};
use crate::data::Dataset;
use crate::error::Result;
use crate::groups::GroupTree;
use crate::learners::{Classifier, GroupErms, LearnerSpec, Predictor};
use crate::par::Exec;
use crate::risk::{mean_of, Loss, RiskValue};

/// Everything the algorithms share for one (training set, tree, learner):
/// node memberships, the group ERMs and the resolved margins.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub members: Vec<Vec<usize>>,
    pub erms: GroupErms,
    pub epsilon_spec: EpsilonSpec,
    pub epsilons: Vec<f64>,
}

impl Prepared {
    /// Fits all group ERMs (in parallel under `exec`). `|G|` defaults to the
    /// number of tree nodes and `n` to the training size.
    pub fn new(
        train: &Dataset,
        tree: &GroupTree,
        spec: &LearnerSpec,
        eps: &EpsilonSpec,
        exec: Exec,
    ) -> Result<Prepared> {
        let members = tree.memberships(train)?;
        let erms = GroupErms::fit(spec, train, tree, &members, exec)?;
        Self::from_erms(train, tree, members, erms, eps)
    }

    pub fn from_erms(
        train: &Dataset,
        tree: &GroupTree,
        members: Vec<Vec<usize>>,
        erms: GroupErms,
        eps: &EpsilonSpec,
    ) -> Result<Prepared> {
        let epsilon_spec = eps.resolve(tree.len(), train.len());
        epsilon_spec.validate()?;
        let epsilons = members
            .iter()
            .map(|rows| epsilon(&epsilon_spec, rows.len()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Prepared {
            members,
            erms,
            epsilon_spec,
            epsilons,
        })
    }

    /// `L_S(ĥ^g | g)` for every node.
    pub fn erm_risks(&self, train: &Dataset, loss: &Loss) -> Vec<RiskValue> {
        self.members
            .iter()
            .enumerate()
            .map(|(g, rows)| match self.erms.get(g) {
                Some(h) => risk_on(h, train, rows, loss),
                None => RiskValue::ABSENT,
            })
            .collect()
    }
}

/// Per-row losses of `h` on the listed rows.
pub(crate) fn losses_on(h: &Predictor, ds: &Dataset, rows: &[usize], loss: &Loss) -> Vec<f64> {
    rows.iter()
        .map(|&i| {
            let row = ds.row(i);
            loss.eval(h.score_features(row.features()), row.label())
        })
        .collect()
}

pub(crate) fn risk_on(h: &Predictor, ds: &Dataset, rows: &[usize], loss: &Loss) -> RiskValue {
    mean_of(&losses_on(h, ds, rows, loss))
}

/// `L_S(f | g)` for every node, given node memberships on `ds`.
pub fn node_risks<C: Classifier + ?Sized>(
    f: &C,
    ds: &Dataset,
    members: &[Vec<usize>],
    loss: &Loss,
) -> Result<Vec<RiskValue>> {
    let losses = crate::risk::row_losses(f, ds, loss)?;
    Ok(members
        .iter()
        .map(|rows| crate::risk::masked_mean(&losses, rows))
        .collect())
}

/// A group where `L_S(f | g) > L_S(ĥ^g | g) + ε_n(g) + slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeViolation {
    pub node: usize,
    pub group: String,
    pub risk: f64,
    pub erm_risk: f64,
    pub epsilon: f64,
}

/// Checks the per-group guarantee of a trained predictor on its training set.
pub fn guarantee_violations<C: Classifier + ?Sized>(
    f: &C,
    train: &Dataset,
    tree: &GroupTree,
    prepared: &Prepared,
    loss: &Loss,
    slack: f64,
) -> Result<Vec<GuaranteeViolation>> {
    let f_risks = node_risks(f, train, &prepared.members, loss)?;
    let erm_risks = prepared.erm_risks(train, loss);
    Ok(f_risks
        .iter()
        .zip(&erm_risks)
        .enumerate()
        .filter_map(|(g, (fr, er))| {
            let (fr, er) = (fr.value?, er.value?);
            let eps = prepared.epsilons[g];
            (fr > er + eps + slack).then(|| GuaranteeViolation {
                node: g,
                group: tree.node(g).group.id.clone(),
                risk: fr,
                erm_risk: er,
                epsilon: eps,
            })
        })
        .collect())
}
