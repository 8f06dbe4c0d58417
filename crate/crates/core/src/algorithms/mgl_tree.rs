use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{risk_on, Prepared};
use crate::bounds::{extended_f64, EpsilonSpec};
use crate::data::{Dataset, Row};
use crate::error::{Error, Result};
use crate::groups::GroupTree;
use crate::learners::{Classifier, LearnerSpec, Predictor};
use crate::par::Exec;
use crate::risk::Loss;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Root,
    Updated,
    Inherited,
}

/// One step of the breadth-first pass (the root is step 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    pub parent: Option<String>,
    pub depth: usize,
    pub n_g: usize,
    #[serde(with = "extended_f64")]
    pub epsilon: f64,
    /// `L_S(f_old | g)` where `f_old` is the parent's working predictor.
    pub risk_old: Option<f64>,
    /// `L_S(ĥ^g | g)`.
    pub risk_erm: Option<f64>,
    pub err: Option<f64>,
    pub decision: Decision,
    /// Node whose group ERM is this node's working predictor.
    pub source: usize,
}

/// The decision-tree predictor built by MGL-Tree. Routing takes the deepest
/// node containing an example and applies that node's working predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePredictor {
    pub tree: GroupTree,
    pub learner: LearnerSpec,
    pub epsilon: EpsilonSpec,
    pub loss: Loss,
    pub train_n: usize,
    /// `ĥ^g` per node (absent for nodes without training rows).
    pub hypotheses: Vec<Option<Arc<Predictor>>>,
    /// Breadth-first trace; `nodes[g]` describes tree node `g`.
    pub nodes: Vec<NodeRecord>,
}

impl TreePredictor {
    pub fn working(&self, node: usize) -> &Arc<Predictor> {
        self.hypotheses[self.nodes[node].source]
            .as_ref()
            .expect("working predictors point at fitted hypotheses")
    }

    pub fn decision(&self, node: usize) -> Decision {
        self.nodes[node].decision
    }

    /// Writes the trace as JSON lines, one object per step.
    pub fn write_trace<W: Write>(&self, mut w: W) -> Result<()> {
        for (step, rec) in self.nodes.iter().enumerate() {
            let mut value = serde_json::to_value(rec)?;
            value
                .as_object_mut()
                .expect("record serializes to an object")
                .insert("step".into(), step.into());
            serde_json::to_writer(&mut w, &value)?;
            w.write_all(b"\n").map_err(|e| Error::io("<trace>", e))?;
        }
        Ok(())
    }
}

impl Classifier for TreePredictor {
    fn score(&self, row: &Row<'_>) -> Result<f64> {
        let compiled = self.tree.compile(row.dataset().attributes())?;
        Ok(self.working(compiled.deepest(row)).score_features(row.features()))
    }

    fn scores(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let compiled = self.tree.compile(ds.attributes())?;
        Ok(ds
            .rows()
            .map(|r| self.working(compiled.deepest(&r)).score_features(r.features()))
            .collect())
    }
}

/// Fits all group ERMs, then runs the breadth-first pass.
pub fn mgl_tree(
    train: &Dataset,
    tree: &GroupTree,
    spec: &LearnerSpec,
    eps: &EpsilonSpec,
    loss: &Loss,
) -> Result<TreePredictor> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("training set is empty".into()));
    }
    let prepared = Prepared::new(train, tree, spec, eps, Exec::Parallel)?;
    mgl_tree_prepared(train, tree, &prepared, loss)
}

/// The breadth-first pass over precomputed group ERMs.
///
/// For each non-root node `g` (parents first) the candidate is compared with
/// the parent's working predictor, which is what the current tree applies to
/// every row of `g`:
/// `err_g = L_S(f_parent | g) - L_S(ĥ^g | g) - ε_n(g)`. The node adopts `ĥ^g`
/// when `err_g >= 0` and otherwise inherits the parent's predictor. Nodes
/// without training rows always inherit.
pub fn mgl_tree_prepared(
    train: &Dataset,
    tree: &GroupTree,
    prepared: &Prepared,
    loss: &Loss,
) -> Result<TreePredictor> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("training set is empty".into()));
    }
    if prepared.members.len() != tree.len() || prepared.erms.len() != tree.len() {
        return Err(Error::Mismatch("prepared state does not match the tree".into()));
    }
    let erms = &prepared.erms;
    let mut nodes: Vec<NodeRecord> = Vec::with_capacity(tree.len());

    let root_risk = risk_on(erms.root(), train, &prepared.members[0], loss).value;
    nodes.push(NodeRecord {
        id: tree.root().group.id.clone(),
        parent: None,
        depth: 0,
        n_g: prepared.members[0].len(),
        epsilon: prepared.epsilons[0],
        risk_old: root_risk,
        risk_erm: root_risk,
        err: None,
        decision: Decision::Root,
        source: 0,
    });

    for g in 1..tree.len() {
        let node = tree.node(g);
        let parent = node.parent.expect("non-root node has a parent");
        let inherited = nodes[parent].source;
        let rows = &prepared.members[g];
        let eps = prepared.epsilons[g];
        let mut record = NodeRecord {
            id: node.group.id.clone(),
            parent: Some(tree.node(parent).group.id.clone()),
            depth: node.depth,
            n_g: rows.len(),
            epsilon: eps,
            risk_old: None,
            risk_erm: None,
            err: None,
            decision: Decision::Inherited,
            source: inherited,
        };
        if let Some(candidate) = erms.get(g) {
            let old = erms
                .get(inherited)
                .expect("working predictor is a fitted hypothesis");
            let risk_old = risk_on(old, train, rows, loss).value.expect("n_g >= 1");
            let risk_erm = risk_on(candidate, train, rows, loss).value.expect("n_g >= 1");
            let err = risk_old - risk_erm - eps;
            record.risk_old = Some(risk_old);
            record.risk_erm = Some(risk_erm);
            record.err = Some(err);
            if err >= 0.0 {
                record.decision = Decision::Updated;
                record.source = g;
            }
        }
        nodes.push(record);
    }

    Ok(TreePredictor {
        tree: tree.clone(),
        learner: erms.spec().clone(),
        epsilon: prepared.epsilon_spec,
        loss: *loss,
        train_n: train.len(),
        hypotheses: erms.hypotheses().to_vec(),
        nodes,
    })
}
