use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Prepared;
use crate::data::{Dataset, Row};
use crate::error::{Error, Result};
use crate::groups::{structural_relation, CompiledGroup, Group, GroupTree, Relation};
use crate::learners::{fit_rows, Classifier, LearnerSpec, Predictor};
use crate::par::{try_map_indexed, Exec};

/// What to do with an example outside every leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    #[default]
    Error,
    Root,
}

/// Independent per-leaf ERMs routed by leaf membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPredictor {
    pub learner: LearnerSpec,
    pub leaves: Vec<Group>,
    /// Per leaf; empty leaves share the root ERM.
    pub hypotheses: Vec<Arc<Predictor>>,
    pub root: Arc<Predictor>,
    pub fallback: Fallback,
}

impl PartitionPredictor {
    fn compile(&self, ds: &Dataset) -> Result<Vec<CompiledGroup>> {
        self.leaves.iter().map(|g| g.compile(ds.attributes())).collect()
    }

    fn route(&self, compiled: &[CompiledGroup], row: &Row<'_>) -> Result<&Predictor> {
        match compiled.iter().position(|g| g.contains(row)) {
            Some(i) => Ok(&self.hypotheses[i]),
            None => match self.fallback {
                Fallback::Root => Ok(&self.root),
                Fallback::Error => Err(Error::Routing(row.describe())),
            },
        }
    }
}

impl Classifier for PartitionPredictor {
    fn score(&self, row: &Row<'_>) -> Result<f64> {
        let compiled = self.compile(row.dataset())?;
        Ok(self.route(&compiled, row)?.score_features(row.features()))
    }

    fn scores(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let compiled = self.compile(ds)?;
        ds.rows()
            .map(|r| Ok(self.route(&compiled, &r)?.score_features(r.features())))
            .collect()
    }
}

fn check_disjoint(tree: &GroupTree, leaves: &[usize]) -> Result<()> {
    for (i, &a) in leaves.iter().enumerate() {
        for &b in &leaves[i + 1..] {
            let (ga, gb) = (&tree.node(a).group, &tree.node(b).group);
            if structural_relation(ga, gb) != Some(Relation::Disjoint) {
                return Err(Error::Overlap(ga.id.clone(), gb.id.clone()));
            }
        }
    }
    Ok(())
}

/// Fits the root and every non-empty leaf.
pub fn decoupled(
    train: &Dataset,
    tree: &GroupTree,
    spec: &LearnerSpec,
    fallback: Fallback,
) -> Result<PartitionPredictor> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training set is empty".into()));
    }
    let leaves = tree.leaves();
    check_disjoint(tree, &leaves)?;
    let members = tree.memberships(train)?;
    let all: Vec<usize> = (0..train.len()).collect();
    let root = Arc::new(fit_rows(spec, train, &all, &tree.root().group.id)?);
    let hypotheses = try_map_indexed(Exec::Parallel, leaves.len(), |i| {
        let g = leaves[i];
        if g == 0 || members[g].is_empty() {
            Ok(root.clone())
        } else {
            fit_rows(spec, train, &members[g], &tree.node(g).group.id).map(Arc::new)
        }
    })?;
    Ok(PartitionPredictor {
        learner: spec.clone(),
        leaves: leaves.iter().map(|&g| tree.node(g).group.clone()).collect(),
        hypotheses,
        root,
        fallback,
    })
}

/// Reuses group ERMs fitted for the whole tree.
pub fn decoupled_prepared(
    tree: &GroupTree,
    prepared: &Prepared,
    fallback: Fallback,
) -> Result<PartitionPredictor> {
    let leaves = tree.leaves();
    check_disjoint(tree, &leaves)?;
    let root = prepared.erms.root().clone();
    Ok(PartitionPredictor {
        learner: prepared.erms.spec().clone(),
        leaves: leaves.iter().map(|&g| tree.node(g).group.clone()).collect(),
        hypotheses: leaves
            .iter()
            .map(|&g| prepared.erms.get(g).unwrap_or(&root).clone())
            .collect(),
        root,
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::mgl_tree::tests::two_leaf_fixture;
    use crate::data::{make_synthetic, LabelRule, LeafSpec, SyntheticSpec};
    use crate::groups::{build_hierarchy, Literal};
    use crate::learners::erm;
    use crate::risk::{group_risk, Loss};

    #[test]
    fn product_tree_routes_everything() {
        let (ds, tree) = two_leaf_fixture();
        let p = decoupled(&ds, &tree, &LearnerSpec::Constant, Fallback::Error).unwrap();
        let preds: Vec<u8> = ds.rows().map(|r| p.predict(&r).unwrap()).collect();
        assert_eq!(preds, ds.labels());
    }

    #[test]
    fn single_leaf_is_erm() {
        let (ds, _) = two_leaf_fixture();
        let tree = GroupTree::from_groups(vec![Group::whole_space()]).unwrap();
        let p = decoupled(&ds, &tree, &LearnerSpec::logistic(), Fallback::Error).unwrap();
        let global = erm(&LearnerSpec::logistic(), &ds).unwrap();
        for r in ds.rows() {
            assert_eq!(p.score(&r).unwrap(), global.score_features(r.features()));
        }
    }

    #[test]
    fn uncovered_examples() {
        let (ds, _) = two_leaf_fixture();
        let only_a = Group::conjunction("A", vec![Literal::new("g", "A")]);
        let tree = GroupTree::from_groups(vec![Group::whole_space(), only_a]).unwrap();
        let strict = decoupled(&ds, &tree, &LearnerSpec::Constant, Fallback::Error).unwrap();
        let b_row = ds.rows().find(|r| r.category("g") == Some("B")).unwrap();
        match strict.score(&b_row) {
            Err(Error::Routing(msg)) => assert!(msg.contains('B'), "{msg}"),
            other => panic!("expected routing error, got {other:?}"),
        }
        let lenient = decoupled(&ds, &tree, &LearnerSpec::Constant, Fallback::Root).unwrap();
        assert_eq!(lenient.predict(&b_row).unwrap(), 1);
    }

    #[test]
    fn overlapping_leaves_rejected() {
        let (ds, _) = two_leaf_fixture();
        let tree = GroupTree::from_groups(vec![
            Group::whole_space(),
            Group::rows("r01", vec![0, 1]),
            Group::conjunction("B", vec![Literal::new("g", "B")]),
        ]);
        // Rows vs. conjunction is undecidable, which the tree already rejects.
        assert!(tree.is_err());
        let _ = ds;
    }

    #[test]
    fn opposite_separators_beat_global_erm() {
        let leaf = |c: &str, sign: f64| LeafSpec {
            categories: vec![c.into()],
            n: 2000,
            rule: LabelRule::Linear {
                weights: vec![sign, 0.0],
                bias: 0.0,
            },
        };
        let spec = SyntheticSpec {
            attributes: vec!["side".into()],
            dim: 2,
            noise: 0.0,
            leaves: vec![leaf("L", 1.0), leaf("R", -1.0)],
            exclude_group_features: true,
        };
        let train = make_synthetic(&spec, 1).unwrap();
        let test = make_synthetic(&spec, 2).unwrap();
        let tree = build_hierarchy(train.attributes(), &spec.attributes).unwrap();
        let learner = LearnerSpec::logistic();
        let p = decoupled(&train, &tree, &learner, Fallback::Error).unwrap();
        let global = erm(&learner, &train).unwrap();
        for &g in &tree.leaves() {
            let group = &tree.node(g).group;
            let dp = group_risk(&p, &test, group, &Loss::ZeroOne).unwrap().value.unwrap();
            let ge = group_risk(&global, &test, group, &Loss::ZeroOne).unwrap().value.unwrap();
            assert!(dp < ge, "{}: {dp} vs {ge}", group.id);
        }
    }
}
