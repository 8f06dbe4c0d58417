//! Base learners realizing the benchmark hypothesis class, and group ERM.

pub mod logistic;
pub mod tree;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Row};
use crate::error::{Error, Result};
use crate::groups::{Group, GroupTree};
use crate::par::{try_map_indexed, Exec};

pub use logistic::LogisticModel;
pub use tree::DecisionTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    Constant,
    Logistic {
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
        #[serde(default = "default_iterations")]
        iterations: usize,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    Tree {
        max_depth: usize,
    },
    BaggedTrees {
        #[serde(default = "default_trees")]
        trees: usize,
        #[serde(default = "default_bagged_depth")]
        max_depth: usize,
        #[serde(default = "default_feature_fraction")]
        feature_fraction: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_learning_rate() -> f64 {
    1.0
}
fn default_iterations() -> usize {
    500
}
fn default_tolerance() -> f64 {
    1e-6
}
fn default_trees() -> usize {
    25
}
fn default_bagged_depth() -> usize {
    8
}
fn default_feature_fraction() -> f64 {
    0.5
}

impl LearnerSpec {
    pub fn logistic() -> Self {
        LearnerSpec::Logistic {
            learning_rate: default_learning_rate(),
            iterations: default_iterations(),
            tolerance: default_tolerance(),
        }
    }

    pub fn tree(max_depth: usize) -> Self {
        LearnerSpec::Tree { max_depth }
    }

    pub fn bagged(trees: usize, max_depth: usize, seed: u64) -> Self {
        LearnerSpec::BaggedTrees {
            trees,
            max_depth,
            feature_fraction: default_feature_fraction(),
            seed,
        }
    }

    /// Short label used in reports and file names.
    pub fn name(&self) -> String {
        match self {
            LearnerSpec::Constant => "constant".into(),
            LearnerSpec::Logistic { .. } => "logistic".into(),
            LearnerSpec::Tree { max_depth } => format!("tree{max_depth}"),
            LearnerSpec::BaggedTrees { trees, max_depth, .. } => {
                format!("bagged{trees}x{max_depth}")
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LearnerSpec::Constant => Ok(()),
            LearnerSpec::Logistic {
                learning_rate,
                iterations,
                tolerance,
            } => {
                if !(learning_rate > 0.0) || iterations == 0 || !(tolerance >= 0.0) {
                    Err(Error::Learner(format!(
                        "logistic needs learning_rate > 0, iterations >= 1, tolerance >= 0 \
                         (got {learning_rate}, {iterations}, {tolerance})"
                    )))
                } else {
                    Ok(())
                }
            }
            LearnerSpec::Tree { max_depth: 0 } => {
                Err(Error::Learner("max_depth must be at least 1".into()))
            }
            LearnerSpec::Tree { .. } => Ok(()),
            LearnerSpec::BaggedTrees {
                trees,
                max_depth,
                feature_fraction,
                ..
            } => {
                if trees == 0 || max_depth == 0 || !(feature_fraction > 0.0 && feature_fraction <= 1.0) {
                    Err(Error::Learner(format!(
                        "bagged_trees needs trees >= 1, max_depth >= 1, feature_fraction in (0, 1] \
                         (got {trees}, {max_depth}, {feature_fraction})"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    /// Always the same score; the label is `score >= 0.5`.
    Constant { score: f64 },
    Logistic(LogisticModel),
    Tree(DecisionTree),
    /// Majority vote; the score is the fraction of trees voting 1.
    Bagged { trees: Vec<DecisionTree> },
}

/// A trained hypothesis with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub model: Model,
    pub learner: String,
    pub group: String,
}

impl Predictor {
    pub fn constant(label: u8, learner: &str, group: &str) -> Self {
        Predictor {
            model: Model::Constant {
                score: label as f64,
            },
            learner: learner.into(),
            group: group.into(),
        }
    }

    /// Score in `[0, 1]` for a feature vector.
    pub fn score_features(&self, x: &[f64]) -> f64 {
        match &self.model {
            Model::Constant { score } => *score,
            Model::Logistic(m) => m.score(x),
            Model::Tree(t) => t.score(x),
            Model::Bagged { trees } => {
                let votes = trees.iter().filter(|t| t.score(x) >= 0.5).count();
                votes as f64 / trees.len() as f64
            }
        }
    }

    pub fn predict_features(&self, x: &[f64]) -> u8 {
        threshold(self.score_features(x))
    }
}

/// Scores at or above one half predict 1.
pub fn threshold(score: f64) -> u8 {
    (score >= 0.5) as u8
}

/// Anything that can label an example.
pub trait Classifier: Sync {
    fn score(&self, row: &Row<'_>) -> Result<f64>;

    fn predict(&self, row: &Row<'_>) -> Result<u8> {
        Ok(threshold(self.score(row)?))
    }

    /// Scores for every row of `ds`. Implementations that need per-dataset
    /// setup (compiled group predicates) override this.
    fn scores(&self, ds: &Dataset) -> Result<Vec<f64>> {
        ds.rows().map(|r| self.score(&r)).collect()
    }
}

impl Classifier for Predictor {
    fn score(&self, row: &Row<'_>) -> Result<f64> {
        Ok(self.score_features(row.features()))
    }
}

impl<C: Classifier + Send + ?Sized> Classifier for Arc<C> {
    fn score(&self, row: &Row<'_>) -> Result<f64> {
        (**self).score(row)
    }

    fn scores(&self, ds: &Dataset) -> Result<Vec<f64>> {
        (**self).scores(ds)
    }
}

/// Fits `spec` on the rows of `ds` where `mask` is set.
pub fn fit(spec: &LearnerSpec, ds: &Dataset, mask: &[bool]) -> Result<Predictor> {
    assert_eq!(mask.len(), ds.len(), "mask length must equal dataset size");
    let rows: Vec<usize> = (0..ds.len()).filter(|&i| mask[i]).collect();
    fit_rows(spec, ds, &rows, "mask")
}

/// Fits `spec` on the listed rows; `group` is recorded as provenance.
pub fn fit_rows(spec: &LearnerSpec, ds: &Dataset, rows: &[usize], group: &str) -> Result<Predictor> {
    spec.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyGroup(group.into()));
    }
    let learner = spec.name();
    let positives = rows.iter().filter(|&&i| ds.labels()[i] == 1).count();
    if positives == 0 || positives == rows.len() {
        return Ok(Predictor::constant((positives > 0) as u8, &learner, group));
    }

    let model = match *spec {
        LearnerSpec::Constant => Model::Constant {
            score: positives as f64 / rows.len() as f64,
        },
        LearnerSpec::Logistic {
            learning_rate,
            iterations,
            tolerance,
        } => Model::Logistic(logistic::fit(
            ds,
            rows,
            logistic::GdParams {
                learning_rate,
                iterations,
                tolerance,
            },
        )),
        LearnerSpec::Tree { max_depth } => Model::Tree(tree::TreeBuilder::new(ds, max_depth).fit(rows)),
        LearnerSpec::BaggedTrees {
            trees,
            max_depth,
            feature_fraction,
            seed,
        } => Model::Bagged {
            trees: tree::fit_bagged(ds, rows, trees, max_depth, feature_fraction, seed),
        },
    };
    Ok(Predictor {
        model,
        learner,
        group: group.into(),
    })
}

/// ERM over the whole sample.
pub fn erm(spec: &LearnerSpec, ds: &Dataset) -> Result<Predictor> {
    let rows: Vec<usize> = (0..ds.len()).collect();
    fit_rows(spec, ds, &rows, crate::groups::ROOT_ID)
}

/// ERM restricted to the members of `g`.
pub fn group_erm(spec: &LearnerSpec, ds: &Dataset, g: &Group) -> Result<Predictor> {
    let compiled = g.compile(ds.attributes())?;
    let rows: Vec<usize> = ds
        .rows()
        .filter(|r| compiled.contains(r))
        .map(|r| r.index())
        .collect();
    fit_rows(spec, ds, &rows, &g.id)
}

/// One group ERM per tree node, fit on a training set. Nodes without
/// training rows have no hypothesis.
#[derive(Debug, Clone)]
pub struct GroupErms {
    spec: LearnerSpec,
    hypotheses: Vec<Option<Arc<Predictor>>>,
}

impl GroupErms {
    /// Fits every node independently; `members[g]` lists node `g`'s rows.
    pub fn fit(
        spec: &LearnerSpec,
        train: &Dataset,
        tree: &GroupTree,
        members: &[Vec<usize>],
        exec: Exec,
    ) -> Result<GroupErms> {
        spec.validate()?;
        if train.is_empty() {
            return Err(Error::EmptyDataset("training set is empty".into()));
        }
        let hypotheses = try_map_indexed(exec, tree.len(), |g| {
            if members[g].is_empty() {
                Ok(None)
            } else {
                fit_rows(spec, train, &members[g], &tree.node(g).group.id).map(|p| Some(Arc::new(p)))
            }
        })?;
        Ok(GroupErms {
            spec: spec.clone(),
            hypotheses,
        })
    }

    /// Wraps already-fitted hypotheses (used when loading a model file).
    pub fn from_parts(spec: LearnerSpec, hypotheses: Vec<Option<Arc<Predictor>>>) -> Self {
        GroupErms { spec, hypotheses }
    }

    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn get(&self, node: usize) -> Option<&Arc<Predictor>> {
        self.hypotheses[node].as_ref()
    }

    /// The global ERM `ĥ^X`.
    pub fn root(&self) -> &Arc<Predictor> {
        self.hypotheses[0]
            .as_ref()
            .expect("root hypothesis exists for a non-empty training set")
    }

    pub fn hypotheses(&self) -> &[Option<Arc<Predictor>>] {
        &self.hypotheses
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::{make_synthetic, read_csv, AttributeSchema, ColumnSpec, LabelRule, LeafSpec, SyntheticSpec};
    use crate::groups::Literal;

    fn labels_ds(labels: &[u8]) -> Dataset {
        let schema = AttributeSchema {
            columns: vec![ColumnSpec::numeric("x"), ColumnSpec::label("y")],
            label: "y".into(),
            group_attributes: vec![],
            bins: vec![],
            exclude_group_features: false,
        };
        let mut text = String::from("x,y\n");
        for (i, y) in labels.iter().enumerate() {
            text.push_str(&format!("{i},{y}\n"));
        }
        read_csv(text.as_bytes(), &schema).unwrap()
    }

    fn all_specs() -> Vec<LearnerSpec> {
        vec![
            LearnerSpec::Constant,
            LearnerSpec::logistic(),
            LearnerSpec::tree(2),
            LearnerSpec::bagged(5, 3, 1),
        ]
    }

    fn train_error(p: &Predictor, ds: &Dataset) -> f64 {
        ds.rows()
            .filter(|r| p.predict_features(r.features()) != r.label())
            .count() as f64
            / ds.len() as f64
    }

    #[test]
    fn constant_majority() {
        let ds = labels_ds(&[1, 1, 0]);
        let p = erm(&LearnerSpec::Constant, &ds).unwrap();
        assert!(ds.rows().all(|r| p.predict_features(r.features()) == 1));
    }

    #[test]
    fn constant_is_zero_one_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.gen_range(1..30);
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
            let ds = labels_ds(&labels);
            let p = erm(&LearnerSpec::Constant, &ds).unwrap();
            let ones = labels.iter().filter(|&&y| y == 1).count() as f64 / n as f64;
            let err = train_error(&p, &ds);
            assert!(err <= ones + 1e-12 && err <= 1.0 - ones + 1e-12);
        }
    }

    #[test]
    fn single_example_group_is_constant_for_every_learner() {
        let ds = labels_ds(&[0]);
        for spec in all_specs() {
            let p = fit(&spec, &ds, &[true]).unwrap();
            assert_eq!(p.model, Model::Constant { score: 0.0 }, "{}", spec.name());
        }
    }

    #[test]
    fn empty_mask_errors() {
        let ds = labels_ds(&[0, 1]);
        assert!(matches!(
            fit(&LearnerSpec::Constant, &ds, &[false, false]),
            Err(Error::EmptyGroup(_))
        ));
    }

    #[test]
    fn invalid_specs() {
        assert!(LearnerSpec::tree(0).validate().is_err());
        assert!(LearnerSpec::bagged(0, 2, 0).validate().is_err());
        let bad = LearnerSpec::Logistic {
            learning_rate: 1.0,
            iterations: 0,
            tolerance: 0.0,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn logistic_separable_margin() {
        // 200 points in 2-D with |x . w| >= 0.5 for w = (1, -1)/sqrt(2).
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut text = String::from("a,b,y\n");
        let mut count = 0;
        while count < 200 {
            let (a, b): (f64, f64) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let m = (a - b) / 2f64.sqrt();
            if m.abs() < 0.5 {
                continue;
            }
            text.push_str(&format!("{a},{b},{}\n", (m > 0.0) as u8));
            count += 1;
        }
        let schema = AttributeSchema {
            columns: vec![ColumnSpec::numeric("a"), ColumnSpec::numeric("b"), ColumnSpec::label("y")],
            label: "y".into(),
            group_attributes: vec![],
            bins: vec![],
            exclude_group_features: false,
        };
        let ds = read_csv(text.as_bytes(), &schema).unwrap();
        let p = erm(&LearnerSpec::logistic(), &ds).unwrap();
        assert_eq!(train_error(&p, &ds), 0.0);
    }

    #[test]
    fn deterministic_fits() {
        let spec = SyntheticSpec {
            attributes: vec!["g".into()],
            dim: 3,
            noise: 0.2,
            leaves: vec![LeafSpec {
                categories: vec!["A".into()],
                n: 300,
                rule: LabelRule::Linear {
                    weights: vec![1.0, -1.0, 0.5],
                    bias: 0.1,
                },
            }],
            exclude_group_features: false,
        };
        let ds = make_synthetic(&spec, 2).unwrap();
        for learner in all_specs() {
            let a = erm(&learner, &ds).unwrap();
            let b = erm(&learner, &ds).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn tree_depth_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let spec = crate::data::synth::random_hierarchical(&mut rng, &Default::default());
            let ds = make_synthetic(&spec, rng.gen()).unwrap();
            let depth = rng.gen_range(1..=4);
            match erm(&LearnerSpec::tree(depth), &ds).unwrap().model {
                Model::Tree(t) => assert!(t.depth() <= depth),
                Model::Constant { .. } => {}
                other => panic!("unexpected model {other:?}"),
            }
        }
    }

    #[test]
    fn group_erm_on_root_is_erm() {
        let ds = labels_ds(&[1, 0, 1, 1, 0]);
        let spec = LearnerSpec::tree(2);
        let a = erm(&spec, &ds).unwrap();
        let b = group_erm(&spec, &ds, &Group::whole_space()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn group_erm_empty_group() {
        let ds = labels_ds(&[1, 0]);
        let g = Group::rows("none", vec![]);
        assert!(matches!(group_erm(&LearnerSpec::Constant, &ds, &g), Err(Error::EmptyGroup(_))));
        let unknown = Group::conjunction("u", vec![Literal::new("nope", "1")]);
        assert!(group_erm(&LearnerSpec::Constant, &ds, &unknown).is_err());
    }

    #[test]
    fn json_specs() {
        let spec: LearnerSpec = serde_json::from_str(r#"{"kind":"tree","max_depth":4}"#).unwrap();
        assert_eq!(spec, LearnerSpec::tree(4));
        let spec: LearnerSpec = serde_json::from_str(r#"{"kind":"logistic"}"#).unwrap();
        assert_eq!(spec, LearnerSpec::logistic());
        assert!(serde_json::from_str::<LearnerSpec>(r#"{"kind":"tree","max_depth":2,"x":1}"#).is_err());
    }
}
