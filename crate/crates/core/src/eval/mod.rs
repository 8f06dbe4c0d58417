//! Repeated-trial experiments reporting per-group test error.

mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use report::{compare, write_compare_csv, DeltaRow, EvalReport, GroupRow, TrialSummary};

use crate::algorithms::{
    decoupled_prepared, default_cap, Decision, guarantee_violations, mgl_tree_prepared, prepend_prepared,
    Fallback, Prepared,
};
use crate::bounds::EpsilonSpec;
use crate::data::{load_csv, split, AttributeSchema, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::groups::{GroupTree, HierarchySpec};
use crate::learners::{Classifier, LearnerSpec, Predictor};
use crate::par::{map_indexed, Exec};
use crate::risk::{masked_mean, row_losses, Loss};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Erm,
    GroupErm,
    Prepend,
    MglTree,
    Decoupled,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Erm,
        Method::GroupErm,
        Method::Prepend,
        Method::MglTree,
        Method::Decoupled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::GroupErm => "group_erm",
            Method::Prepend => "prepend",
            Method::MglTree => "mgl_tree",
            Method::Decoupled => "decoupled",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Erm, Method::GroupErm, Method::Prepend, Method::MglTree]
}

fn default_trials() -> usize {
    10
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_fallback() -> Fallback {
    Fallback::Root
}

/// Where an experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub path: PathBuf,
    pub schema: AttributeSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSource>,
    pub hierarchy: HierarchySpec,
    pub learners: Vec<LearnerSpec>,
    pub epsilon: EpsilonSpec,
    /// Training loss. Test error is always zero-one.
    #[serde(default)]
    pub loss: Loss,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Prepend round limit; `4·|G|` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prepend_cap: Option<usize>,
    /// Decoupled routing for examples outside every leaf.
    #[serde(default = "default_fallback")]
    pub fallback: Fallback,
}

impl ExperimentConfig {
    pub fn new(hierarchy: HierarchySpec, learners: Vec<LearnerSpec>, epsilon: EpsilonSpec) -> Self {
        ExperimentConfig {
            data: None,
            hierarchy,
            learners,
            epsilon,
            loss: Loss::default(),
            trials: default_trials(),
            test_fraction: default_test_fraction(),
            seed: 0,
            methods: default_methods(),
            prepend_cap: None,
            fallback: default_fallback(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::Config(format!("method `{m}` listed twice")));
            }
        }
        if self.learners.is_empty() {
            return Err(Error::Config("no learners configured".into()));
        }
        for (i, l) in self.learners.iter().enumerate() {
            l.validate()?;
            if self.learners[..i].iter().any(|o| o.name() == l.name()) {
                return Err(Error::Config(format!("learner `{}` listed twice", l.name())));
            }
        }
        if self.prepend_cap == Some(0) {
            return Err(Error::Config("prepend_cap must be at least 1".into()));
        }
        self.epsilon.validate()?;
        self.loss.validate()?;
        if let Some(src) = &self.data {
            src.schema.validate()?;
        }
        Ok(())
    }

    /// Loads the configured dataset; relative paths resolve against `base`.
    pub fn load_dataset(&self, base: Option<&Path>) -> Result<Dataset> {
        let src = self
            .data
            .as_ref()
            .ok_or_else(|| Error::Config("no data source configured".into()))?;
        let path = match base {
            Some(b) if src.path.is_relative() => b.join(&src.path),
            _ => src.path.clone(),
        };
        load_csv(path, &src.schema)
    }
}

/// Loads the configured dataset and runs every trial.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Exec) -> Result<EvalReport> {
    cfg.validate()?;
    let ds = cfg.load_dataset(None)?;
    run_experiment_on(cfg, &ds, exec)
}

/// Test-set outcome of one (trial, method, learner).
struct Outcome {
    /// Per tree node.
    errors: Vec<Option<f64>>,
}

struct TrialResult {
    n_g: Vec<usize>,
    outcomes: Vec<Outcome>,
    summaries: Vec<TrialSummary>,
}

/// Runs all trials on an in-memory dataset. Trials run under `exec`; each
/// trial is sequential inside, so results do not depend on scheduling.
pub fn run_experiment_on(cfg: &ExperimentConfig, ds: &Dataset, exec: Exec) -> Result<EvalReport> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset("experiment dataset is empty".into()));
    }
    let tree = cfg.hierarchy.build(ds.attributes())?;
    let results = map_indexed(exec, cfg.trials, |t| run_trial(cfg, ds, &tree, t));
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(report::assemble(cfg, &tree, results))
}

fn run_trial(cfg: &ExperimentConfig, ds: &Dataset, tree: &GroupTree, trial: usize) -> Result<TrialResult> {
    let spec = SplitSpec {
        test_fraction: cfg.test_fraction,
        seed: cfg.seed,
        trial_index: trial as u64,
    };
    let (train, test) = split(ds, &spec)?;
    let test_members = tree.memberships(&test)?;
    let mut outcomes = Vec::new();
    let mut summaries = Vec::new();
    for learner in &cfg.learners {
        let wrap = |method: &str, e: Error| Error::Trial {
            method: format!("{method}[{}]", learner.name()),
            trial,
            source: Box::new(e),
        };
        let prepared = Prepared::new(&train, tree, learner, &cfg.epsilon, Exec::Sequential)
            .map_err(|e| wrap("group_erm", e))?;
        let mut summary = TrialSummary {
            trial,
            learner: learner.name(),
            train_n: train.len(),
            test_n: test.len(),
            mgl_updates: None,
            mgl_guarantee_violations: None,
            prepend_entries: None,
        };
        for &method in &cfg.methods {
            let errors = match method {
                Method::Erm => group_errors(prepared.erms.root(), &test, &test_members),
                Method::GroupErm => Ok(group_erm_errors(&prepared, &test, &test_members)),
                Method::MglTree => (|| {
                    let f = mgl_tree_prepared(&train, tree, &prepared, &cfg.loss)?;
                    let bad = guarantee_violations(&f, &train, tree, &prepared, &cfg.loss, 1e-9)?;
                    summary.mgl_updates = Some(f.nodes.iter().filter(|n| n.decision == Decision::Updated).count());
                    summary.mgl_guarantee_violations = Some(bad.len());
                    group_errors(&f, &test, &test_members)
                })(),
                Method::Prepend => (|| {
                    let cap = cfg.prepend_cap.unwrap_or_else(|| default_cap(tree.len()));
                    let list = prepend_prepared(&train, tree, &prepared, &cfg.loss, cap)?;
                    summary.prepend_entries = Some(list.len());
                    group_errors(&list, &test, &test_members)
                })(),
                Method::Decoupled => decoupled_prepared(tree, &prepared, cfg.fallback)
                    .and_then(|p| group_errors(&p, &test, &test_members)),
            }
            .map_err(|e| wrap(method.name(), e))?;
            outcomes.push(Outcome { errors });
        }
        summaries.push(summary);
    }
    Ok(TrialResult {
        n_g: test_members.iter().map(Vec::len).collect(),
        outcomes,
        summaries,
    })
}

fn group_errors<C: Classifier + ?Sized>(f: &C, test: &Dataset, members: &[Vec<usize>]) -> Result<Vec<Option<f64>>> {
    let losses = row_losses(f, test, &Loss::ZeroOne)?;
    Ok(members.iter().map(|rows| masked_mean(&losses, rows).value).collect())
}

/// Each group evaluated with its own group ERM (the root ERM for groups
/// without training rows).
fn group_erm_errors(prepared: &Prepared, test: &Dataset, members: &[Vec<usize>]) -> Vec<Option<f64>> {
    let root: &Arc<Predictor> = prepared.erms.root();
    members
        .iter()
        .enumerate()
        .map(|(g, rows)| {
            let h = prepared.erms.get(g).unwrap_or(root);
            let losses: Vec<f64> = rows
                .iter()
                .map(|&i| {
                    let r = test.row(i);
                    Loss::ZeroOne.eval(h.score_features(r.features()), r.label())
                })
                .collect();
            crate::risk::mean_of(&losses).value
        })
        .collect()
}

#[cfg(test)]
mod tests;
