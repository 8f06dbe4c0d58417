use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, Method, TrialResult};
use crate::error::{Error, Result};
use crate::groups::GroupTree;
use crate::risk::pairwise_sum;

/// Aggregate for one (method, learner, group).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub method: Method,
    pub learner: String,
    pub group_id: String,
    pub depth: usize,
    /// Mean over trials where the group had test rows.
    pub mean_error: Option<f64>,
    /// Sample standard deviation over present trials divided by `√k`.
    pub stderr: Option<f64>,
    pub mean_n_g: f64,
    pub trials_present: usize,
    pub trial_errors: Vec<Option<f64>>,
    pub trial_n_g: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub learner: String,
    pub train_n: usize,
    pub test_n: usize,
    pub mgl_updates: Option<usize>,
    /// Groups where MGL-Tree misses its training-set guarantee.
    pub mgl_guarantee_violations: Option<usize>,
    pub prepend_entries: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    /// Prepend competes against group ERMs plus the global ERM only.
    pub prepend_candidates: String,
    pub groups: Vec<GroupRow>,
    pub trials: Vec<TrialSummary>,
}

pub(super) fn mean_and_stderr(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let k = values.len();
    if k == 0 {
        return (None, None);
    }
    let mean = pairwise_sum(values) / k as f64;
    if k == 1 {
        return (Some(mean), None);
    }
    let ss: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let sd = (pairwise_sum(&ss) / (k - 1) as f64).sqrt();
    (Some(mean), Some(sd / (k as f64).sqrt()))
}

pub(super) fn assemble(cfg: &ExperimentConfig, tree: &GroupTree, results: Vec<TrialResult>) -> EvalReport {
    let n_methods = cfg.methods.len();
    let mut groups = Vec::new();
    for (m, &method) in cfg.methods.iter().enumerate() {
        for (l, learner) in cfg.learners.iter().enumerate() {
            for (g, node) in tree.nodes().iter().enumerate() {
                let trial_errors: Vec<Option<f64>> = results
                    .iter()
                    .map(|r| r.outcomes[l * n_methods + m].errors[g])
                    .collect();
                let trial_n_g: Vec<usize> = results.iter().map(|r| r.n_g[g]).collect();
                let present: Vec<f64> = trial_errors.iter().flatten().copied().collect();
                let (mean_error, stderr) = mean_and_stderr(&present);
                groups.push(GroupRow {
                    method,
                    learner: learner.name(),
                    group_id: node.group.id.clone(),
                    depth: node.depth,
                    mean_error,
                    stderr,
                    mean_n_g: trial_n_g.iter().sum::<usize>() as f64 / results.len() as f64,
                    trials_present: present.len(),
                    trial_errors,
                    trial_n_g,
                });
            }
        }
    }
    EvalReport {
        config: cfg.clone(),
        prepend_candidates: "group ERMs of non-empty groups and the global ERM".into(),
        groups,
        trials: results.into_iter().flat_map(|r| r.summaries).collect(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvalReport {
    pub fn rows(&self, method: Method, learner: &str) -> impl Iterator<Item = &GroupRow> + '_ {
        let learner = learner.to_string();
        self.groups
            .iter()
            .filter(move |r| r.method == method && r.learner == learner)
    }

    pub fn row(&self, method: Method, learner: &str, group: &str) -> Option<&GroupRow> {
        self.rows(method, learner).find(|r| r.group_id == group)
    }

    pub fn learners(&self) -> Vec<String> {
        self.config.learners.iter().map(|l| l.name()).collect()
    }

    /// The group with the highest mean test error.
    pub fn worst_group(&self, method: Method, learner: &str) -> Option<&GroupRow> {
        self.rows(method, learner)
            .filter(|r| r.mean_error.is_some())
            .fold(None, |best: Option<&GroupRow>, r| match best {
                Some(b) if b.mean_error >= r.mean_error => Some(b),
                _ => Some(r),
            })
    }

    pub fn write_csv_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "method",
            "learner",
            "group_id",
            "depth",
            "mean_error",
            "stderr",
            "mean_n_g",
            "trials_present",
        ])?;
        for r in &self.groups {
            out.write_record([
                r.method.name().to_string(),
                r.learner.clone(),
                r.group_id.clone(),
                r.depth.to_string(),
                opt(r.mean_error),
                opt(r.stderr),
                r.mean_n_g.to_string(),
                r.trials_present.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Per-group difference `a - b` between two methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub learner: String,
    pub group_id: String,
    pub depth: usize,
    pub error_a: Option<f64>,
    pub error_b: Option<f64>,
    /// Mean of per-trial differences over trials where both are present.
    pub delta: Option<f64>,
    pub stderr: Option<f64>,
}

/// Pairs the two methods' rows by learner and group, most negative delta
/// first (groups without a paired trial last).
pub fn compare(report: &EvalReport, a: Method, b: Method) -> Result<Vec<DeltaRow>> {
    for m in [a, b] {
        if !report.config.methods.contains(&m) {
            return Err(Error::Config(format!("method `{m}` is not in the report")));
        }
    }
    let mut out = Vec::new();
    for learner in report.learners() {
        for (ra, rb) in report.rows(a, &learner).zip(report.rows(b, &learner)) {
            debug_assert_eq!(ra.group_id, rb.group_id);
            let paired: Vec<f64> = ra
                .trial_errors
                .iter()
                .zip(&rb.trial_errors)
                .filter_map(|(x, y)| Some((*x)? - (*y)?))
                .collect();
            let (delta, stderr) = mean_and_stderr(&paired);
            out.push(DeltaRow {
                learner: learner.clone(),
                group_id: ra.group_id.clone(),
                depth: ra.depth,
                error_a: ra.mean_error,
                error_b: rb.mean_error,
                delta,
                stderr,
            });
        }
    }
    out.sort_by(|x, y| match (x.delta, y.delta) {
        (Some(p), Some(q)) => p.total_cmp(&q),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(out)
}

pub fn write_compare_csv<W: Write>(rows: &[DeltaRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["learner", "group_id", "depth", "error_a", "error_b", "delta", "stderr"])?;
    for r in rows {
        out.write_record([
            r.learner.clone(),
            r.group_id.clone(),
            r.depth.to_string(),
            opt(r.error_a),
            opt(r.error_b),
            opt(r.delta),
            opt(r.stderr),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
