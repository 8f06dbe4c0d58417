use std::fmt;

use serde::{Deserialize, Serialize};

use super::{losses_on, node_risks, Decision, TreePredictor};
use crate::bounds::epsilon;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::risk::{masked_mean, mean_of};

const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditViolationKind {
    /// The recorded decision differs from what the update rule gives.
    RuleDisagreement,
    /// After an update, a visited group exceeds its ERM risk plus margin.
    StepInequality,
    /// An update raised the risk on an ancestor of the updated node.
    AncestorIncrease,
    /// The recorded working predictor does not follow from the decision.
    SourceMismatch,
    /// Recorded risks or margins differ from their recomputation.
    RecordMismatch,
    /// The finished predictor fails the per-group guarantee.
    FinalGuarantee,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub step: usize,
    pub group: String,
    pub kind: AuditViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub steps: usize,
    pub updates: usize,
    pub checks: usize,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_clean() {
            return write!(
                f,
                "CLEAN: {} steps, {} updates, {} inequalities checked",
                self.steps, self.updates, self.checks
            );
        }
        writeln!(f, "VIOLATIONS: {}", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  step {} [{}] {:?}: {}", v.step, v.group, v.kind, v.detail)?;
        }
        Ok(())
    }
}

fn same(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x == y || (x.is_nan() && y.is_nan()),
        (None, None) => true,
        _ => false,
    }
}

/// Replays the breadth-first pass recorded in `model` on its training set.
///
/// Every step is re-derived from the stored hypotheses; the recorded
/// decision is then applied (so a tampered record is both flagged and
/// followed). After each update all visited groups are re-checked against
/// `L_S(ĥ^g | g) + ε_n(g)`, and the ancestors of the updated node must not
/// get worse. Finally the finished predictor is checked through its own
/// evaluation path.
pub fn monotonicity_audit(model: &TreePredictor, train: &Dataset) -> Result<AuditReport> {
    let tree = &model.tree;
    if train.len() != model.train_n {
        return Err(Error::Mismatch(format!(
            "model was trained on {} rows, data has {}",
            model.train_n,
            train.len()
        )));
    }
    if model.nodes.len() != tree.len() || model.hypotheses.len() != tree.len() {
        return Err(Error::Mismatch("trace length differs from the tree".into()));
    }
    let members = tree.memberships(train)?;
    for (g, rec) in model.nodes.iter().enumerate() {
        if rec.id != tree.node(g).group.id {
            return Err(Error::Mismatch(format!(
                "trace step {g} names `{}`, tree has `{}`",
                rec.id,
                tree.node(g).group.id
            )));
        }
        if rec.n_g != members[g].len() {
            return Err(Error::Mismatch(format!(
                "group `{}` has {} rows, trace records {}",
                rec.id,
                members[g].len(),
                rec.n_g
            )));
        }
        if model.hypotheses[g].is_some() != (rec.n_g > 0) {
            return Err(Error::Mismatch(format!(
                "group `{}`: hypothesis presence disagrees with its size",
                rec.id
            )));
        }
    }
    let Some(root_h) = model.hypotheses[0].as_ref() else {
        return Err(Error::Mismatch("model has no root hypothesis".into()));
    };

    let loss = &model.loss;
    let mut violations = Vec::new();
    let mut flag = |step: usize, kind, detail: String| {
        violations.push(AuditViolation {
            step,
            group: tree.node(step).group.id.clone(),
            kind,
            detail,
        })
    };

    let eps: Vec<f64> = members
        .iter()
        .map(|m| epsilon(&model.epsilon, m.len()))
        .collect::<Result<_>>()?;
    let erm_risk: Vec<Option<f64>> = (0..tree.len())
        .map(|g| {
            model.hypotheses[g]
                .as_ref()
                .map(|h| mean_of(&losses_on(h, train, &members[g], loss)).value.unwrap())
        })
        .collect();

    let all: Vec<usize> = (0..train.len()).collect();
    let mut cur_loss = losses_on(root_h, train, &all, loss);
    let mut cur_risk: Vec<Option<f64>> = vec![None; tree.len()];
    cur_risk[0] = masked_mean(&cur_loss, &members[0]).value;
    let mut source = vec![0usize; tree.len()];
    let mut updates = 0;
    let mut checks = 0;

    let root = &model.nodes[0];
    if root.decision != Decision::Root || root.source != 0 {
        flag(0, AuditViolationKind::SourceMismatch, "root must be its own source".into());
    }
    if !same(root.risk_erm, erm_risk[0]) || root.epsilon.to_bits() != eps[0].to_bits() {
        flag(0, AuditViolationKind::RecordMismatch, "root record differs from recomputation".into());
    }

    for g in 1..tree.len() {
        let rec = &model.nodes[g];
        let parent = tree.node(g).parent.expect("non-root node has a parent");
        let inherited = source[parent];
        let rows = &members[g];

        if rec.epsilon.to_bits() != eps[g].to_bits() {
            flag(g, AuditViolationKind::RecordMismatch, format!("epsilon {} recorded, {} recomputed", rec.epsilon, eps[g]));
        }
        let expected = match (&model.hypotheses[g], erm_risk[g]) {
            (Some(_), Some(r_erm)) => {
                let old = model.hypotheses[inherited]
                    .as_ref()
                    .ok_or_else(|| Error::Mismatch(format!("step {g} inherits an unfitted node")))?;
                let r_old = mean_of(&losses_on(old, train, rows, loss)).value.unwrap();
                let err = r_old - r_erm - eps[g];
                if !same(rec.risk_old, Some(r_old)) || !same(rec.risk_erm, Some(r_erm)) || !same(rec.err, Some(err)) {
                    flag(
                        g,
                        AuditViolationKind::RecordMismatch,
                        format!("recorded (old {:?}, erm {:?}, err {:?}) vs recomputed ({r_old}, {r_erm}, {err})", rec.risk_old, rec.risk_erm, rec.err),
                    );
                }
                if err >= 0.0 {
                    Decision::Updated
                } else {
                    Decision::Inherited
                }
            }
            _ => Decision::Inherited,
        };
        if rec.decision != expected {
            flag(g, AuditViolationKind::RuleDisagreement, format!("recorded {:?}, rule gives {expected:?}", rec.decision));
        }

        let applied = match rec.decision {
            Decision::Updated if model.hypotheses[g].is_some() => g,
            Decision::Updated | Decision::Inherited => inherited,
            Decision::Root => {
                flag(g, AuditViolationKind::RuleDisagreement, "non-root step marked root".into());
                inherited
            }
        };
        if rec.source != applied {
            flag(g, AuditViolationKind::SourceMismatch, format!("recorded source {}, replay gives {applied}", rec.source));
        }
        source[g] = applied;

        if applied == g {
            updates += 1;
            let h = model.hypotheses[g].as_ref().unwrap();
            for (&i, l) in rows.iter().zip(losses_on(h, train, rows, loss)) {
                cur_loss[i] = l;
            }
            for a in tree.ancestors(g) {
                let before = cur_risk[a];
                let after = masked_mean(&cur_loss, &members[a]).value;
                if let (Some(b), Some(x)) = (before, after) {
                    if x > b + SLACK {
                        flag(g, AuditViolationKind::AncestorIncrease, format!("`{}` rose from {b} to {x}", tree.node(a).group.id));
                    }
                }
                cur_risk[a] = after;
            }
        }
        cur_risk[g] = masked_mean(&cur_loss, rows).value;

        // Groups visited so far that are neither ancestors of g nor g are
        // disjoint from g, so their cached risks are current.
        if applied == g {
            for v in 0..=g {
                if let (Some(r), Some(e)) = (cur_risk[v], erm_risk[v]) {
                    checks += 1;
                    if r > e + eps[v] + SLACK {
                        flag(
                            g,
                            AuditViolationKind::StepInequality,
                            format!("`{}`: {r} > {e} + {}", tree.node(v).group.id, eps[v]),
                        );
                    }
                }
            }
        }
    }

    let final_risk = node_risks(model, train, &members, loss)?;
    for g in 0..tree.len() {
        if let (Some(r), Some(e)) = (final_risk[g].value, erm_risk[g]) {
            checks += 1;
            if r > e + eps[g] + SLACK {
                flag(g, AuditViolationKind::FinalGuarantee, format!("{r} > {e} + {}", eps[g]));
            }
        }
    }

    Ok(AuditReport {
        steps: tree.len(),
        updates,
        checks,
        violations,
    })
}
