//! Bounded losses and group-conditional empirical risk.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::groups::Group;
use crate::learners::{threshold, Classifier};

/// Default clip for the logistic loss: `ln(1000)`, i.e. scores within
/// 1e-3 of the wrong label cost the full unit.
pub fn default_clip_cap() -> f64 {
    1e3f64.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Loss {
    #[default]
    ZeroOne,
    ClippedLogistic {
        #[serde(default = "default_clip_cap")]
        clip_cap: f64,
    },
}

impl Loss {
    pub fn clipped_logistic() -> Self {
        Loss::ClippedLogistic {
            clip_cap: default_clip_cap(),
        }
    }

    /// Loss of a score in `[0, 1]` against a label; always in `[0, 1]`.
    pub fn eval(&self, score: f64, label: u8) -> f64 {
        match *self {
            Loss::ZeroOne => (threshold(score) != label) as u8 as f64,
            Loss::ClippedLogistic { clip_cap } => {
                let p = if label == 1 { score } else { 1.0 - score };
                let ll = -p.ln();
                if ll.is_nan() {
                    1.0
                } else {
                    (ll / clip_cap).clamp(0.0, 1.0)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Loss::ClippedLogistic { clip_cap } if !(clip_cap > 0.0 && clip_cap.is_finite()) => Err(
                Error::Config(format!("clip_cap must be positive and finite, got {clip_cap}")),
            ),
            _ => Ok(()),
        }
    }
}

/// A risk estimate; `value` is `None` when no rows support it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskValue {
    pub value: Option<f64>,
    pub support: usize,
}

impl RiskValue {
    pub const ABSENT: RiskValue = RiskValue {
        value: None,
        support: 0,
    };

    pub fn is_absent(&self) -> bool {
        self.value.is_none()
    }
}

const PAIRWISE_BLOCK: usize = 4096;

/// Sum with pairwise (cascade) summation above 4096 terms.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

pub(crate) fn mean_of(values: &[f64]) -> RiskValue {
    if values.is_empty() {
        RiskValue::ABSENT
    } else {
        RiskValue {
            value: Some(pairwise_sum(values) / values.len() as f64),
            support: values.len(),
        }
    }
}

/// Mean of `losses` over the listed rows.
pub fn masked_mean(losses: &[f64], rows: &[usize]) -> RiskValue {
    let picked: Vec<f64> = rows.iter().map(|&i| losses[i]).collect();
    mean_of(&picked)
}

/// Per-row losses of `f` on `ds`.
pub fn row_losses<C: Classifier + ?Sized>(f: &C, ds: &Dataset, loss: &Loss) -> Result<Vec<f64>> {
    Ok(f
        .scores(ds)?
        .iter()
        .zip(ds.labels())
        .map(|(&s, &y)| loss.eval(s, y))
        .collect())
}

/// `L_S(f)`: mean loss over every row.
pub fn empirical_risk<C: Classifier + ?Sized>(f: &C, ds: &Dataset, loss: &Loss) -> Result<RiskValue> {
    Ok(mean_of(&row_losses(f, ds, loss)?))
}

/// `L_S(f | g)`: mean loss over the rows in `g`; absent when `n_g = 0`.
pub fn group_risk<C: Classifier + ?Sized>(
    f: &C,
    ds: &Dataset,
    g: &Group,
    loss: &Loss,
) -> Result<RiskValue> {
    let compiled = g.compile(ds.attributes())?;
    let rows: Vec<usize> = ds
        .rows()
        .filter(|r| compiled.contains(r))
        .map(|r| r.index())
        .collect();
    if rows.is_empty() {
        return Ok(RiskValue::ABSENT);
    }
    Ok(masked_mean(&row_losses(f, ds, loss)?, &rows))
}

/// `|L_S(f | U) - sum_k (n_k / n_U) L_S(f | g_k)|` for pairwise-disjoint
/// `parts` with union `U`. Overlapping parts are an error.
pub fn decompose_check<C: Classifier + ?Sized>(
    f: &C,
    ds: &Dataset,
    parts: &[Group],
    loss: &Loss,
) -> Result<f64> {
    let mut owner: Vec<Option<usize>> = vec![None; ds.len()];
    let mut part_rows: Vec<Vec<usize>> = Vec::with_capacity(parts.len());
    for (k, g) in parts.iter().enumerate() {
        let compiled = g.compile(ds.attributes())?;
        let mut rows = Vec::new();
        for r in ds.rows() {
            if compiled.contains(&r) {
                if let Some(prev) = owner[r.index()] {
                    return Err(Error::Overlap(parts[prev].id.clone(), g.id.clone()));
                }
                owner[r.index()] = Some(k);
                rows.push(r.index());
            }
        }
        part_rows.push(rows);
    }

    let losses = row_losses(f, ds, loss)?;
    let union: Vec<usize> = (0..ds.len()).filter(|&i| owner[i].is_some()).collect();
    let Some(whole) = masked_mean(&losses, &union).value else {
        return Ok(0.0);
    };
    let n_union = union.len() as f64;
    let weighted: f64 = part_rows
        .iter()
        .filter_map(|rows| {
            masked_mean(&losses, rows)
                .value
                .map(|v| rows.len() as f64 / n_union * v)
        })
        .sum();
    Ok((whole - weighted).abs())
}
