//! Planted-model fixtures: each leaf group gets its own labeling rule.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttributeSchema, ColumnKind, ColumnSpec, Dataset, RawColumn};
use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "y";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelRule {
    Constant { label: u8 },
    /// `y = 1` iff `weights . x + bias >= 0`.
    Linear { weights: Vec<f64>, bias: f64 },
}

impl LabelRule {
    pub fn label(&self, x: &[f64]) -> u8 {
        match self {
            LabelRule::Constant { label } => *label,
            LabelRule::Linear { weights, bias } => {
                let z: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
                (z >= 0.0) as u8
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafSpec {
    /// One category per entry of [`SyntheticSpec::attributes`].
    pub categories: Vec<String>,
    pub n: usize,
    pub rule: LabelRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub attributes: Vec<String>,
    pub dim: usize,
    #[serde(default)]
    pub noise: f64,
    pub leaves: Vec<LeafSpec>,
    #[serde(default)]
    pub exclude_group_features: bool,
}

impl SyntheticSpec {
    pub fn feature_column(i: usize) -> String {
        format!("x{i}")
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::Synthetic(format!(
                "noise rate {} not in [0, 0.5)",
                self.noise
            )));
        }
        if self.leaves.is_empty() {
            return Err(Error::Synthetic("no leaves".into()));
        }
        if self.dim == 0 {
            return Err(Error::Synthetic("dim must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        for leaf in &self.leaves {
            if leaf.categories.len() != self.attributes.len() {
                return Err(Error::Synthetic(format!(
                    "leaf {:?} has {} categories for {} attributes",
                    leaf.categories,
                    leaf.categories.len(),
                    self.attributes.len()
                )));
            }
            if !seen.insert(&leaf.categories) {
                return Err(Error::Synthetic(format!(
                    "duplicate leaf {:?}",
                    leaf.categories
                )));
            }
            match &leaf.rule {
                LabelRule::Constant { label } if *label > 1 => {
                    return Err(Error::Synthetic(format!("constant label {label}")))
                }
                LabelRule::Linear { weights, .. } if weights.len() != self.dim => {
                    return Err(Error::Synthetic(format!(
                        "linear rule has {} weights for dim {}",
                        weights.len(),
                        self.dim
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Schema of the generated dataset: group attributes, then `x0..`, then `y`.
    pub fn schema(&self) -> AttributeSchema {
        let mut columns: Vec<ColumnSpec> = self
            .attributes
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let cats: BTreeSet<&String> = self.leaves.iter().map(|l| &l.categories[i]).collect();
                ColumnSpec {
                    name: name.clone(),
                    kind: ColumnKind::Categorical,
                    categories: Some(cats.into_iter().cloned().collect()),
                }
            })
            .collect();
        columns.extend((0..self.dim).map(|i| ColumnSpec::numeric(Self::feature_column(i))));
        columns.push(ColumnSpec::label(LABEL_COLUMN));
        AttributeSchema {
            columns,
            label: LABEL_COLUMN.into(),
            group_attributes: self.attributes.clone(),
            bins: vec![],
            exclude_group_features: self.exclude_group_features,
        }
    }

    /// The leaf a row of a generated dataset belongs to.
    pub fn leaf_of(&self, row: &super::Row<'_>) -> Option<usize> {
        self.leaves.iter().position(|leaf| {
            self.attributes
                .iter()
                .zip(&leaf.categories)
                .all(|(a, c)| row.category(a) == Some(c.as_str()))
        })
    }

    /// Raw feature values of a generated row, in `x0..` order.
    pub fn raw_features(&self, row: &super::Row<'_>) -> Vec<f64> {
        let names = row.dataset().feature_names();
        (0..self.dim)
            .map(|i| {
                let col = Self::feature_column(i);
                let j = names.iter().position(|n| *n == col).expect("feature column");
                row.features()[j]
            })
            .collect()
    }
}

/// Draws features uniformly from `[-1, 1]^dim`, labels each leaf's rows by
/// its rule, and flips each label independently with probability `noise`.
pub fn make_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let total: usize = spec.leaves.iter().map(|l| l.n).sum();
    if total == 0 {
        return Err(Error::Synthetic("leaves hold zero rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attrs: Vec<Vec<String>> = vec![Vec::with_capacity(total); spec.attributes.len()];
    let mut features: Vec<Vec<f64>> = vec![Vec::with_capacity(total); spec.dim];
    let mut labels = Vec::with_capacity(total);
    let mut x = vec![0.0; spec.dim];

    for leaf in &spec.leaves {
        for _ in 0..leaf.n {
            for v in x.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let mut y = leaf.rule.label(&x);
            if rng.gen::<f64>() < spec.noise {
                y = 1 - y;
            }
            for (col, cat) in attrs.iter_mut().zip(&leaf.categories) {
                col.push(cat.clone());
            }
            for (col, &v) in features.iter_mut().zip(&x) {
                col.push(v);
            }
            labels.push(y as f64);
        }
    }

    let mut columns: Vec<RawColumn> = attrs.into_iter().map(RawColumn::Text).collect();
    columns.extend(features.into_iter().map(RawColumn::Number));
    columns.push(RawColumn::Number(labels));
    Dataset::assemble(&spec.schema(), columns)
}

/// Ranges for [`random_hierarchical`].
#[derive(Debug, Clone)]
pub struct RandomShape {
    pub attributes: std::ops::RangeInclusive<usize>,
    pub categories: std::ops::RangeInclusive<usize>,
    pub rows: std::ops::RangeInclusive<usize>,
    pub dim: usize,
    pub noise: f64,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape {
            attributes: 2..=4,
            categories: 2..=4,
            rows: 200..=5000,
            dim: 2,
            noise: 0.1,
        }
    }
}

/// [`random_hierarchical`] with the default shape, drawn from a ChaCha8
/// stream seeded by `seed`.
pub fn random_spec(seed: u64) -> SyntheticSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_hierarchical(&mut rng, &RandomShape::default())
}

/// A random planted spec over the full attribute product. Leaf sizes are
/// drawn from skewed random weights, so some leaves may be empty; each
/// leaf's rule is a random linear separator or a random constant.
pub fn random_hierarchical<R: Rng>(rng: &mut R, shape: &RandomShape) -> SyntheticSpec {
    let n_attrs = rng.gen_range(shape.attributes.clone());
    let cats: Vec<usize> = (0..n_attrs)
        .map(|_| rng.gen_range(shape.categories.clone()))
        .collect();
    let attributes: Vec<String> = (0..n_attrs).map(|a| format!("a{a}")).collect();

    let mut leaves_cats: Vec<Vec<String>> = vec![vec![]];
    for (a, &k) in cats.iter().enumerate() {
        leaves_cats = leaves_cats
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |c| {
                    let mut p = prefix.clone();
                    p.push(format!("a{a}c{c}"));
                    p
                })
            })
            .collect();
    }

    let rows = rng.gen_range(shape.rows.clone());
    let weights: Vec<f64> = leaves_cats
        .iter()
        .map(|_| rng.gen::<f64>().powi(3))
        .collect();
    let wsum: f64 = weights.iter().sum();
    let mut counts: Vec<usize> = weights
        .iter()
        .map(|w| (w / wsum * rows as f64).floor() as usize)
        .collect();
    let assigned: usize = counts.iter().sum();
    counts[0] += rows - assigned;

    let leaves = leaves_cats
        .into_iter()
        .zip(counts)
        .map(|(categories, n)| {
            let rule = if rng.gen_bool(0.3) {
                LabelRule::Constant {
                    label: rng.gen_range(0..=1),
                }
            } else {
                LabelRule::Linear {
                    weights: (0..shape.dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    bias: rng.gen_range(-0.5..0.5),
                }
            };
            LeafSpec { categories, n, rule }
        })
        .collect();

    SyntheticSpec {
        attributes,
        dim: shape.dim,
        noise: shape.noise,
        leaves,
        exclude_group_features: false,
    }
}
