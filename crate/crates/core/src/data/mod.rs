//! Tabular datasets: schema, ingestion, splitting and synthetic fixtures.

mod csv_io;
mod schema;
mod split;
pub mod synth;

use std::collections::BTreeSet;
use std::sync::Arc;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to};
pub use schema::{
    Attribute, AttributeSchema, AttributeSet, AttributeSource, BinSpec, ColumnKind, ColumnSpec,
};
pub use split::{split, split_indices, SplitSpec};
pub use synth::{make_synthetic, LabelRule, LeafSpec, SyntheticSpec};

use crate::error::{Error, Result};

/// Raw column-major values, aligned with the schema's column list.
pub(crate) enum RawColumn {
    Text(Vec<String>),
    Number(Vec<f64>),
}

/// An immutable sample of labeled examples.
///
/// Storage is columnar for the raw values and row-major for the derived
/// model features and attribute codes. Subsets share the schema, attribute
/// catalog and feature names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<AttributeSchema>,
    attributes: Arc<AttributeSet>,
    feature_names: Arc<Vec<String>>,
    n: usize,
    /// One vector per numeric schema column, in schema order.
    numeric: Vec<Vec<f64>>,
    /// Row-major `n x attributes.len()` category codes.
    codes: Vec<u32>,
    /// Row-major `n x feature_names.len()` model features.
    features: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    /// Builds a dataset from raw columns aligned with `schema.columns`.
    /// Categorical columns without declared categories get the sorted set
    /// of observed values.
    pub(crate) fn assemble(schema: &AttributeSchema, columns: Vec<RawColumn>) -> Result<Dataset> {
        schema.validate()?;
        debug_assert_eq!(columns.len(), schema.columns.len());
        let n = match columns.first() {
            Some(RawColumn::Text(v)) => v.len(),
            Some(RawColumn::Number(v)) => v.len(),
            None => 0,
        };
        if n == 0 {
            return Err(Error::EmptyDataset("no data rows".into()));
        }

        let mut resolved = schema.clone();
        let mut attrs = Vec::new();
        let mut attr_codes: Vec<Vec<u32>> = Vec::new();
        let mut numeric = Vec::new();
        let mut numeric_by_name = Vec::new();
        let mut labels = Vec::new();

        for (spec, column) in resolved.columns.iter_mut().zip(columns) {
            match (spec.kind, column) {
                (ColumnKind::Categorical, RawColumn::Text(values)) => {
                    let categories = match &spec.categories {
                        Some(c) => c.clone(),
                        None => values
                            .iter()
                            .collect::<BTreeSet<_>>()
                            .into_iter()
                            .cloned()
                            .collect(),
                    };
                    let attr = Attribute {
                        name: spec.name.clone(),
                        categories,
                        source: AttributeSource::Column,
                    };
                    let codes = values
                        .iter()
                        .enumerate()
                        .map(|(row, v)| {
                            attr.code(v).ok_or_else(|| Error::Value {
                                row: row + 1,
                                message: format!(
                                    "category `{v}` not declared for column `{}`",
                                    spec.name
                                ),
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    spec.categories = Some(attr.categories.clone());
                    attrs.push(attr);
                    attr_codes.push(codes);
                }
                (ColumnKind::Numeric, RawColumn::Number(values)) => {
                    numeric_by_name.push(spec.name.clone());
                    numeric.push(values);
                }
                (ColumnKind::BinaryLabel, RawColumn::Number(values)) => {
                    labels = values
                        .iter()
                        .enumerate()
                        .map(|(row, &v)| match v {
                            0.0 => Ok(0u8),
                            1.0 => Ok(1u8),
                            other => Err(Error::Value {
                                row: row + 1,
                                message: format!("label `{other}` is not 0 or 1"),
                            }),
                        })
                        .collect::<Result<Vec<_>>>()?;
                }
                (kind, _) => {
                    return Err(Error::Schema(format!(
                        "column `{}` of kind {kind:?} got mismatched values",
                        spec.name
                    )))
                }
            }
        }

        for bin in &resolved.bins {
            let source = numeric_by_name
                .iter()
                .position(|n| *n == bin.source)
                .expect("validated bin source");
            attr_codes.push(numeric[source].iter().map(|&v| bin.assign(v) as u32).collect());
            attrs.push(Attribute {
                name: bin.name.clone(),
                categories: bin.labels.clone(),
                source: AttributeSource::Bin {
                    source: bin.source.clone(),
                },
            });
        }

        // Features: numeric columns, then one-hot categorical columns.
        let excluded: BTreeSet<&str> = if resolved.exclude_group_features {
            resolved.group_attributes.iter().map(String::as_str).collect()
        } else {
            BTreeSet::new()
        };
        let mut feature_names: Vec<String> = numeric_by_name.clone();
        let mut one_hot = Vec::new();
        for (i, attr) in attrs.iter().enumerate() {
            if attr.source != AttributeSource::Column || excluded.contains(attr.name.as_str()) {
                continue;
            }
            for cat in &attr.categories {
                feature_names.push(format!("{}={}", attr.name, cat));
            }
            one_hot.push(i);
        }
        if feature_names.is_empty() {
            return Err(Error::Schema("schema yields no feature columns".into()));
        }

        let d = feature_names.len();
        let mut features = Vec::with_capacity(n * d);
        for row in 0..n {
            features.extend(numeric.iter().map(|col| col[row]));
            for &a in &one_hot {
                let code = attr_codes[a][row] as usize;
                features.extend((0..attrs[a].categories.len()).map(|c| (c == code) as u8 as f64));
            }
        }
        let n_attrs = attrs.len();
        let mut codes = Vec::with_capacity(n * n_attrs);
        for row in 0..n {
            codes.extend(attr_codes.iter().map(|col| col[row]));
        }

        Ok(Dataset {
            schema: Arc::new(resolved),
            attributes: Arc::new(AttributeSet::new(attrs)),
            feature_names: Arc::new(feature_names),
            n,
            numeric,
            codes,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// The schema with category lists filled in.
    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn attributes(&self) -> &AttributeSet {
        &self.attributes
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, index: usize) -> Row<'_> {
        assert!(index < self.n, "row {index} out of range for n={}", self.n);
        Row { ds: self, index }
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = Row<'_>> + '_ {
        (0..self.n).map(move |index| Row { ds: self, index })
    }

    /// The dataset restricted to `indices` (in the given order). An empty
    /// subset is allowed and yields `len() == 0`.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.n_features();
        let a = self.attributes.len();
        let mut features = Vec::with_capacity(indices.len() * d);
        let mut codes = Vec::with_capacity(indices.len() * a);
        for &i in indices {
            features.extend_from_slice(&self.features[i * d..(i + 1) * d]);
            codes.extend_from_slice(&self.codes[i * a..(i + 1) * a]);
        }
        Dataset {
            schema: Arc::clone(&self.schema),
            attributes: Arc::clone(&self.attributes),
            feature_names: Arc::clone(&self.feature_names),
            n: indices.len(),
            numeric: self
                .numeric
                .iter()
                .map(|col| indices.iter().map(|&i| col[i]).collect())
                .collect(),
            codes,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub(crate) fn numeric_column(&self, index: usize) -> &[f64] {
        &self.numeric[index]
    }
}

/// A borrowed view of one example.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    ds: &'a Dataset,
    index: usize,
}

impl<'a> Row<'a> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.ds
    }

    pub fn features(&self) -> &'a [f64] {
        let d = self.ds.n_features();
        &self.ds.features[self.index * d..(self.index + 1) * d]
    }

    pub fn label(&self) -> u8 {
        self.ds.labels[self.index]
    }

    /// Category code of attribute `attr` (an index into the dataset's
    /// [`AttributeSet`]).
    pub fn code(&self, attr: usize) -> u32 {
        self.ds.codes[self.index * self.ds.attributes.len() + attr]
    }

    pub fn category(&self, attr: &str) -> Option<&'a str> {
        let i = self.ds.attributes.index(attr)?;
        Some(self.ds.attributes.get(i).categories[self.code(i) as usize].as_str())
    }

    /// `name=value` pairs for every attribute, for diagnostics.
    pub fn describe(&self) -> String {
        self.ds
            .attributes
            .iter()
            .enumerate()
            .map(|(i, a)| format!("{}={}", a.name, a.categories[self.code(i) as usize]))
            .collect::<Vec<_>>()
            .join(", ")
    }
}
